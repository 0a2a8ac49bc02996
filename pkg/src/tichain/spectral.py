"""Extremal eigenpairs of the assembled operators.

Three routes are available. ``dense`` diagonalizes the full matrix and is
the reference for everything up to a few thousand states. ``lanczos`` is a
thick-restart Krylov solver with full reorthogonalization. ``blocks`` splits
the operator into connected components of its sparsity graph (the
Hamiltonians here are far from irreducible) and diagonalizes components of
equal size in batches, falling back to Lanczos for components above the
dense limit.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .configspace import (
    BasisIndex,
    chain_rules,
    count_chain_states,
    cycle_rules,
    enumerate_chain_basis,
    enumerate_cycle_basis,
)
from .hamiltonian import OperatorWeights, SparseOperator, assemble_cycle, combine, size_values
from .transition import Path

__all__ = [
    "ConvergenceError",
    "MarginError",
    "SpectralResult",
    "ChainWeight",
    "DENSE_LIMIT",
    "CLUSTER_RTOL",
    "lanczos_lowest",
    "lowest_eigenpairs",
    "spectral_gap",
    "null_space_dimension",
    "verify_path_block",
    "path_block",
    "measure_chain_weight",
    "layout_blocks",
    "LayoutSpectrum",
    "CycleSpectrum",
    "cycle_spectrum",
    "spectral_record",
]

DENSE_LIMIT = 2000
DENSE_FALLBACK = 6000  # largest component diagonalized densely when Lanczos stalls
CLUSTER_RTOL = 1e-7
DEFAULT_TOL = 1e-9
DEFAULT_SEED = 42


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, best_residual: float):
        super().__init__(f"{message} (best residual {best_residual:.3e})")
        self.best_residual = best_residual


class MarginError(RuntimeError):
    """The spectrum has no cleanly separated cluster near zero."""


@dataclass
class SpectralResult:
    """Lowest part of a spectrum.

    ``eigenvalues`` holds the lowest eigenvalues with multiplicity, at least
    through the first level above the ground cluster when one exists.
    ``ground_vectors`` is an orthonormal basis of the ground cluster, or
    ``None`` when the cluster is larger than the solver was asked to embed.
    """

    eigenvalues: np.ndarray
    degeneracy: int
    ground_vectors: np.ndarray | None
    residuals: np.ndarray
    iterations: int
    method: str
    norm_bound: float
    dim: int
    wall_ms: float = 0.0

    @property
    def lambda0(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lambda1(self) -> float:
        """Lowest eigenvalue above the ground cluster (nan if there is none)."""
        d = self.degeneracy
        return float(self.eigenvalues[d]) if d < len(self.eigenvalues) else math.nan

    @property
    def gap(self) -> float:
        return self.lambda1 - self.lambda0

    @property
    def normalized_gap(self) -> float:
        return self.gap / self.norm_bound if self.norm_bound else math.nan


def cluster_threshold(lam0: float, rtol: float = CLUSTER_RTOL) -> float:
    return rtol * max(1.0, abs(lam0))


def ground_cluster_size(vals: np.ndarray, rtol: float = CLUSTER_RTOL) -> int:
    vals = np.sort(np.asarray(vals))
    if not len(vals):
        return 0
    return int(np.count_nonzero(vals - vals[0] <= cluster_threshold(vals[0], rtol)))


def _matrix(op):
    return op.matrix if isinstance(op, SparseOperator) else sp.csr_matrix(op)


def _norm_bound(op, mat):
    if isinstance(op, SparseOperator):
        return op.norm_bound
    return float(abs(mat).sum(axis=1).max()) if mat.shape[0] else 0.0


def _residuals(mat, vals, vecs):
    if vecs.size == 0:
        return np.zeros(0)
    return np.linalg.norm(mat @ vecs - vecs * vals[None, :], axis=0)


# ---------------------------------------------------------------- Lanczos


def _orthonormalize_into(V, w):
    """Orthogonalize ``w`` against the columns of ``V`` (twice); None if it vanishes."""
    for _ in range(2):
        w = w - V @ (V.T @ w)
    nw = np.linalg.norm(w)
    return None if nw < 1e-10 else w / nw


def lanczos_lowest(
    mat,
    k: int,
    tol: float = DEFAULT_TOL,
    seed: int = DEFAULT_SEED,
    max_iter: int = 300,
    krylov_dim: int | None = None,
):
    """``k`` lowest eigenpairs by thick-restart Lanczos.

    The Krylov basis is kept fully orthogonal. At each restart the best
    Ritz vectors are retained and the residuals of the unconverged wanted
    pairs are appended, so degenerate eigenvalues are found as well.
    Returns ``(values, vectors, matvecs)``.
    """
    mat = sp.csr_matrix(mat)
    dim = mat.shape[0]
    if k > dim:
        raise ValueError(f"k={k} exceeds dimension {dim}")
    rng = np.random.default_rng(seed)
    m = min(dim, max(krylov_dim or 60, 4 * k + 20))
    V, _ = np.linalg.qr(rng.standard_normal((dim, k)))
    AV = mat @ V
    matvecs = k
    best = math.inf
    for _restart in range(max_iter):
        while V.shape[1] < m:
            q = _orthonormalize_into(V, AV[:, -1])
            if q is None:
                q = _orthonormalize_into(V, rng.standard_normal(dim))
                if q is None:
                    break
            V = np.column_stack([V, q])
            AV = np.column_stack([AV, mat @ q])
            matvecs += 1
        H = V.T @ AV
        theta, S = np.linalg.eigh((H + H.T) / 2)
        X = V @ S[:, :k]
        R = AV @ S[:, :k] - X * theta[:k]
        res = np.linalg.norm(R, axis=0)
        best = min(best, float(res.max()))
        if (res < tol).all() or V.shape[1] == dim:
            return theta[:k], X, matvecs
        keep = min(V.shape[1], max(2 * k, m // 3))
        V = V @ S[:, :keep]
        AV = AV @ S[:, :keep]
        for j in np.flatnonzero(res >= tol):
            q = _orthonormalize_into(V, R[:, j])
            if q is not None:
                V = np.column_stack([V, q])
                AV = np.column_stack([AV, mat @ q])
                matvecs += 1
    raise ConvergenceError(f"Lanczos did not converge after {max_iter} restarts", best)


# ---------------------------------------------------------------- blocks


class _Components:
    """Connected components of a sparse Hermitian matrix, solved separately.

    Components up to ``DENSE_LIMIT`` states are diagonalized completely, in
    batches of equal size; larger ones by Lanczos, widened on demand.
    """

    def __init__(self, mat, tol, seed, max_iter):
        self.mat, self.tol, self.seed, self.max_iter = mat, tol, seed, max_iter
        dim = mat.shape[0]
        ncomp, labels = connected_components(mat, directed=False)
        self.order = np.argsort(labels, kind="stable")
        self.sizes = np.bincount(labels, minlength=ncomp)
        self.starts = np.concatenate([[0], np.cumsum(self.sizes)])
        self.local = np.empty(dim, dtype=np.int64)
        self.local[self.order] = np.arange(dim) - self.starts[labels[self.order]]
        coo = mat.tocoo()
        ecomp = labels[coo.row]
        eorder = np.argsort(ecomp, kind="stable")
        self.erow, self.ecol = coo.row[eorder], coo.col[eorder]
        self.edat, self.ecomp = coo.data[eorder], ecomp[eorder]
        self.estart = np.concatenate([[0], np.cumsum(np.bincount(ecomp, minlength=ncomp))])
        self.values: dict[int, np.ndarray] = {}
        self.complete: dict[int, bool] = {}
        self.iterations = 0

    def indices(self, c):
        return self.order[self.starts[c] : self.starts[c + 1]]

    def _dense_batch(self, group, s):
        slot = np.full(len(self.sizes), -1)
        slot[group] = np.arange(len(group))
        sel = np.concatenate([np.arange(self.estart[c], self.estart[c + 1]) for c in group])
        batch = np.zeros((len(group), s, s))
        batch[slot[self.ecomp[sel]], self.local[self.erow[sel]], self.local[self.ecol[sel]]] = (
            self.edat[sel]
        )
        return batch

    def _lanczos(self, c, kk):
        """Lowest ``kk`` pairs of one component.

        A crowded low spectrum can stall the default Krylov size; retry
        with a wider space, then diagonalize densely if the component is
        small enough.
        """
        idx = self.indices(c)
        sub = self.mat[idx][:, idx]
        s = self.sizes[c]
        for krylov in (None, min(s, 200)):
            try:
                vals, vecs, it = lanczos_lowest(sub, kk, self.tol, self.seed, self.max_iter,
                                                krylov_dim=krylov)
            except ConvergenceError:
                if krylov is None:
                    continue
                if s > DENSE_FALLBACK:
                    raise
                break
            self.iterations += it
            return vals, vecs
        vals, vecs = np.linalg.eigh(self._dense_batch(np.array([c]), s)[0])
        return vals[:kk], vecs[:, :kk]

    def solve_values(self, k_big: int = 4):
        for s in np.unique(self.sizes):
            comps = np.flatnonzero(self.sizes == s)
            if s > DENSE_LIMIT:
                for c in comps:
                    self.values[c] = self._lanczos(c, min(k_big, s))[0]
                    self.complete[c] = False
                continue
            chunk = max(1, int(1e7 // (s * s)))
            for lo in range(0, len(comps), chunk):
                group = comps[lo : lo + chunk]
                vals = np.linalg.eigvalsh(self._dense_batch(group, s))
                for gi, c in enumerate(group):
                    self.values[c] = vals[gi]
                    self.complete[c] = True

    def widen(self, c):
        kk = min(self.sizes[c], 2 * len(self.values[c]))
        self.values[c] = self._lanczos(c, kk)[0]
        self.complete[c] = kk == self.sizes[c]

    def ensure_below(self, x):
        """Widen iterative components until every value below ``x`` is known."""
        changed = True
        while changed:
            changed = False
            for c, done in self.complete.items():
                if not done and self.values[c][-1] < x:
                    self.widen(c)
                    changed = True

    def all_values(self):
        return np.sort(np.concatenate(list(self.values.values())))

    def vectors_below(self, x):
        """Eigenpairs below ``x``, embedded in the full space."""
        vals_out, cols = [], []
        dim = self.mat.shape[0]
        for c, vals in self.values.items():
            cnt = int(np.count_nonzero(vals < x))
            if not cnt:
                continue
            idx = self.indices(c)
            if self.sizes[c] > DENSE_LIMIT:
                v, vecs = self._lanczos(c, cnt)
            else:
                v, vecs = np.linalg.eigh(self._dense_batch(np.array([c]), self.sizes[c])[0])
                v, vecs = v[:cnt], vecs[:, :cnt]
            for i in range(cnt):
                col = np.zeros(dim)
                col[idx] = vecs[:, i]
                cols.append(col)
                vals_out.append(v[i])
        order = np.argsort(vals_out, kind="stable")
        return np.array(vals_out)[order], np.column_stack(cols)[:, order]


def _resolve(method, dim):
    if method == "auto":
        return "dense" if dim <= DENSE_LIMIT else "blocks"
    if method not in ("dense", "lanczos", "blocks"):
        raise ValueError(f"unknown method {method!r}")
    return method


def lowest_eigenpairs(
    op,
    k: int = 2,
    tol: float = DEFAULT_TOL,
    method: str = "auto",
    seed: int = DEFAULT_SEED,
    max_iter: int = 300,
    max_vectors: int = 512,
) -> SpectralResult:
    """The ``k`` lowest eigenvalues, the ground cluster and the level above it.

    Ground vectors are returned when the cluster has at most
    ``max_vectors`` members.
    """
    mat = _matrix(op)
    dim = mat.shape[0]
    if k > dim or k < 1:
        raise ValueError(f"k={k} out of range for dimension {dim}")
    method = _resolve(method, dim)
    t0 = time.perf_counter()
    iterations = 0
    vecs = None
    if method == "dense":
        vals, allvecs = np.linalg.eigh(mat.toarray())
        deg = ground_cluster_size(vals)
        vals = vals[: max(k, deg + 1)]
        if deg <= max_vectors:
            vecs = allvecs[:, :deg]
    elif method == "lanczos":
        kk = k
        while True:
            vals, allvecs, it = lanczos_lowest(mat, kk, tol, seed, max_iter)
            iterations += it
            deg = ground_cluster_size(vals)
            if deg < kk or kk == dim:
                break
            kk = min(dim, 2 * kk)
        if deg <= max_vectors:
            vecs = allvecs[:, :deg]
    else:
        comp = _Components(mat, tol, seed, max_iter)
        comp.solve_values()
        while True:
            vals = comp.all_values()
            deg = ground_cluster_size(vals)
            want = min(len(vals), max(k, deg + 1))
            x = vals[want - 1]
            comp.ensure_below(x + cluster_threshold(vals[0]))
            again = comp.all_values()
            if len(again) == len(vals) and np.array_equal(again, vals):
                break
        vals = vals[:want]
        iterations = comp.iterations
        if deg <= max_vectors:
            _, vecs = comp.vectors_below(vals[0] + cluster_threshold(vals[0]) * (1 + 1e-9))
            iterations = comp.iterations
    wall = (time.perf_counter() - t0) * 1000
    if vecs is not None:
        res = _residuals(mat, np.full(vecs.shape[1], vals[0]), vecs)
    else:
        res = np.zeros(0)
    return SpectralResult(
        vals, deg, vecs, res, iterations, method, _norm_bound(op, mat), dim, wall
    )


def spectral_gap(op, tol: float = DEFAULT_TOL, method: str = "auto", seed: int = DEFAULT_SEED):
    """``(lambda0, lambda1, gap, normalized_gap)``; lambda1 is the first level above the ground cluster."""
    if _matrix(op).shape[0] < 2:
        raise ValueError("gap needs dimension >= 2")
    r = lowest_eigenpairs(op, 2, tol, method, seed, max_vectors=0)
    return r.lambda0, r.lambda1, r.gap, r.normalized_gap


def null_space_dimension(
    op, tol: float = 1e-8, method: str = "auto", seed: int = DEFAULT_SEED
) -> int:
    """Number of eigenvalues below ``tol``; the next one must exceed ``10 tol``."""
    mat = _matrix(op)
    dim = mat.shape[0]
    if dim == 0:
        return 0
    method = _resolve(method, dim)
    if method == "dense":
        vals = np.linalg.eigvalsh(mat.toarray())
    elif method == "lanczos":
        kk = min(dim, 4)
        while True:
            vals, _, _ = lanczos_lowest(mat, kk, tol * 1e-2, seed)
            if vals[-1] > 10 * tol or kk == dim:
                break
            kk = min(dim, 2 * kk)
    else:
        comp = _Components(mat, tol * 1e-2, seed, 300)
        comp.solve_values()
        comp.ensure_below(10 * tol + tol)
        vals = comp.all_values()
    if vals[0] < -tol:
        raise MarginError(f"operator is not positive semidefinite: {vals[0]:.3e}")
    count = int(np.count_nonzero(vals < tol))
    if count < len(vals) and vals[count] <= 10 * tol:
        raise MarginError(
            f"eigenvalue {vals[count]:.3e} after {count} zero modes is within 10x of tol={tol}"
        )
    return count


def path_block(K: int) -> np.ndarray:
    """Tridiagonal transition block: 1/2 corners, 1 inside, -1/2 off the diagonal."""
    if K == 1:
        return np.zeros((1, 1))
    m = np.diag(np.full(K, 1.0)) - 0.5 * (np.eye(K, k=1) + np.eye(K, k=-1))
    m[0, 0] = m[-1, -1] = 0.5
    return m


def verify_path_block(h_trans: SparseOperator, p: Path, tol: float = 1e-12) -> bool:
    idx = h_trans.basis.index(p.array)
    if (idx < 0).any():
        raise KeyError("path state missing from the basis")
    block = h_trans.restrict(idx)
    return bool(np.abs(block - path_block(len(idx))).max() <= tol)


# ---------------------------------------------------------------- cycle helpers


def layout_blocks(basis: BasisIndex) -> list[np.ndarray]:
    """Index sets of cycle states sharing the same delimiter positions.

    No rule creates, destroys or moves a delimiter, so every cycle operator
    is block diagonal over these sets.
    """
    rs = basis.rs
    left, right = rs.code("LEFT_END"), rs.code("RIGHT_END")
    keys = np.zeros(basis.dim, dtype=np.int64)
    for j in range(basis.n):
        col = basis.states[:, j]
        keys *= 3
        keys += (col == left) + 2 * (col == right)
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    cuts = np.flatnonzero(np.diff(sorted_keys)) + 1
    return np.split(order, cuts)


@dataclass(frozen=True)
class ChainWeight:
    """Weight p(n) = ceil((2 n^2 B^2 + 2 B) / gamma) and its ingredients."""

    n: int
    p: int
    size_norm: Fraction
    chain_gap: float
    lengths: tuple[int, ...]
    gaps: tuple[float, ...]
    skipped: tuple[int, ...]


@lru_cache(maxsize=None)
def measure_chain_weight(n: int, max_states: int = 600_000) -> ChainWeight:
    """Measure the size-term norm and the segment gap on lengths 4..2n.

    A segment of length l is a single bracketed chain; its terms are those
    of the cycle rule set. Lengths whose basis exceeds ``max_states`` are
    skipped and listed in ``skipped``.
    """
    rs = cycle_rules()
    lengths, gaps, skipped = [], [], []
    B = Fraction(0)
    for length in range(4, 2 * n + 1):
        if count_chain_states(length, "bracketed", chain_rules()) > max_states:
            skipped.append(length)
            continue
        basis = enumerate_chain_basis(length, "bracketed", chain_rules())
        size = size_values(basis, n, rs)
        B = max(B, max(abs(size.min()), abs(size.max())))
        core = combine({"trans": 1, "legal": 1, "init": 1}, rs, basis)
        r = lowest_eigenpairs(core, 2)
        gap = r.lambda1 if length % 2 else r.lambda0
        lengths.append(length)
        gaps.append(float(gap))
    gamma = min(gaps)
    p = math.ceil((2 * n * n * B * B + 2 * B) / Fraction(gamma))
    return ChainWeight(n, p, B, gamma, tuple(lengths), tuple(gaps), tuple(skipped))


def layout_label(row: np.ndarray, rs) -> str:
    """Delimiter pattern of a cycle state, e.g. ``<...><...>``."""
    left, right = rs.code("LEFT_END"), rs.code("RIGHT_END")
    return "".join("<" if c == left else ">" if c == right else "." for c in row)


@dataclass(frozen=True)
class LayoutSpectrum:
    label: str
    dim: int
    lambda0: float
    lambda1: float
    degeneracy: int


@dataclass
class CycleSpectrum:
    """Cycle spectrum merged over delimiter layouts."""

    n: int
    t: int
    chain_weight: int
    layouts: list[LayoutSpectrum]
    result: SpectralResult

    @property
    def ground_layouts(self) -> list[LayoutSpectrum]:
        cut = self.result.lambda0 + cluster_threshold(self.result.lambda0)
        return [lay for lay in self.layouts if lay.lambda0 <= cut]


def cycle_spectrum(
    n: int,
    t: int,
    weights: OperatorWeights | None = None,
    tol: float = DEFAULT_TOL,
    seed: int = DEFAULT_SEED,
    max_states: int = 10**8,
    basis: BasisIndex | None = None,
) -> CycleSpectrum:
    """Lowest levels of ``p H_chain + H_size`` on a cycle of ``n t`` sites.

    The operator is block diagonal over delimiter layouts, so each layout
    is assembled and solved on its own; peak memory is set by the largest
    layout rather than the whole cycle.
    """
    weights = weights or OperatorWeights.default(n)
    t0 = time.perf_counter()
    if basis is None:
        basis = enumerate_cycle_basis(n * t, cycle_rules(), max_states=max_states)
    rs = basis.rs
    layouts, values, norm, iterations = [], [], 0.0, 0
    for idx in layout_blocks(basis):
        sub = BasisIndex(basis.states[idx], rs, "cycle", basis.filter, presorted=True)
        op = assemble_cycle(n, t, weights, basis=sub)
        r = lowest_eigenpairs(op, 2, tol, seed=seed, max_vectors=0)
        layouts.append(
            LayoutSpectrum(layout_label(sub.states[0], rs), sub.dim, r.lambda0, r.lambda1,
                           r.degeneracy)
        )
        values.append(r.eigenvalues)
        norm = max(norm, r.norm_bound)
        iterations += r.iterations
        del op, sub
    vals = np.sort(np.concatenate(values))
    deg = ground_cluster_size(vals)
    vals = vals[: deg + 1]
    wall = (time.perf_counter() - t0) * 1000
    result = SpectralResult(vals, deg, None, np.zeros(0), iterations, "layouts", norm,
                            basis.dim, wall)
    layouts.sort(key=lambda lay: (lay.lambda0, lay.label))
    return CycleSpectrum(n, t, weights.chain_weight, layouts, result)


# ---------------------------------------------------------------- records


def spectral_record(r: SpectralResult, kind: str, n: int, t: int = 1, variant=None) -> dict:
    """JSON-ready summary of one solve."""
    return {
        "kind": kind,
        "n": n,
        "t": t,
        "variant": variant,
        "dim": r.dim,
        "lambda0": r.lambda0,
        "lambda1": None if math.isnan(r.lambda1) else r.lambda1,
        "gap": None if math.isnan(r.gap) else r.gap,
        "normalized_gap": None if math.isnan(r.normalized_gap) else r.normalized_gap,
        "degeneracy": r.degeneracy,
        "residuals": [float(x) for x in r.residuals],
        "iterations": r.iterations,
        "wall_ms": round(r.wall_ms, 3),
    }
