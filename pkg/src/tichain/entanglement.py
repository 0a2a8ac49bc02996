"""Ground states, reduced density matrices and entanglement entropy.

States are stored support-sparse: the rows of every standard basis state
with nonzero amplitude. A reduced density matrix on a region A is never
formed over all 21^|A| configurations. Instead the amplitudes are arranged
as a matrix M indexed by (restriction to A, restriction to the complement),
so that rho_A = M M^T, and its spectrum is read off from the singular
values of M one connected block at a time.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .configspace import (
    BasisIndex,
    Region,
    chain_rules,
    cycle_rules,
    format_state,
    good_start_state,
)
from .ruleset import RuleSet
from .transition import extract_path, path_count_formula

__all__ = [
    "StateVector",
    "DensityMatrix",
    "EntropyReport",
    "construct_phi_x",
    "construct_phi_g",
    "split_phi_g",
    "construct_cycle_state",
    "cycle_layout",
    "reduced_density",
    "entropy",
    "entropy_bits",
    "entropy_sweep",
    "good_particle_count",
    "cycle_entropy_bound",
    "sweep_csv",
    "CSV_HEADER",
]

EIG_FLOOR = 1e-14
CSV_HEADER = ("n", "t", "state", "region_start", "region_len", "entropy_bits",
              "s_bound", "c_split", "good_count")


def _keys(rows: np.ndarray) -> np.ndarray:
    rows = np.ascontiguousarray(rows, dtype=np.uint8)
    return rows.view(np.dtype((np.void, rows.shape[1]))).ravel()


@dataclass
class StateVector:
    """Real amplitudes on a set of standard basis states (rows sorted, unique)."""

    states: np.ndarray
    amplitudes: np.ndarray
    topology: str = "chain"
    rs: RuleSet | None = field(default=None, repr=False)
    label: str = ""

    def __post_init__(self):
        states = np.ascontiguousarray(np.atleast_2d(self.states), dtype=np.uint8)
        amps = np.asarray(self.amplitudes, dtype=float)
        if len(states) != len(amps):
            raise ValueError("one amplitude per state is required")
        keys, first, inv = np.unique(_keys(states), return_index=True, return_inverse=True)
        if len(keys) != len(states):
            summed = np.zeros(len(keys))
            np.add.at(summed, inv, amps)
            states, amps = states[first], summed
        else:
            states, amps = states[first], amps[first]
        keep = amps != 0
        self.states, self.amplitudes = states[keep], amps[keep]
        if self.rs is None:
            self.rs = cycle_rules() if self.topology == "cycle" else chain_rules()

    @property
    def n_sites(self) -> int:
        return self.states.shape[1]

    @property
    def support_size(self) -> int:
        return len(self.amplitudes)

    @cached_property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        return StateVector(self.states, self.amplitudes / self.norm, self.topology, self.rs, self.label)

    def indices(self, basis: BasisIndex) -> np.ndarray:
        idx = basis.index(self.states)
        if (idx < 0).any():
            bad = self.states[np.flatnonzero(idx < 0)[0]]
            raise KeyError(f"support state not in basis: {format_state(bad, self.rs)}")
        return idx

    def to_dense(self, basis: BasisIndex) -> np.ndarray:
        out = np.zeros(basis.dim)
        out[self.indices(basis)] = self.amplitudes
        return out

    def overlap(self, other: "StateVector") -> float:
        common, ia, ib = np.intersect1d(
            _keys(self.states), _keys(other.states), assume_unique=True, return_indices=True
        )
        return float(self.amplitudes[ia] @ other.amplitudes[ib])

    def energy(self, op) -> float:
        v = self.to_dense(op.basis)
        return float(v @ (op.matrix @ v)) / float(v @ v)

    def residual(self, op, value: float | None = None) -> float:
        """``||H v - value v||`` with ``value`` defaulting to the Rayleigh quotient."""
        v = self.to_dense(op.basis)
        hv = op.matrix @ v
        lam = float(v @ hv) / float(v @ v) if value is None else value
        return float(np.linalg.norm(hv - lam * v))

    def rotate(self, k: int) -> "StateVector":
        return StateVector(np.roll(self.states, k, axis=1), self.amplitudes, self.topology, self.rs,
                           self.label)


def _good_path(n: int, x, rs: RuleSet):
    start = good_start_state(n, x, rs)
    return extract_path(start, rs).array


def _check_n(n):
    if n < 5 or n % 2 == 0:
        raise ValueError(f"n must be odd and >= 5, got {n}")


def construct_phi_x(n: int, x, rs: RuleSet | None = None) -> StateVector:
    """Uniform superposition over the good path whose U qubits start as ``x``."""
    _check_n(n)
    rs = rs or chain_rules()
    m = (n - 3) // 2
    x = tuple(int(b) for b in x)
    if len(x) != m:
        raise ValueError(f"x needs {m} bits, got {len(x)}")
    rows = _good_path(n, x, rs)
    T = path_count_formula(n)
    if len(rows) != T:
        raise RuntimeError(f"good path has {len(rows)} states, expected {T}")
    bits = "".join(map(str, x))
    return StateVector(rows, np.full(T, 1 / math.sqrt(T)), "chain", rs, f"phi_x:{bits}")


def _all_paths(n, rs):
    m = (n - 3) // 2
    paths = [_good_path(n, tuple((v >> (m - 1 - j)) & 1 for j in range(m)), rs)
             for v in range(2**m)]
    return paths


def construct_phi_g(n: int, rs: RuleSet | None = None) -> StateVector:
    """Uniform superposition over all T 2^m consistent good-path states."""
    _check_n(n)
    rs = rs or chain_rules()
    rows = np.concatenate(_all_paths(n, rs))
    return StateVector(rows, np.full(len(rows), 1 / math.sqrt(len(rows))), "chain", rs, "phi_g")


def split_phi_g(n: int, s: int | None = None, rs: RuleSet | None = None):
    """``(phi_1, phi_2, c)`` with ``phi_g = sqrt(1-c) phi_1 + sqrt(c) phi_2``.

    ``phi_2`` collects the path states from the first one with ``s + 1``
    e sites onward; ``s`` defaults to ``(n - 3) // 4``. ``c`` is the
    measured fraction ``T_2 / T``.
    """
    _check_n(n)
    rs = rs or chain_rules()
    s = (n - 3) // 4 if s is None else s
    e_code = rs.mask(("e",))
    parts1, parts2 = [], []
    cut = None
    for rows in _all_paths(n, rs):
        ecount = e_code[rows].sum(axis=1)
        hit = np.flatnonzero(ecount >= s + 1)
        k = int(hit[0]) if len(hit) else len(rows)
        cut = k if cut is None else cut
        if k != cut:
            raise RuntimeError("split point depends on the qubit data")
        parts1.append(rows[:k])
        parts2.append(rows[k:])
    T = path_count_formula(n)
    c = Fraction(T - cut, T)
    r1, r2 = np.concatenate(parts1), np.concatenate(parts2)
    phi1 = StateVector(r1, np.full(len(r1), 1 / math.sqrt(max(len(r1), 1))), "chain", rs, "phi_1")
    phi2 = StateVector(r2, np.full(len(r2), 1 / math.sqrt(max(len(r2), 1))), "chain", rs, "phi_2")
    return phi1, phi2, c


def cycle_layout(n: int, t: int, i: int) -> list[int]:
    """0-based positions of the ``<`` sites of psi_i."""
    return sorted((j * n + i) % (n * t) for j in range(t))


def construct_cycle_state(n: int, t: int, which="Phi", rs: RuleSet | None = None) -> StateVector:
    """psi_i (``which`` an integer in [0, n)) or Phi (``which="Phi"``)."""
    _check_n(n)
    if t < 1:
        raise ValueError("t must be positive")
    rs_chain = chain_rules()
    rs = rs or cycle_rules()
    g = construct_phi_g(n, rs_chain)
    K = g.support_size
    rows, amps = g.states, g.amplitudes
    for _ in range(t - 1):
        left = np.repeat(np.arange(len(rows)), K)
        right = np.tile(np.arange(K), len(rows))
        rows = np.concatenate([rows[left], g.states[right]], axis=1)
        amps = amps[left] * g.amplitudes[right]
    if which == "Phi":
        allrows = np.concatenate([np.roll(rows, i, axis=1) for i in range(n)])
        allamps = np.tile(amps, n) / math.sqrt(n)
        return StateVector(allrows, allamps, "cycle", rs, "Phi")
    i = int(which)
    if not 0 <= i < n:
        raise IndexError(f"rotation index {i} outside [0, {n})")
    return StateVector(np.roll(rows, i, axis=1), amps, "cycle", rs, f"psi:{i}")


class DensityMatrix:
    """rho_A = M M^T for the amplitude matrix M (A restrictions x complement restrictions)."""

    def __init__(self, factor: sp.csr_matrix, labels: np.ndarray, region: Region):
        self.factor = factor
        self.labels = labels
        self.region = region

    @property
    def dim(self) -> int:
        return self.factor.shape[0]

    @cached_property
    def matrix(self) -> np.ndarray:
        return (self.factor @ self.factor.T).toarray()

    @cached_property
    def trace(self) -> float:
        return float(self.factor.multiply(self.factor).sum())

    @cached_property
    def _components(self):
        na, nb = self.factor.shape
        coo = self.factor.tocoo()
        graph = sp.coo_matrix(
            (np.ones(coo.nnz), (coo.row, coo.col + na)), shape=(na + nb, na + nb)
        )
        ncomp, labels = connected_components(graph, directed=False)
        return ncomp, labels[:na], labels[na:], coo

    def blocks(self) -> list[np.ndarray]:
        """Row-index sets of the diagonal blocks of rho_A (finest block structure)."""
        ncomp, la, _, _ = self._components
        order = np.argsort(la, kind="stable")
        cuts = np.flatnonzero(np.diff(la[order])) + 1
        return [blk for blk in np.split(order, cuts) if len(blk)]

    def block_traces(self) -> np.ndarray:
        diag = np.asarray(self.factor.multiply(self.factor).sum(axis=1)).ravel()
        return np.array([diag[b].sum() for b in self.blocks()])

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """Nonzero spectrum of rho_A (squared singular values of M), descending."""
        ncomp, la, lb, coo = self._components
        ecomp = la[coo.row]
        na_c = np.bincount(la, minlength=ncomp)
        nb_c = np.bincount(lb, minlength=ncomp)
        w = coo.data**2
        rank1 = (na_c == 1) | (nb_c == 1)
        out = [np.bincount(ecomp, weights=w, minlength=ncomp)[rank1 & (na_c > 0)]]
        big = np.flatnonzero(~rank1 & (na_c > 0))
        if len(big):
            order = np.argsort(ecomp, kind="stable")
            bounds = np.concatenate([[0], np.cumsum(np.bincount(ecomp, minlength=ncomp))])
            for c in big:
                sel = order[bounds[c] : bounds[c + 1]]
                rows, ra = np.unique(coo.row[sel], return_inverse=True)
                cols, cb = np.unique(coo.col[sel], return_inverse=True)
                block = np.zeros((len(rows), len(cols)))
                block[ra, cb] = coo.data[sel]
                out.append(np.linalg.svd(block, compute_uv=False) ** 2)
        vals = np.concatenate(out)
        return np.sort(vals)[::-1]

    def labelled_blocks(self, sites, rs: RuleSet) -> dict | None:
        """Traces of the partition of A labels by their qubit values at ``sites``.

        ``sites`` index into the region. Returns ``{qubit tuple: trace}`` when
        that partition is a block decomposition of rho_A (no coherence
        between different labels, every label defined), else None.
        """
        qubits = rs.code_qubit[self.labels[:, list(sites)]]
        if (qubits < 0).any():
            return None
        keys = [tuple(map(int, q)) for q in qubits]
        for blk in self.blocks():
            if len({keys[i] for i in blk}) != 1:
                return None
        diag = np.asarray(self.factor.multiply(self.factor).sum(axis=1)).ravel()
        out: dict = {}
        for k, w in zip(keys, diag):
            out[k] = out.get(k, 0.0) + float(w)
        return dict(sorted(out.items()))

    def label_strings(self, rs: RuleSet) -> list[str]:
        return [format_state(row, rs) for row in self.labels]


def _region_sites(region: Region, n_sites: int) -> np.ndarray:
    if region.length <= 0:
        raise ValueError("empty region")
    if region.total != n_sites:
        raise ValueError(f"region is for {region.total} sites, state has {n_sites}")
    return np.asarray(region.sites)


def reduced_density(v: StateVector, region: Region) -> DensityMatrix:
    """Partial trace of ``|v><v|`` onto ``region`` (support-sparse)."""
    sites = _region_sites(region, v.n_sites)
    rest = np.setdiff1d(np.arange(v.n_sites), sites)
    a_rows = v.states[:, sites]
    _, a_first, ia = np.unique(_keys(a_rows), return_index=True, return_inverse=True)
    if len(rest):
        _, ib = np.unique(_keys(v.states[:, rest]), return_inverse=True)
    else:
        ib = np.zeros(v.support_size, dtype=np.int64)
    amps = v.amplitudes / v.norm
    M = sp.csr_matrix((amps, (ia.ravel(), ib.ravel())), shape=(len(a_first), int(ib.max()) + 1))
    return DensityMatrix(M, a_rows[a_first], region)


def entropy_bits(eigs) -> float:
    lam = np.asarray(eigs, dtype=float)
    lam = lam[lam > EIG_FLOOR]
    # eigenvalues a hair above 1 would give -1e-16
    return max(0.0, float(-(lam * np.log2(lam)).sum()))


def entropy(rho: DensityMatrix) -> float:
    """Von Neumann entropy in bits."""
    return entropy_bits(rho.eigenvalues)


def good_particle_count(layout, region: Region, n: int) -> int:
    """Region sites that sit near a segment edge with their partner outside the region.

    ``layout`` lists the 0-based ``<`` positions of psi_i. A site at 1-based
    position p of its segment is good if ``2 <= p <= n/4`` or
    ``3n/4 <= p <= n-1`` and the site at position ``n + 1 - p`` (its
    entangled partner) is not in the region.
    """
    N = region.total
    inside = np.zeros(N, dtype=bool)
    inside[np.asarray(region.sites)] = True
    count = 0
    for start in layout:
        for p in range(2, n):
            if not (4 * p <= n or 4 * p >= 3 * n):
                continue
            site = (start + p - 1) % N
            partner = (start + n - p) % N
            if inside[site] and not inside[partner]:
                count += 1
    return count


def cycle_entropy_bound(r: int, n: int) -> float:
    return (min(r, n / 4) - 2) / 16


@dataclass(frozen=True)
class EntropyReport:
    n: int
    t: int
    state: str
    region: Region
    entropy_bits: float
    s_bound: float
    c_split: float | None
    good_count: int | None = None

    def row(self) -> tuple:
        return (
            self.n,
            self.t,
            self.state,
            self.region.start,
            self.region.length,
            f"{self.entropy_bits:.12f}",
            f"{self.s_bound:.12g}",
            "" if self.c_split is None else f"{self.c_split:.12g}",
            "" if self.good_count is None else self.good_count,
        )


def entropy_sweep(
    v: StateVector, sizes, n: int, t: int = 1, c_split: float | None = None
) -> list[EntropyReport]:
    """Entropies over contiguous regions.

    Chains: for each size r the region is the rightmost r sites (the
    traced-out right end; a pure state has equal entropy on both sides).
    Cycles: every one of the N start positions for each size.
    """
    N = v.n_sites
    out = []
    cyclic = v.topology == "cycle"
    layout = None
    if cyclic and v.label.startswith("psi:"):
        layout = cycle_layout(n, t, int(v.label.split(":")[1]))
    for r in sizes:
        if not 1 <= r <= N:
            raise ValueError(f"region size {r} outside [1, {N}]")
        starts = range(N) if cyclic else [N - r]
        for a in starts:
            region = Region(a, r, N, cyclic)
            S = entropy(reduced_density(v, region))
            if cyclic:
                bound = cycle_entropy_bound(r, n)
                good = good_particle_count(layout, region, n) if layout is not None else None
            else:
                bound = (n - 3) / 4
                good = None
            out.append(EntropyReport(n, t, v.label, region, S, bound, c_split, good))
    return out


def sweep_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for rep in reports:
        w.writerow(rep.row())
    return buf.getvalue()
