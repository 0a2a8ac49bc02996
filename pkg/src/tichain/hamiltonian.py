"""Sparse Hamiltonians on enumerated bases.

Each term is accumulated as integer numerators over a common denominator
and converted to floating point exactly once, after all weights have been
applied. Every coefficient in the construction is a small rational, so the
assembled entries are as exact as a double allows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from math import lcm

import numpy as np
import scipy.sparse as sp

from .configspace import (
    BasisIndex,
    chain_rules,
    cycle_rules,
    enumerate_chain_basis,
    enumerate_cycle_basis,
    format_state,
)
from .ruleset import RuleSet
from .transition import path_count_formula, tables_for

__all__ = [
    "BasisNotClosedError",
    "Term",
    "SparseOperator",
    "OperatorWeights",
    "TERM_KINDS",
    "build_term",
    "combine",
    "assemble_chain",
    "assemble_cycle",
    "segment_operator",
    "size_values",
    "apply",
    "is_hermitian",
    "export_operator",
]

TERM_KINDS = ("trans", "legal", "init", "bracket", "boundary", "size")
DROP_BELOW = 1e-14


class BasisNotClosedError(KeyError):
    pass


@dataclass
class Term:
    """Exact sparse term: entries ``num / den`` at ``(rows, cols)``."""

    rows: np.ndarray
    cols: np.ndarray
    num: np.ndarray
    den: int
    kind: str


@dataclass
class SparseOperator:
    matrix: sp.csr_matrix
    basis: BasisIndex
    kind: str
    n: int
    t: int = 1
    variant: str | None = None
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def norm_bound(self) -> float:
        """Largest absolute row sum; bounds the operator norm."""
        if self.dim == 0:
            return 0.0
        return float(np.abs(self.matrix).sum(axis=1).max())

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def restrict(self, indices) -> np.ndarray:
        idx = np.asarray(indices)
        return self.matrix[idx][:, idx].toarray()

    def __matmul__(self, v):
        return apply(self, v)


def _pair_columns(basis: BasisIndex):
    n = basis.n
    if basis.cyclic:
        return np.arange(n), (np.arange(n) + 1) % n
    return np.arange(n - 1), np.arange(1, n)


def _trans_term(rs: RuleSet, basis: BasisIndex) -> Term:
    tab = tables_for(rs)
    states = basis.states
    # forward edges i -> j; each concrete rule at each position is one edge
    left, right = _pair_columns(basis)
    rows, cols = [], []
    for p, q in zip(left, right):
        a = states[:, p]
        b = states[:, q]
        cnt = tab.fwd_count[a, b]
        if (cnt > 1).any():
            raise ValueError("rule set is not deterministic at the pair level")
        src = np.flatnonzero(cnt == 1)
        if not len(src):
            continue
        tgt = states[src].copy()
        to = tab.fwd_to[a[src], b[src]]
        tgt[:, p] = to[:, 0]
        tgt[:, q] = to[:, 1]
        j = basis.index(tgt)
        if (j < 0).any():
            bad = tgt[np.flatnonzero(j < 0)[0]]
            raise BasisNotClosedError(f"forward move leaves the basis: {format_state(bad, rs)}")
        rows.append(src)
        cols.append(j)
        # backward moves must land inside the basis too
        bcnt = tab.bwd_count[a, b]
        bsrc = np.flatnonzero(bcnt >= 1)
        if len(bsrc):
            pre = states[bsrc].copy()
            back = tab.bwd_to[a[bsrc], b[bsrc]]
            pre[:, p] = back[:, 0]
            pre[:, q] = back[:, 1]
            if (basis.index(pre) < 0).any():
                bad = pre[np.flatnonzero(basis.index(pre) < 0)[0]]
                raise BasisNotClosedError(
                    f"backward move leaves the basis: {format_state(bad, rs)}"
                )
    src = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    dst = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    # 1/2 (|a><a| + |b><b| - |a><b| - |b><a|) per edge, numerators over 2
    r = np.concatenate([src, dst, src, dst])
    c = np.concatenate([src, dst, dst, src])
    k = len(src)
    num = np.concatenate([np.ones(2 * k, np.int64), -np.ones(2 * k, np.int64)])
    return Term(r, c, num, 2, "trans")


def _diag_term(values: np.ndarray, den: int, kind: str) -> Term:
    idx = np.flatnonzero(values)
    return Term(idx, idx, values[idx].astype(np.int64), den, kind)


def _legal_term(rs: RuleSet, basis: BasisIndex) -> Term:
    table = rs.illegal_mask()
    left, right = _pair_columns(basis)
    s = basis.states
    counts = table[s[:, left], s[:, right]].sum(axis=1)
    return _diag_term(counts, 1, "legal")


def _init_term(rs: RuleSet, basis: BasisIndex) -> Term:
    u0, u1 = rs.code("U", 0), rs.code("U", 1)
    s = basis.states
    rows, cols, nums = [], [], []
    diag = np.zeros(basis.dim, dtype=np.int64)
    for p in range(basis.n):
        hit = np.flatnonzero((s[:, p] == u0) | (s[:, p] == u1))
        if not len(hit):
            continue
        diag[hit] += 1
        flipped = s[hit].copy()
        flipped[:, p] = np.where(flipped[:, p] == u0, u1, u0)
        j = basis.index(flipped)
        if (j < 0).any():
            bad = flipped[np.flatnonzero(j < 0)[0]]
            raise BasisNotClosedError(f"init term leaves the basis: {format_state(bad, rs)}")
        rows.append(hit)
        cols.append(j)
        nums.append(-np.ones(len(hit), dtype=np.int64))
    d = np.flatnonzero(diag)
    rows.append(d)
    cols.append(d)
    nums.append(diag[d])
    return Term(np.concatenate(rows), np.concatenate(cols), np.concatenate(nums), 2, "init")


def _delims(rs, states):
    return rs.mask(("LEFT_END", "RIGHT_END"))[states]


def _bracket_term(rs, basis):
    counts = (~_delims(rs, basis.states)).sum(axis=1)
    return _diag_term(counts, 1, "bracket")


def _boundary_term(rs, basis):
    s = basis.states
    ends = ~_delims(rs, s[:, [0, -1]])
    return _diag_term(ends.sum(axis=1), 1, "boundary")


def _size_term(rs, basis, n):
    # 1/n I - 2 |<><<| + (T_n/(n-2)) (|v><v| + |o><o| + |^^><^^|), T_n/(n-2) = (n-1)/2
    s = basis.states
    lefts = (s == rs.code("LEFT_END")).sum(axis=1)
    turns = rs.mask(("DOWN", "UP", "UUP"))[s].sum(axis=1)
    den = 2 * n
    num = 2 * basis.n - 2 * den * lefts + n * (n - 1) * turns
    return Term(np.arange(basis.dim), np.arange(basis.dim), num.astype(np.int64), den, "size")


def size_values(basis: BasisIndex, n: int, rs: RuleSet | None = None) -> np.ndarray:
    """Exact diagonal of the size term as an array of Fractions."""
    rs = rs or basis.rs
    term = _size_term(rs, basis, n)
    vals = np.zeros(basis.dim, dtype=object)
    vals[term.rows] = [Fraction(int(v), term.den) for v in term.num]
    return vals


def build_term(
    kind: str, rs: RuleSet | None, basis: BasisIndex, n: int | None = None
) -> SparseOperator:
    """One named term of the construction, restricted to ``basis``.

    ``n`` is the segment-length parameter of the size term (defaults to the
    number of sites).
    """
    return combine({kind: Fraction(1)}, rs or basis.rs, basis, n=n, kind=kind)


def _term(kind, rs, basis, n):
    if kind == "trans":
        return _trans_term(rs, basis)
    if kind == "legal":
        return _legal_term(rs, basis)
    pen = rs.penalty(kind)
    if pen is None:
        raise ValueError(f"rule set declares no {kind!r} penalty")
    if kind == "init":
        term = _init_term(rs, basis)
    elif kind == "bracket":
        term = _bracket_term(rs, basis)
    elif kind == "boundary":
        term = _boundary_term(rs, basis)
    elif kind == "size":
        term = _size_term(rs, basis, n or basis.n)
    else:
        raise ValueError(f"unknown term kind {kind!r}")
    if pen.weight != 1:
        w = Fraction(pen.weight)
        term = Term(term.rows, term.cols, term.num * w.numerator, term.den * w.denominator, kind)
    return term


def combine(
    weights: dict[str, Fraction | int],
    rs: RuleSet,
    basis: BasisIndex,
    n: int | None = None,
    kind: str = "sum",
    variant: str | None = None,
    t: int = 1,
) -> SparseOperator:
    """Weighted sum of terms with exact rational arithmetic."""
    terms = []
    for name, w in weights.items():
        w = Fraction(w)
        if w == 0:
            continue
        terms.append((w, _term(name, rs, basis, n)))
    den = 1
    for w, term in terms:
        den = lcm(den, w.denominator * term.den)
    rows, cols, nums = [], [], []
    for w, term in terms:
        scale = w.numerator * (den // (w.denominator * term.den))
        rows.append(term.rows)
        cols.append(term.cols)
        nums.append(term.num * scale)
    dim = basis.dim
    if terms:
        acc = sp.coo_matrix(
            (np.concatenate(nums), (np.concatenate(rows), np.concatenate(cols))),
            shape=(dim, dim),
            dtype=np.int64,
        ).tocsr()
        acc.sum_duplicates()
        mat = sp.csr_matrix((acc.data / den, acc.indices, acc.indptr), shape=(dim, dim))
    else:
        mat = sp.csr_matrix((dim, dim))
    mat.data[np.abs(mat.data) < DROP_BELOW] = 0.0
    mat.eliminate_zeros()
    meta = {"weights": {k: str(Fraction(v)) for k, v in weights.items()}, "denominator": den}
    return SparseOperator(mat, basis, kind, n or basis.n, t, variant, meta)


CHAIN_VARIANTS = {
    "core": {"trans": 1, "legal": 1, "init": 1},
    "trans_legal": {"trans": 1, "legal": 1},
    "frustration_free": {"trans": 1, "legal": 1, "init": 1, "boundary": 1},
    "uniform_bracket": {"trans": 3, "legal": 3, "init": 3, "bracket": 1},
}


def assemble_chain(
    n: int,
    variant: str = "core",
    basis: BasisIndex | None = None,
    rs: RuleSet | None = None,
) -> SparseOperator:
    """Chain Hamiltonian for one of the variants.

    ``core`` = trans + legal + init, ``frustration_free`` = core + boundary,
    ``uniform_bracket`` = 3 core + bracket, ``trans_legal`` = trans + legal.
    By default ``core`` and ``trans_legal`` act on bracketed well-formed
    states; the boundary and bracket variants act on all well-formed states.
    """
    if variant not in CHAIN_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if n < 4:
        raise ValueError("n must be at least 4")
    rs = rs or (basis.rs if basis is not None else chain_rules())
    if basis is None:
        filt = "bracketed" if variant in ("core", "trans_legal") else "all"
        basis = enumerate_chain_basis(n, filt, rs)
    return combine(CHAIN_VARIANTS[variant], rs, basis, kind="chain", variant=variant)


@dataclass(frozen=True)
class OperatorWeights:
    """Weights of ``chain_weight * H_chain + H_size`` on a cycle."""

    n: int
    chain_weight: int

    @property
    def size_weights(self) -> tuple[Fraction, Fraction, Fraction]:
        n = self.n
        turn = Fraction(path_count_formula(n), n - 2)
        assert turn == Fraction(n - 1, 2)
        return (Fraction(1, n), Fraction(2), turn)

    @classmethod
    def default(cls, n: int, **kwargs) -> "OperatorWeights":
        from .spectral import measure_chain_weight

        return cls(n, measure_chain_weight(n, **kwargs).p)


def assemble_cycle(
    n: int,
    t: int,
    weights: OperatorWeights | None = None,
    basis: BasisIndex | None = None,
    rs: RuleSet | None = None,
) -> SparseOperator:
    """``p(n) (trans + legal + init) + size`` on a cycle of ``n t`` sites.

    ``basis`` may be any transition-closed set of cycle states, e.g. the
    states of one segment layout.
    """
    if n % 2 == 0:
        raise ValueError("n must be odd")
    rs = rs or (basis.rs if basis is not None else cycle_rules())
    if basis is None:
        basis = enumerate_cycle_basis(n * t, rs)
    if basis.n != n * t:
        raise ValueError(f"basis has {basis.n} sites, expected {n * t}")
    weights = weights or OperatorWeights.default(n)
    p = weights.chain_weight
    op = combine(
        {"trans": p, "legal": p, "init": p, "size": 1}, rs, basis, n=n, kind="cycle", t=t
    )
    op.meta["chain_weight"] = p
    return op


def segment_operator(
    length: int, n: int, chain_weight: int, rs: RuleSet | None = None, basis=None
) -> SparseOperator:
    """``p (trans + legal + init) + size`` on one bracketed segment of ``length`` sites."""
    rs = rs or cycle_rules()
    basis = basis or enumerate_chain_basis(length, "bracketed", chain_rules())
    return combine(
        {"trans": chain_weight, "legal": chain_weight, "init": chain_weight, "size": 1},
        rs,
        basis,
        n=n,
        kind="segment",
    )


def apply(op: SparseOperator, v) -> np.ndarray:
    """Sparse matrix-vector product; a StateVector is embedded in ``op.basis`` first."""
    vec = v.to_dense(op.basis) if hasattr(v, "to_dense") else np.asarray(v)
    if vec.shape[0] != op.dim:
        raise ValueError(f"dimension mismatch: operator {op.dim}, vector {vec.shape[0]}")
    return op.matrix @ vec


def is_hermitian(op: SparseOperator, tol: float = 0.0) -> bool:
    diff = op.matrix - op.matrix.T
    if diff.nnz == 0:
        return True
    return bool(np.abs(diff.data).max() <= tol)


def export_operator(op: SparseOperator) -> str:
    """Coordinate triplets ``i j value`` with a one-line header."""
    coo = op.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    lines = [f"# dim={op.dim} kind={op.variant or op.kind} n={op.n}"]
    for k in order:
        lines.append(f"{coo.row[k]} {coo.col[k]} {coo.data[k]:.17g}")
    return "\n".join(lines) + "\n"
