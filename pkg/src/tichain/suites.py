"""Exhaustive structural checks on the chain state graph.

Each check runs over every well-formed (or every bracketed well-formed)
state on n sites and returns a :class:`SuiteResult` with the first few
offending states in glyph notation.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field

import numpy as np

from .configspace import (
    BasisIndex,
    chain_rules,
    enumerate_chain_basis,
    format_state,
    grammar_well_formed_mask,
    is_balanced,
    is_consistent,
    is_good_start,
    legal_mask,
    well_formed_mask,
)
from .ruleset import RuleSet, validate_determinism
from .transition import potentials, successor_indices

__all__ = ["SuiteResult", "run_suites", "path_heads", "EXHAUSTIVE_LIMIT"]

EXHAUSTIVE_LIMIT = 5
MAX_EXAMPLES = 5


@dataclass
class SuiteResult:
    suite: str
    property: str
    n: int
    checked: int
    violations: int
    examples: list[str] = field(default_factory=list)
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def record(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


def _examples(states, rs, idx) -> list[str]:
    return [format_state(states[i], rs) for i in idx[:MAX_EXAMPLES]]


def path_heads(back: np.ndarray) -> np.ndarray:
    """First state of the path through each state, by pointer doubling."""
    jump = np.where(back >= 0, back, np.arange(len(back)))
    while True:
        nxt = jump[jump]
        if np.array_equal(nxt, jump):
            return jump
        jump = nxt


def _determinism(rs, n):
    rep = validate_determinism(rs, n)
    ex = [f"{format_state(np.array(s, dtype=np.uint8), rs)} ({d}, {c} rules)"
          for s, d, c in rep.violations[:MAX_EXAMPLES]]
    return SuiteResult("determinism", "at most one forward and one backward rule applies", n,
                       rep.checked, len(rep.violations), ex)


def _grammar(rs, n, basis):
    try:
        grammar_well_formed_mask(basis.states[:1], rs)
    except KeyError as exc:
        return SuiteResult("grammar", "grammar covers only the built-in symbols", n, 0, 0,
                           detail={"mode": "not applicable", "symbol": str(exc)})
    if n <= EXHAUSTIVE_LIMIT:
        grid = np.array(list(itertools.product(range(rs.num_states), repeat=n)), dtype=np.uint8)
        a = well_formed_mask(grid, rs)
        b = grammar_well_formed_mask(grid, rs)
        bad = np.flatnonzero(a != b)
        return SuiteResult("grammar", "illegal-pair well-formedness equals the grammar", n,
                           len(grid), len(bad), _examples(grid, rs, bad),
                           {"mode": "exhaustive", "well_formed": int(a.sum())})
    b = grammar_well_formed_mask(basis.states, rs)
    bad = np.flatnonzero(~b)
    return SuiteResult("grammar", "every enumerated well-formed state matches the grammar", n,
                       basis.dim, len(bad), _examples(basis.states, rs, bad),
                       {"mode": "enumerated"})


def _inverse(rs, n, basis, fwd, back):
    i = np.flatnonzero(fwd >= 0)
    j = np.flatnonzero(back >= 0)
    bad = np.union1d(i[back[fwd[i]] != i], j[fwd[back[j]] != j])
    return SuiteResult("inverse", "backward undoes forward and vice versa", n, basis.dim,
                       len(bad), _examples(basis.states, rs, bad))


def _monotone(rs, n, basis, fwd):
    pot = potentials(basis.states, rs)
    i = np.flatnonzero(fwd >= 0)
    a, b = pot[i], pot[fwd[i]]
    up = (b[:, 0] > a[:, 0]) | ((b[:, 0] == a[:, 0]) & (b[:, 1] > a[:, 1]))
    bad = i[~up]
    return SuiteResult("potential", "potential strictly increases on every forward move", n,
                       len(i), len(bad), _examples(basis.states, rs, bad))


def _length(rs, n, basis, back):
    heads = path_heads(back)
    sizes = np.bincount(heads, minlength=basis.dim)
    bad = np.flatnonzero(sizes > n * n)
    return SuiteResult("length", "every path has at most n^2 states", n, int((sizes > 0).sum()),
                       len(bad), _examples(basis.states, rs, bad),
                       {"longest": int(sizes.max())})


def _classification(rs, n, basis, back):
    heads = path_heads(back)
    illegal = ~legal_mask(basis.states, rs)
    path_illegal = np.bincount(heads, weights=illegal, minlength=basis.dim) > 0
    uniq = np.unique(heads)
    good_head = np.zeros(basis.dim, dtype=bool)
    for h in uniq:
        good_head[h] = is_good_start(basis.states[h], rs) and not path_illegal[h]
    on_good = good_head[heads]
    predicted = np.array([is_balanced(s, rs) and is_consistent(s, rs) for s in basis.states])
    bad = np.flatnonzero(on_good != predicted)
    detail = {"paths": len(uniq), "good_paths": int(good_head.sum()),
              "good_states": int(on_good.sum())}
    res = SuiteResult("classification", "on a good path iff balanced and consistent", n,
                      basis.dim, len(bad), _examples(basis.states, rs, bad), detail)
    if n % 2 == 0 and good_head.any():
        res.violations += int(good_head.sum())
        res.examples += _examples(basis.states, rs, np.flatnonzero(good_head))
    return res


def run_suites(n: int, rs: RuleSet | None = None) -> list[SuiteResult]:
    """All checks at one chain length. Later checks are skipped if the
    rule set is not deterministic, since paths are then undefined."""
    rs = rs or chain_rules()
    out = [_determinism(rs, n)]
    basis = enumerate_chain_basis(n, "all", rs)
    out.append(_grammar(rs, n, basis))
    if not out[0].passed:
        return out
    fwd = successor_indices(basis, "forward")
    back = successor_indices(basis, "backward")
    out += [_inverse(rs, n, basis, fwd, back), _monotone(rs, n, basis, fwd),
            _length(rs, n, basis, back)]
    bracketed = enumerate_chain_basis(n, "bracketed", rs)
    out.append(_classification(rs, n, bracketed, successor_indices(bracketed, "backward")))
    return out
