"""Configurations, standard-basis states and the subspaces they span.

States are stored as rows of ``uint8`` state codes (the index of each site
state in :attr:`RuleSet.states`). A :class:`BasisIndex` is a sorted,
duplicate-free table of such rows with an O(log d) reverse lookup.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .ruleset import RuleSet, builtin_chain_ruleset, builtin_cycle_ruleset

__all__ = [
    "WELL_FORMED_ITEMS",
    "BudgetExceededError",
    "PreconditionError",
    "Configuration",
    "BasisState",
    "Region",
    "Params",
    "BasisIndex",
    "chain_rules",
    "cycle_rules",
    "parse_state",
    "format_state",
    "configuration",
    "is_well_formed",
    "is_legal",
    "is_bracketed",
    "is_balanced",
    "is_consistent",
    "is_good_start",
    "good_start_state",
    "well_formed_mask",
    "grammar_well_formed_mask",
    "legal_mask",
    "bracketed_mask",
    "count_chain_states",
    "enumerate_chain_basis",
    "enumerate_cycle_basis",
    "enumerate_layout_basis",
    "segment_starts",
]

WELL_FORMED_ITEMS = tuple(range(1, 9))
DEFAULT_MAX_STATES = 5_000_000


class BudgetExceededError(RuntimeError):
    def __init__(self, count: int, cap: int):
        self.count = count
        self.cap = cap
        super().__init__(f"{count} states exceed the enumeration budget of {cap}")


class PreconditionError(ValueError):
    """Raised when a predicate is evaluated outside its domain."""


@lru_cache(maxsize=None)
def chain_rules() -> RuleSet:
    return builtin_chain_ruleset()


@lru_cache(maxsize=None)
def cycle_rules() -> RuleSet:
    return builtin_cycle_ruleset()


@dataclass(frozen=True)
class Configuration:
    sites: tuple[str, ...]
    topology: str = "chain"

    def __post_init__(self):
        if not self.sites:
            raise ValueError("a configuration has at least one site")


@dataclass(frozen=True)
class BasisState:
    sites: tuple[int, ...]
    topology: str = "chain"

    def __post_init__(self):
        if not self.sites:
            raise ValueError("a basis state has at least one site")

    def __len__(self):
        return len(self.sites)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.sites, dtype=np.uint8)


@dataclass(frozen=True)
class Region:
    start: int
    length: int
    total: int
    cyclic: bool = False

    def __post_init__(self):
        if not 1 <= self.length <= self.total:
            raise ValueError(f"region length {self.length} outside [1, {self.total}]")
        if not 0 <= self.start < self.total:
            raise ValueError(f"region start {self.start} outside [0, {self.total})")
        if not self.cyclic and self.start + self.length > self.total:
            raise ValueError("region runs past the end of the chain")

    @property
    def sites(self) -> np.ndarray:
        return (self.start + np.arange(self.length)) % self.total

    @property
    def complement(self) -> np.ndarray:
        mask = np.ones(self.total, dtype=bool)
        mask[self.sites] = False
        return np.flatnonzero(mask)


@dataclass(frozen=True)
class Params:
    n: int
    t: int = 1

    def __post_init__(self):
        if self.n < 5 or self.n % 2 == 0:
            raise PreconditionError(f"n must be odd and >= 5, got {self.n}")
        if self.t < 1:
            raise PreconditionError("t must be positive")

    @property
    def m(self) -> int:
        return (self.n - 3) // 2

    @property
    def sites(self) -> int:
        return self.n * self.t


# -- glyph notation ----------------------------------------------------------


def format_state(state, rs: RuleSet | None = None) -> str:
    rs = rs or chain_rules()
    codes = state.sites if isinstance(state, BasisState) else state
    return " ".join(rs.states[int(c)].glyph for c in codes)


def parse_state(text: str, rs: RuleSet | None = None, topology: str = "chain") -> BasisState:
    """Read a state written in glyph notation, e.g. ``"< e0 => W >"``."""
    rs = rs or chain_rules()
    by_glyph = {}
    for code, st in enumerate(rs.states):
        by_glyph[st.glyph] = code
        by_glyph[st.label] = code
    codes = []
    for tok in text.split():
        if tok not in by_glyph:
            raise ValueError(f"unknown site glyph {tok!r}")
        codes.append(by_glyph[tok])
    return BasisState(tuple(codes), topology)


def configuration(state: BasisState, rs: RuleSet | None = None) -> Configuration:
    rs = rs or chain_rules()
    return Configuration(
        tuple(rs.states[c].symbol.tag for c in state.sites), state.topology
    )


def _codes(obj, rs: RuleSet) -> tuple[np.ndarray, bool]:
    """Normalize a state-like argument to (codes, cyclic)."""
    if isinstance(obj, Configuration):
        codes = [rs.codes(tag)[0] for tag in obj.sites]
        return np.asarray(codes, dtype=np.uint8), obj.topology == "cycle"
    if isinstance(obj, BasisState):
        return obj.array, obj.topology == "cycle"
    return np.asarray(obj, dtype=np.uint8), False


# -- vectorized predicates -----------------------------------------------------


def _pair_view(states: np.ndarray, cyclic: bool) -> tuple[np.ndarray, np.ndarray]:
    states = np.atleast_2d(states)
    if cyclic:
        return states, np.roll(states, -1, axis=1)
    return states[:, :-1], states[:, 1:]


def well_formed_mask(states: np.ndarray, rs: RuleSet, cyclic: bool = False) -> np.ndarray:
    return ~_pair_hits(states, rs.illegal_mask(WELL_FORMED_ITEMS), cyclic)


def legal_mask(
    states: np.ndarray, rs: RuleSet, cyclic: bool = False, items: Iterable[int] | None = None
) -> np.ndarray:
    return ~_pair_hits(states, rs.illegal_mask(items), cyclic)


def _pair_hits(states, table, cyclic):
    left, right = _pair_view(states, cyclic)
    if left.shape[1] == 0:
        return np.zeros(left.shape[0], dtype=bool)
    return table[left, right].any(axis=1)


def bracketed_mask(states: np.ndarray, rs: RuleSet) -> np.ndarray:
    states = np.atleast_2d(states)
    return (states[:, 0] == rs.code("LEFT_END")) & (states[:, -1] == rs.code("RIGHT_END"))


# One character per symbol; the grammar below is written over these.
_GRAMMAR_CHARS = {
    "LEFT_END": "<", "RIGHT_END": ">", "e": "e", "u": "u", "w": "w", "E": "E", "U": "U",
    "W": "W", "R_ARROW": "r", "L_ARROW": "l", "RR_ARROW": "R", "UP": "o", "UUP": "A",
    "DOWN": "v",
}
# Three configuration shapes plus their prefix and suffix fragments, which
# makes the language closed under taking substrings.
_GRAMMAR = re.compile(
    r"<?e*[uw]*[rlR][WU]*E*>?"
    r"|<?e*[oA][WU]*E*>?"
    r"|<?e*[uw]*vE*>?"
    r"|<?e*[uw]*"
    r"|[WU]*E*>?"
)


def grammar_well_formed_mask(states: np.ndarray, rs: RuleSet) -> np.ndarray:
    """Well-formedness from the three-shape configuration grammar (regex).

    Independent of the illegal-pair tables; used to cross-check
    :func:`well_formed_mask` on chains.
    """
    table = np.array([ord(_GRAMMAR_CHARS[st.symbol.tag]) for st in rs.states], dtype=np.uint8)
    states = np.atleast_2d(states)
    text = table[states]
    return np.array([_GRAMMAR.fullmatch(row.tobytes().decode()) is not None for row in text])


# -- single-state predicates -------------------------------------------------


def is_well_formed(c, rs: RuleSet | None = None) -> bool:
    """True iff no pair from illegal items 1-8 occurs."""
    rs = rs or chain_rules()
    codes, cyclic = _codes(c, rs)
    return bool(well_formed_mask(codes[None, :], rs, cyclic)[0])


def is_legal(s, rs: RuleSet | None = None) -> list[tuple[int, int]]:
    """List of ``(position, item)`` violations; empty iff the state is legal.

    ``position`` is the index of the left site of the offending pair.
    """
    rs = rs or chain_rules()
    codes, cyclic = _codes(s, rs)
    n = len(codes)
    out = []
    last = n if cyclic else n - 1
    for p in range(last):
        key = (int(codes[p]), int(codes[(p + 1) % n]))
        for item in sorted(rs.pair_items.get(key, ())):
            out.append((p, item))
    return out


def is_bracketed(s, rs: RuleSet | None = None) -> bool:
    rs = rs or chain_rules()
    codes, _ = _codes(s, rs)
    return bool(bracketed_mask(codes[None, :], rs)[0])


def _tags(codes, rs) -> list[str]:
    return [rs.states[int(c)].symbol.tag for c in codes]


def _control(tags, rs) -> tuple[int, str | None]:
    for i, t in enumerate(tags):
        if rs.symbol(t).is_control:
            return i, t
    return -1, None


def is_balanced(s, rs: RuleSet | None = None) -> bool:
    rs = rs or chain_rules()
    codes, _ = _codes(s, rs)
    if not is_bracketed(codes, rs) or not is_well_formed(codes, rs):
        raise PreconditionError("balanced is defined for bracketed well-formed states")
    tags = _tags(codes, rs)
    _, ctrl = _control(tags, rs)
    count = {t: tags.count(t) for t in ("e", "E", "u", "U", "w", "W")}
    uu = count["u"] + count["U"]
    ww = count["w"] + count["W"]

    # 1. every w/W lies right of every u/U
    pos_uw = [i for i, t in enumerate(tags) if t in ("u", "U")]
    pos_ww = [i for i, t in enumerate(tags) if t in ("w", "W")]
    if pos_uw and pos_ww and min(pos_ww) < max(pos_uw):
        return False
    # 2. and 3.
    if ctrl in ("RR_ARROW", "R_ARROW", "DOWN"):
        if count["e"] != count["E"] + 1 or uu != ww - 1:
            return False
    elif ctrl in ("UUP", "UP", "L_ARROW"):
        if count["e"] != count["E"] or uu != ww:
            return False
    else:
        return False
    # 4.
    if ctrl == "RR_ARROW" and count["e"] != 1:
        return False
    if ctrl == "R_ARROW" and count["e"] < 2:
        return False
    # 5.
    if ctrl == "UUP" and count["e"] != 0:
        return False
    if ctrl in ("UP", "L_ARROW") and count["e"] < 1:
        return False
    return True


def is_consistent(s, rs: RuleSet | None = None) -> bool:
    rs = rs or chain_rules()
    codes, _ = _codes(s, rs)
    if not is_balanced(codes, rs):
        raise PreconditionError("consistent is defined for balanced states")
    tags = _tags(codes, rs)
    bits = [rs.states[int(c)].qubit for c in codes]
    e_bits = [b for t, b in zip(tags, bits) if t == "e"]
    E_bits = [b for t, b in zip(tags, bits) if t == "E"][::-1]
    for i in range(len(E_bits)):
        if E_bits[i] != e_bits[i]:
            return False
    pos, ctrl = _control(tags, rs)
    if ctrl in ("R_ARROW", "RR_ARROW", "DOWN"):
        if not e_bits or bits[pos] != e_bits[-1]:
            return False
    return True


def is_good_start(s, rs: RuleSet | None = None) -> bool:
    """Configuration ``< ^^ U^m W^m >``."""
    rs = rs or chain_rules()
    codes, _ = _codes(s, rs)
    tags = _tags(codes, rs)
    n = len(tags)
    if n < 5 or n % 2 == 0:
        return False
    m = (n - 3) // 2
    return tags == ["LEFT_END", "UUP"] + ["U"] * m + ["W"] * m + ["RIGHT_END"]


def good_start_state(n: int, x: Sequence[int] = (), rs: RuleSet | None = None) -> BasisState:
    rs = rs or chain_rules()
    p = Params(n)
    x = tuple(x) if len(x) else (0,) * p.m
    if len(x) != p.m:
        raise PreconditionError(f"need {p.m} qubit values, got {len(x)}")
    codes = (
        [rs.code("LEFT_END"), rs.code("UUP")]
        + [rs.code("U", int(b)) for b in x]
        + [rs.code("W")] * p.m
        + [rs.code("RIGHT_END")]
    )
    return BasisState(tuple(codes))


# -- basis index ------------------------------------------------------------------


def _keys(states: np.ndarray) -> np.ndarray:
    states = np.ascontiguousarray(states, dtype=np.uint8)
    return states.view(np.dtype((np.void, states.shape[1]))).ravel()


class BasisIndex:
    """Sorted table of basis states with reverse lookup."""

    def __init__(
        self,
        states: np.ndarray,
        rs: RuleSet,
        topology: str = "chain",
        filter: str = "custom",
        presorted: bool = False,
    ):
        states = np.ascontiguousarray(np.atleast_2d(states), dtype=np.uint8)
        if states.shape[1] == 0:
            raise ValueError("basis states need at least one site")
        if not presorted and len(states):
            _, first = np.unique(_keys(states), return_index=True)
            states = states[first]
        states.setflags(write=False)
        self.states = states
        self.rs = rs
        self.topology = topology
        self.filter = filter
        self._keys = _keys(states)

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def dim(self) -> int:
        return self.states.shape[0]

    @property
    def cyclic(self) -> bool:
        return self.topology == "cycle"

    def __len__(self) -> int:
        return self.dim

    def __getitem__(self, i: int) -> BasisState:
        return BasisState(tuple(int(c) for c in self.states[i]), self.topology)

    def index(self, rows) -> np.ndarray:
        """Indices of ``rows`` in the basis, -1 where absent."""
        if isinstance(rows, BasisState):
            rows = rows.array
        rows = np.atleast_2d(np.asarray(rows, dtype=np.uint8))
        if rows.shape[1] != self.n or self.dim == 0:
            return np.full(rows.shape[0], -1, dtype=np.int64)
        q = _keys(rows)
        pos = np.searchsorted(self._keys, q)
        pos = np.minimum(pos, self.dim - 1)
        hit = self._keys[pos] == q
        return np.where(hit, pos, -1).astype(np.int64)

    def __contains__(self, state) -> bool:
        return bool(self.index(state)[0] >= 0)

    def export(self) -> str:
        lines = [f"# n={self.n} filter={self.filter} count={self.dim}"]
        lines.extend(format_state(row, self.rs) for row in self.states)
        return "\n".join(lines) + "\n"


# -- enumeration ------------------------------------------------------------------


def _allowed(rs: RuleSet, cyclic: bool) -> np.ndarray:
    return ~rs.illegal_mask(WELL_FORMED_ITEMS)


def _completions(allowed: np.ndarray, length: int, end: np.ndarray) -> list[np.ndarray]:
    """``reach[k][c]`` = number of k-step walks from c whose final code is in ``end``."""
    a = allowed.astype(object)
    reach = [end.astype(object)]
    for _ in range(length):
        reach.append(a.dot(reach[-1]))
    return reach


def _extend(rows: np.ndarray, ok: np.ndarray) -> np.ndarray:
    """Append every allowed next code to every row, preserving lex order."""
    q = ok.shape[0]
    nsucc = ok.sum(axis=1)
    flat = np.concatenate([np.flatnonzero(ok[c]) for c in range(q)]).astype(np.uint8)
    ptr = np.concatenate([[0], np.cumsum(nsucc)[:-1]])
    last = rows[:, -1]
    counts = nsucc[last]
    total = int(counts.sum())
    rep = np.repeat(np.arange(len(rows)), counts)
    group_start = np.repeat(np.cumsum(counts) - counts, counts)
    offs = np.arange(total) - group_start
    new = flat[ptr[last][rep] + offs]
    return np.concatenate([rows[rep], new[:, None]], axis=1)


def _walks(allowed, n, start: np.ndarray, end: np.ndarray):
    """All length-n code strings with allowed adjacent pairs, first code in
    ``start`` and last code in ``end``; returns (rows, count)."""
    reach = _completions(allowed, n - 1, end)
    live = [r > 0 for r in reach]
    count = int(sum(reach[n - 1][c] for c in np.flatnonzero(start)))
    return reach, live, count


def _materialize(allowed, n, start, live):
    rows = np.flatnonzero(start & live[n - 1]).astype(np.uint8)[:, None]
    for i in range(1, n):
        ok = allowed & live[n - 1 - i][None, :]
        rows = _extend(rows, ok)
    return rows


def count_chain_states(n: int, filter: str = "bracketed", rs: RuleSet | None = None) -> int:
    rs = rs or chain_rules()
    start, end = _chain_ends(rs, filter)
    return _walks(_allowed(rs, False), n, start, end)[2]


def _chain_ends(rs, filter):
    q = rs.num_states
    if filter in ("all", "all-well-formed"):
        return np.ones(q, dtype=bool), np.ones(q, dtype=bool)
    if filter in ("bracketed", "bracketed-well-formed"):
        start = np.zeros(q, dtype=bool)
        end = np.zeros(q, dtype=bool)
        start[rs.code("LEFT_END")] = True
        end[rs.code("RIGHT_END")] = True
        return start, end
    raise ValueError(f"unknown filter {filter!r}")


def enumerate_chain_basis(
    n: int,
    filter: str = "bracketed",
    rs: RuleSet | None = None,
    max_states: int = DEFAULT_MAX_STATES,
) -> BasisIndex:
    """Every well-formed chain state on ``n`` sites, optionally bracketed only.

    States are generated as walks on the graph of pairs allowed by items
    1-8, so nothing outside the result is ever materialized.
    """
    rs = rs or chain_rules()
    if n < 1:
        raise ValueError("n must be positive")
    start, end = _chain_ends(rs, filter)
    allowed = _allowed(rs, False)
    _, live, count = _walks(allowed, n, start, end)
    if count > max_states:
        raise BudgetExceededError(count, max_states)
    rows = _materialize(allowed, n, start, live)
    name = "bracketed" if filter.startswith("bracketed") else "all"
    return BasisIndex(rows, rs, "chain", name, presorted=True)


def segment_starts(states: np.ndarray, rs: RuleSet) -> np.ndarray:
    """Boolean mask of ``<`` sites, one row per state."""
    return np.atleast_2d(states) == rs.code("LEFT_END")


def enumerate_cycle_basis(
    N: int,
    rs: RuleSet | None = None,
    max_states: int = DEFAULT_MAX_STATES,
    min_segment: int = 4,
) -> BasisIndex:
    """Every well-formed state on a cycle of ``N`` sites.

    Adjacent pairs (including the wraparound pair) avoid items 1-8 of the
    cycle rule set, so ``>`` is always followed by ``<`` and every segment
    is a bracketed well-formed chain. Segments shorter than ``min_segment``
    are dropped; they form transition-closed sectors that items 15-16
    always penalize. Rotations are distinct states.
    """
    rs = rs or cycle_rules()
    if N < 2:
        raise ValueError("a cycle needs at least 2 sites")
    allowed = _allowed(rs, True)
    q = rs.num_states
    a = allowed.astype(object)
    power = np.linalg.matrix_power(a, N)
    count = int(sum(power[c, c] for c in range(q)))
    if count > max_states:
        raise BudgetExceededError(count, max_states)

    blocks = []
    for f in range(q):
        start = np.zeros(q, dtype=bool)
        start[f] = True
        end = allowed[:, f].copy()
        _, live, cnt = _walks(allowed, N, start, end)
        if cnt:
            blocks.append(_materialize(allowed, N, start, live))
    rows = np.concatenate(blocks) if blocks else np.zeros((0, N), dtype=np.uint8)

    if len(rows) and min_segment > 1:
        lefts = segment_starts(rows, rs)
        short = np.zeros(len(rows), dtype=bool)
        for d in range(1, min(min_segment, N)):
            short |= (lefts & np.roll(lefts, -d, axis=1)).any(axis=1)
        rows = rows[~short]
    return BasisIndex(rows, rs, "cycle", "well-formed", presorted=True)


def enumerate_layout_basis(
    lengths: Sequence[int],
    offset: int = 0,
    rs: RuleSet | None = None,
    max_states: int = DEFAULT_MAX_STATES,
) -> BasisIndex:
    """Cycle states whose segments have the given lengths, in order.

    The first segment's ``<`` sits at ``offset``. Each segment is a
    bracketed well-formed chain and segments are independent, so this is
    the product of the chain bases rotated into place.
    """
    rs = rs or cycle_rules()
    if any(length < 2 for length in lengths) or not lengths:
        raise ValueError(f"segment lengths must be >= 2, got {list(lengths)}")
    total = 1
    for length in lengths:
        total *= count_chain_states(length, "bracketed", chain_rules())
    if total > max_states:
        raise BudgetExceededError(total, max_states)
    rows = np.zeros((1, 0), dtype=np.uint8)
    for length in lengths:
        seg = enumerate_chain_basis(length, "bracketed", chain_rules()).states
        left = np.repeat(np.arange(len(rows)), len(seg))
        right = np.tile(np.arange(len(seg)), len(rows))
        rows = np.concatenate([rows[left], seg[right]], axis=1)
    N = rows.shape[1]
    rows = np.roll(rows, offset % N, axis=1)
    return BasisIndex(rows, rs, "cycle", "layout")
