"""Deterministic evolution of basis states under the transition rules.

Every well-formed state has at most one forward and one backward move, so
the state graph restricted to well-formed states is a disjoint union of
directed paths. Paths are only ever built one orbit at a time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .configspace import (
    BasisIndex,
    BasisState,
    PreconditionError,
    chain_rules,
    format_state,
    is_bracketed,
    is_good_start,
    is_well_formed,
    legal_mask,
)
from .ruleset import RuleSet

__all__ = [
    "NonDeterministicError",
    "PathLengthError",
    "RuleTables",
    "Path",
    "Potential",
    "step_forward",
    "step_backward",
    "extract_path",
    "classify_path",
    "potential",
    "potentials",
    "path_count_formula",
    "successor_indices",
    "dump_path",
]


class NonDeterministicError(RuntimeError):
    """More than one rule applies to a state: the rule set is broken."""


class PathLengthError(RuntimeError):
    """A path exceeded n^2 + 1 states, or revisited a state."""


class RuleTables:
    """Concrete transition tables over state codes.

    ``fwd_count[a, b]`` is the number of concrete rules whose lhs is ``ab``;
    ``fwd_to[a, b]`` holds the rhs codes of the first such rule. The
    backward tables are the same with lhs and rhs swapped.
    """

    def __init__(self, rs: RuleSet):
        q = rs.num_states
        self.rs = rs
        self.fwd_count = np.zeros((q, q), dtype=np.int64)
        self.bwd_count = np.zeros((q, q), dtype=np.int64)
        self.fwd_to = np.full((q, q, 2), -1, dtype=np.int64)
        self.bwd_to = np.full((q, q, 2), -1, dtype=np.int64)
        self.fwd_rule = np.full((q, q), -1, dtype=np.int64)
        self.bwd_rule = np.full((q, q), -1, dtype=np.int64)
        for a, b, c, d, k in rs.concrete_transitions:
            if self.fwd_count[a, b] == 0:
                self.fwd_to[a, b] = (c, d)
                self.fwd_rule[a, b] = k
            if self.bwd_count[c, d] == 0:
                self.bwd_to[c, d] = (a, b)
                self.bwd_rule[c, d] = k
            self.fwd_count[a, b] += 1
            self.bwd_count[c, d] += 1

    def _tables(self, direction):
        if direction == "forward":
            return self.fwd_count, self.fwd_to, self.fwd_rule
        if direction == "backward":
            return self.bwd_count, self.bwd_to, self.bwd_rule
        raise ValueError(direction)

    def applicable_counts(self, states: np.ndarray, direction: str, cyclic: bool) -> np.ndarray:
        """Number of (position, rule) matches per state."""
        count, _, _ = self._tables(direction)
        states = np.atleast_2d(states)
        left = states if cyclic else states[:, :-1]
        right = np.roll(states, -1, axis=1) if cyclic else states[:, 1:]
        return count[left, right].sum(axis=1)

    def step(self, states: np.ndarray, direction: str, cyclic: bool):
        """Apply the unique applicable rule to each row.

        Returns ``(new_states, moved, position, rule)``; rows where nothing
        applies are copied unchanged with ``moved`` False.
        Raises :class:`NonDeterministicError` if any row has two moves.
        """
        count, to, rule = self._tables(direction)
        states = np.atleast_2d(np.asarray(states, dtype=np.uint8))
        n = states.shape[1]
        left = states if cyclic else states[:, :-1]
        right = np.roll(states, -1, axis=1) if cyclic else states[:, 1:]
        hits = count[left, right]
        total = hits.sum(axis=1)
        if (total > 1).any():
            bad = states[np.flatnonzero(total > 1)[0]]
            raise NonDeterministicError(
                f"{int(total.max())} {direction} rules apply to {format_state(bad, self.rs)}"
            )
        moved = total == 1
        pos = np.where(moved, hits.argmax(axis=1), -1)
        out = states.copy()
        rows = np.flatnonzero(moved)
        p = pos[rows]
        a = states[rows, p]
        b = states[rows, (p + 1) % n]
        out[rows, p] = to[a, b, 0]
        out[rows, (p + 1) % n] = to[a, b, 1]
        rule_idx = np.full(len(states), -1, dtype=np.int64)
        rule_idx[rows] = rule[a, b]
        return out, moved, pos, rule_idx


_TABLES: dict[int, RuleTables] = {}


def tables_for(rs: RuleSet) -> RuleTables:
    key = id(rs)
    tab = _TABLES.get(key)
    if tab is None or tab.rs is not rs:
        tab = _TABLES[key] = RuleTables(rs)
    return tab


def _as_state(s, topology=None) -> BasisState:
    if isinstance(s, BasisState):
        return s
    return BasisState(tuple(int(c) for c in s), topology or "chain")


def _step(s, rs, direction, check=True):
    rs = rs or chain_rules()
    s = _as_state(s)
    if check and s.topology == "chain" and not is_well_formed(s, rs):
        raise PreconditionError(f"{format_state(s, rs)} is not well-formed")
    out, moved, _, _ = tables_for(rs).step(s.array[None, :], direction, s.topology == "cycle")
    if not moved[0]:
        return None
    return BasisState(tuple(int(c) for c in out[0]), s.topology)


def step_forward(s, rs: RuleSet | None = None) -> BasisState | None:
    """Unique successor of ``s`` or ``None``."""
    return _step(s, rs, "forward")


def step_backward(s, rs: RuleSet | None = None) -> BasisState | None:
    """Unique predecessor of ``s`` or ``None``."""
    return _step(s, rs, "backward")


@dataclass(frozen=True)
class Potential:
    x: int
    y: int

    def key(self) -> tuple[int, int]:
        return (self.x, self.y)

    def __lt__(self, other: "Potential") -> bool:
        return self.key() < other.key()


def potentials(states: np.ndarray, rs: RuleSet | None = None) -> np.ndarray:
    """Vectorized potential; returns an ``(k, 2)`` array of (x, y).

    x counts e/E sites. y is n for the turning controls (o, ^^, v), the
    number of u/w sites left of the control for -> and =>, and the number
    of U/W sites right of the control for <-. States without a control
    get y = n.
    """
    rs = rs or chain_rules()
    states = np.atleast_2d(states)
    k, n = states.shape
    x = rs.mask(("e", "E"))[states].sum(axis=1)
    y = np.full(k, n, dtype=np.int64)
    ctrl = rs.kind_mask("control")[states]
    has = ctrl.any(axis=1)
    cpos = ctrl.argmax(axis=1)
    cols = np.arange(n)[None, :]
    left_of = cols < cpos[:, None]
    right_of = cols > cpos[:, None]
    lower_mid = rs.mask(("u", "w"))[states]
    upper_mid = rs.mask(("U", "W"))[states]
    csym = states[np.arange(k), cpos]
    rightward = rs.mask(("R_ARROW", "RR_ARROW"))[csym] & has
    leftward = rs.mask(("L_ARROW",))[csym] & has
    y = np.where(rightward, (lower_mid & left_of).sum(axis=1), y)
    y = np.where(leftward, (upper_mid & right_of).sum(axis=1), y)
    return np.stack([x, y], axis=1)


def potential(s, rs: RuleSet | None = None) -> Potential:
    rs = rs or chain_rules()
    s = _as_state(s)
    if s.topology == "chain" and not is_well_formed(s, rs):
        raise PreconditionError("potential is defined for well-formed states")
    x, y = potentials(s.array[None, :], rs)[0]
    return Potential(int(x), int(y))


@dataclass
class Path:
    states: list[BasisState]
    start_kind: str
    contains_illegal: bool
    rs: RuleSet = field(repr=False, default=None)

    @property
    def K(self) -> int:
        return len(self.states)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def array(self) -> np.ndarray:
        return np.array([s.sites for s in self.states], dtype=np.uint8)


def extract_path(s, rs: RuleSet | None = None) -> Path:
    """Maximal orbit through ``s`` under forward and backward moves."""
    rs = rs or chain_rules()
    s = _as_state(s)
    if s.topology == "chain" and not is_well_formed(s, rs):
        raise PreconditionError(f"{format_state(s, rs)} is not well-formed")
    cap = len(s) ** 2 + 1
    seen = {s.sites}
    back = []
    cur = s
    while (prev := _step(cur, rs, "backward", check=False)) is not None:
        if prev.sites in seen or len(seen) >= cap:
            raise PathLengthError(f"path through {format_state(s, rs)} exceeds {cap} states")
        seen.add(prev.sites)
        back.append(prev)
        cur = prev
    fwd = []
    cur = s
    while (nxt := _step(cur, rs, "forward", check=False)) is not None:
        if nxt.sites in seen or len(seen) >= cap:
            raise PathLengthError(f"path through {format_state(s, rs)} exceeds {cap} states")
        seen.add(nxt.sites)
        fwd.append(nxt)
        cur = nxt
    states = back[::-1] + [s] + fwd
    arr = np.array([st.sites for st in states], dtype=np.uint8)
    illegal = not legal_mask(arr, rs, cyclic=s.topology == "cycle").all()
    kind = "good-start" if is_good_start(states[0], rs) else "other"
    return Path(states, kind, bool(illegal), rs)


def classify_path(p: Path, rs: RuleSet | None = None) -> str:
    """``"good"``, ``"illegal-containing"`` or ``"unbracketed"``."""
    rs = rs or p.rs or chain_rules()
    if not is_bracketed(p.states[0], rs):
        return "unbracketed"
    if p.contains_illegal or p.start_kind != "good-start":
        return "illegal-containing"
    return "good"


def path_count_formula(n: int) -> int:
    """Number of states on the path of a good start state: (n-1)(n-2)/2."""
    if n < 5 or n % 2 == 0:
        raise ValueError(f"n must be odd and >= 5, got {n}")
    return (n - 1) * (n - 2) // 2


def successor_indices(basis: BasisIndex, direction: str = "forward") -> np.ndarray:
    """Index of each basis state's successor (or predecessor); -1 if none.

    Raises ``KeyError`` if a move leaves the basis.
    """
    tab = tables_for(basis.rs)
    out, moved, _, _ = tab.step(basis.states, direction, basis.cyclic)
    idx = np.full(basis.dim, -1, dtype=np.int64)
    rows = np.flatnonzero(moved)
    found = basis.index(out[rows])
    if (found < 0).any():
        bad = out[rows[np.flatnonzero(found < 0)[0]]]
        raise KeyError(f"{direction} move leaves the basis: {format_state(bad, basis.rs)}")
    idx[rows] = found
    return idx


def dump_path(p: Path, rs: RuleSet | None = None) -> str:
    """One state per line in glyph notation with its potential appended."""
    rs = rs or p.rs or chain_rules()
    pot = potentials(p.array, rs)
    width = max(len(format_state(s, rs)) for s in p.states)
    lines = [
        f"{format_state(s, rs):<{width}}  ({x}, {y})" for s, (x, y) in zip(p.states, pot)
    ]
    return "\n".join(lines) + "\n"
