"""Site alphabet, transition rules and illegal pairs as data.

A :class:`RuleSet` is a declarative description of a two-site Hamiltonian
term: the symbols a particle can be in, the transition rules ``ab -> cd``
and the illegal pairs ``ab``. Rules are stored at schema level (symbols
only) and expanded to concrete site states, summed over qubit values, on
demand.

The text format read by :func:`parse_ruleset` is line oriented::

    # comment
    symbol <tag> arity=<1|2> [control|lower|upper] [glyph=<g>]
    rule <a> <b> -> <c> <d> action=<carry|entangle|transfer:left|transfer:right> [item=<k>]
    illegal <a> <b> item=<k>
    allow <a> <b> [item=<k>]
    penalty <name> [weight=<w>]

Pair patterns may be a symbol tag, a tag with a qubit value (``e_0``) or
one of the classes ``ANY``, ``LOWER``, ``UPPER``, ``CONTROL``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from importlib import resources
from typing import Iterable

import numpy as np

__all__ = [
    "SiteSymbol",
    "SiteState",
    "TransitionRule",
    "IllegalPair",
    "AllowedPair",
    "Penalty",
    "RuleSet",
    "RuleSpecError",
    "RuleSyntaxError",
    "UndeclaredSymbolError",
    "InvalidRuleError",
    "DeterminismReport",
    "builtin_chain_ruleset",
    "builtin_cycle_ruleset",
    "parse_ruleset",
    "format_ruleset",
    "load_bundled",
    "validate_determinism",
]

ACTIONS = ("carry", "entangle", "transfer:left", "transfer:right")
CLASSES = ("ANY", "LOWER", "UPPER", "CONTROL")
KINDS = ("control", "lower", "upper", "other")
PENALTY_NAMES = ("init", "bracket", "boundary", "size")


class RuleSpecError(ValueError):
    """Base class for rule-set construction and parsing errors."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)


class RuleSyntaxError(RuleSpecError):
    pass


class UndeclaredSymbolError(RuleSpecError):
    pass


class InvalidRuleError(RuleSpecError):
    pass


@dataclass(frozen=True)
class SiteSymbol:
    tag: str
    arity: int
    kind: str = "other"
    glyph: str = ""

    def __post_init__(self):
        if self.arity not in (1, 2):
            raise InvalidRuleError(f"symbol {self.tag}: arity must be 1 or 2")
        if self.kind not in KINDS:
            raise InvalidRuleError(f"symbol {self.tag}: unknown kind {self.kind!r}")
        if not self.glyph:
            object.__setattr__(self, "glyph", self.tag)

    @property
    def is_control(self) -> bool:
        return self.kind == "control"


@dataclass(frozen=True)
class SiteState:
    """A symbol together with its qubit value (``None`` for 1-state symbols)."""

    symbol: SiteSymbol
    qubit: int | None = None

    def __post_init__(self):
        if (self.qubit is None) != (self.symbol.arity == 1):
            raise InvalidRuleError(
                f"state {self.symbol.tag}: qubit must be given iff arity is 2"
            )

    @property
    def glyph(self) -> str:
        if self.qubit is None:
            return self.symbol.glyph
        return f"{self.symbol.glyph}{self.qubit}"

    @property
    def label(self) -> str:
        if self.qubit is None:
            return self.symbol.tag
        return f"{self.symbol.tag}_{self.qubit}"


@dataclass(frozen=True)
class TransitionRule:
    lhs: tuple[str, str]
    rhs: tuple[str, str]
    action: str = "carry"
    item: int = 0


@dataclass(frozen=True)
class IllegalPair:
    left: str
    right: str
    item: int


@dataclass(frozen=True)
class AllowedPair:
    """Exempts matching concrete pairs from one illegal item (or from all)."""

    left: str
    right: str
    item: int | None = None


@dataclass(frozen=True)
class Penalty:
    name: str
    weight: Fraction = Fraction(1)


@dataclass(frozen=True)
class RuleSet:
    symbols: tuple[SiteSymbol, ...]
    transitions: tuple[TransitionRule, ...]
    illegal_pairs: tuple[IllegalPair, ...]
    allowed_pairs: tuple[AllowedPair, ...] = ()
    single_site_penalties: tuple[Penalty, ...] = ()

    def __post_init__(self):
        tags = [s.tag for s in self.symbols]
        if len(set(tags)) != len(tags):
            raise InvalidRuleError("duplicate symbol tag")
        if sum(s.arity for s in self.symbols) > 32:
            raise InvalidRuleError("at most 32 site states are supported")
        for rule in self.transitions:
            _check_rule(self, rule)
        for pair in (*self.illegal_pairs, *self.allowed_pairs):
            self.pattern_codes(pair.left)
            self.pattern_codes(pair.right)
        for pen in self.single_site_penalties:
            if pen.name not in PENALTY_NAMES:
                raise InvalidRuleError(f"unknown penalty {pen.name!r}")

    # -- alphabet ---------------------------------------------------------

    @cached_property
    def symbol_map(self) -> dict[str, SiteSymbol]:
        return {s.tag: s for s in self.symbols}

    @cached_property
    def states(self) -> tuple[SiteState, ...]:
        out = []
        for s in self.symbols:
            if s.arity == 1:
                out.append(SiteState(s))
            else:
                out.extend((SiteState(s, 0), SiteState(s, 1)))
        return tuple(out)

    @property
    def num_states(self) -> int:
        return len(self.states)

    @cached_property
    def _code_map(self) -> dict[tuple[str, int | None], int]:
        return {(st.symbol.tag, st.qubit): i for i, st in enumerate(self.states)}

    def symbol(self, tag: str) -> SiteSymbol:
        try:
            return self.symbol_map[tag]
        except KeyError:
            raise UndeclaredSymbolError(f"undeclared symbol {tag!r}") from None

    def code(self, tag: str, qubit: int | None = None) -> int:
        try:
            return self._code_map[(tag, qubit)]
        except KeyError:
            self.symbol(tag)
            raise InvalidRuleError(f"symbol {tag} has no state with qubit {qubit}") from None

    def codes(self, tag: str) -> tuple[int, ...]:
        """All state codes of a symbol (both qubit values for arity 2)."""
        sym = self.symbol(tag)
        if sym.arity == 1:
            return (self.code(tag),)
        return (self.code(tag, 0), self.code(tag, 1))

    @cached_property
    def code_symbol(self) -> np.ndarray:
        """Map state code -> symbol index."""
        idx = {s.tag: i for i, s in enumerate(self.symbols)}
        return np.array([idx[st.symbol.tag] for st in self.states], dtype=np.int64)

    @cached_property
    def code_qubit(self) -> np.ndarray:
        """Map state code -> qubit value, -1 for 1-state symbols."""
        return np.array(
            [-1 if st.qubit is None else st.qubit for st in self.states], dtype=np.int64
        )

    def mask(self, tags: Iterable[str]) -> np.ndarray:
        """Boolean vector over state codes selecting the given symbols."""
        m = np.zeros(self.num_states, dtype=bool)
        for tag in tags:
            m[list(self.codes(tag))] = True
        return m

    def kind_mask(self, kind: str) -> np.ndarray:
        return self.mask(s.tag for s in self.symbols if s.kind == kind)

    def pattern_codes(self, pattern: str) -> tuple[int, ...]:
        """Expand a pair pattern (tag, tag_bit or class name) to state codes."""
        if pattern == "ANY":
            return tuple(range(self.num_states))
        if pattern in ("LOWER", "UPPER", "CONTROL"):
            kind = pattern.lower()
            return tuple(np.flatnonzero(self.kind_mask(kind)).tolist())
        if pattern in self.symbol_map:
            return self.codes(pattern)
        head, sep, bit = pattern.rpartition("_")
        if sep and bit in ("0", "1") and head in self.symbol_map:
            return (self.code(head, int(bit)),)
        raise UndeclaredSymbolError(f"undeclared symbol {pattern!r}")

    # -- expanded tables --------------------------------------------------

    @cached_property
    def concrete_transitions(self) -> tuple[tuple[int, int, int, int, int], ...]:
        """Every rule expanded over qubit values: ``(a, b, c, d, rule_index)``."""
        out = []
        for k, rule in enumerate(self.transitions):
            for a, b, c, d in _expand_rule(self, rule):
                out.append((a, b, c, d, k))
        return tuple(out)

    @cached_property
    def pair_items(self) -> dict[tuple[int, int], frozenset[int]]:
        """Concrete illegal pair -> set of item numbers that flag it."""
        items: dict[tuple[int, int], set[int]] = {}
        for pair in self.illegal_pairs:
            for a in self.pattern_codes(pair.left):
                for b in self.pattern_codes(pair.right):
                    items.setdefault((a, b), set()).add(pair.item)
        for allow in self.allowed_pairs:
            for a in self.pattern_codes(allow.left):
                for b in self.pattern_codes(allow.right):
                    got = items.get((a, b))
                    if not got:
                        continue
                    if allow.item is None:
                        got.clear()
                    else:
                        got.discard(allow.item)
        return {k: frozenset(v) for k, v in items.items() if v}

    def illegal_mask(self, items: Iterable[int] | None = None) -> np.ndarray:
        """``mask[a, b]`` is True when the pair is flagged by one of ``items``."""
        wanted = None if items is None else set(items)
        q = self.num_states
        m = np.zeros((q, q), dtype=bool)
        for (a, b), its in self.pair_items.items():
            if wanted is None or its & wanted:
                m[a, b] = True
        return m

    @cached_property
    def first_item(self) -> np.ndarray:
        """``first_item[a, b]`` is the smallest item flagging the pair, 0 if legal."""
        q = self.num_states
        m = np.zeros((q, q), dtype=np.int64)
        for (a, b), its in self.pair_items.items():
            m[a, b] = min(its)
        return m

    def penalty(self, name: str) -> Penalty | None:
        for pen in self.single_site_penalties:
            if pen.name == name:
                return pen
        return None


def _control_index(rs: RuleSet, pair: tuple[str, str], side: str) -> int:
    flags = [rs.symbol(t).is_control for t in pair]
    if sum(flags) != 1:
        word = "no" if sum(flags) == 0 else "two"
        raise InvalidRuleError(
            f"rule {pair[0]} {pair[1]} ...: {word} control symbol on the {side} side"
        )
    return flags.index(True)


def _check_rule(rs: RuleSet, rule: TransitionRule) -> None:
    if rule.action not in ACTIONS:
        raise InvalidRuleError(f"unknown action {rule.action!r}")
    _control_index(rs, rule.lhs, "left")
    _control_index(rs, rule.rhs, "right")
    # expansion raises on arity mismatches
    _expand_rule(rs, rule)


def _bits(arity: int) -> tuple[int | None, ...]:
    return (None,) if arity == 1 else (0, 1)


def _expand_rule(rs: RuleSet, rule: TransitionRule) -> list[tuple[int, int, int, int]]:
    lsym = [rs.symbol(t) for t in rule.lhs]
    rsym = [rs.symbol(t) for t in rule.rhs]
    lc = _control_index(rs, rule.lhs, "left")
    rc = _control_index(rs, rule.rhs, "right")
    desc = f"{rule.lhs[0]} {rule.lhs[1]} -> {rule.rhs[0]} {rule.rhs[1]}"

    # target[j] = index of the lhs site whose bit lands on rhs site j
    if rule.action == "carry":
        target = {rc: lc, 1 - rc: 1 - lc}
    elif rule.action.startswith("transfer"):
        dest = 0 if rule.action.endswith("left") else 1
        target = {dest: lc, 1 - dest: 1 - lc}
    else:  # entangle
        two = [i for i in (0, 1) if lsym[i].arity == 2]
        if len(two) != 1 or any(s.arity != 2 for s in rsym):
            raise InvalidRuleError(
                f"rule {desc}: entangle needs one 2-state lhs site and two 2-state rhs sites"
            )
        target = {0: two[0], 1: two[0]}
    if rule.action != "entangle":
        for j in (0, 1):
            if rsym[j].arity != lsym[target[j]].arity:
                raise InvalidRuleError(f"rule {desc}: qubit arity mismatch for {rule.action}")
        if rule.action.startswith("transfer") and lsym[lc].arity != 2:
            raise InvalidRuleError(f"rule {desc}: transfer needs a 2-state control")

    out = []
    for b0 in _bits(lsym[0].arity):
        for b1 in _bits(lsym[1].arity):
            lb = (b0, b1)
            rb = [lb[target[j]] if rsym[j].arity == 2 else None for j in (0, 1)]
            out.append(
                (
                    rs.code(rule.lhs[0], b0),
                    rs.code(rule.lhs[1], b1),
                    rs.code(rule.rhs[0], rb[0]),
                    rs.code(rule.rhs[1], rb[1]),
                )
            )
    return out


# -- built-in construction ---------------------------------------------------

_SYMBOLS = (
    SiteSymbol("E", 2, "upper", "E"),
    SiteSymbol("e", 2, "lower", "e"),
    SiteSymbol("U", 2, "upper", "U"),
    SiteSymbol("u", 2, "lower", "u"),
    SiteSymbol("W", 1, "upper", "W"),
    SiteSymbol("w", 1, "lower", "w"),
    SiteSymbol("R_ARROW", 2, "control", "->"),
    SiteSymbol("RR_ARROW", 2, "control", "=>"),
    SiteSymbol("L_ARROW", 1, "control", "<-"),
    SiteSymbol("UP", 1, "control", "o"),
    SiteSymbol("UUP", 1, "control", "^^"),
    SiteSymbol("DOWN", 2, "control", "v"),
    SiteSymbol("LEFT_END", 1, "other", "<"),
    SiteSymbol("RIGHT_END", 1, "other", ">"),
)

_RULES = (
    ("R_ARROW U", "u R_ARROW", "carry", 1),
    ("R_ARROW W", "w R_ARROW", "carry", 1),
    ("R_ARROW E", "DOWN E", "carry", 2),
    ("w DOWN", "L_ARROW E", "transfer:right", 3),
    ("w L_ARROW", "L_ARROW W", "carry", 4),
    ("u L_ARROW", "L_ARROW U", "carry", 4),
    ("e L_ARROW", "e UP", "carry", 5),
    ("UP U", "e R_ARROW", "entangle", 6),
    ("UUP U", "e RR_ARROW", "entangle", 7),
    ("RR_ARROW U", "u RR_ARROW", "carry", 8),
    ("RR_ARROW W", "w RR_ARROW", "carry", 8),
    ("RR_ARROW RIGHT_END", "DOWN RIGHT_END", "carry", 9),
)

_ILLEGAL = (
    (1, "RIGHT_END ANY"),
    (1, "ANY LEFT_END"),
    (2, "UPPER LOWER"),
    (2, "CONTROL LOWER"),
    (2, "UPPER CONTROL"),
    (3, "CONTROL CONTROL"),
    (4, "LOWER UPPER"),
    (4, "LOWER RIGHT_END"),
    (4, "LEFT_END UPPER"),
    (4, "LEFT_END RIGHT_END"),
    (5, "w e"),
    (5, "u e"),
    (6, "E W"),
    (6, "E U"),
    (7, "u UP"),
    (7, "u UUP"),
    (7, "w UP"),
    (7, "w UUP"),
    (8, "DOWN U"),
    (8, "DOWN W"),
    (9, "w u"),
    (9, "W U"),
    (10, "RR_ARROW E"),
    (10, "R_ARROW RIGHT_END"),
    (11, "LEFT_END UP"),
    (11, "e UUP"),
    (11, "UUP E"),
    (12, "UP W"),
    (12, "u DOWN"),
    (12, "e DOWN"),
    (13, "e_0 R_ARROW_1"),
    (13, "e_1 R_ARROW_0"),
    (14, "e_0 RR_ARROW_1"),
    (14, "e_1 RR_ARROW_0"),
)


# Without these, bracketed but unbalanced paths such as "< e e <- >" and
# "< e e o >", or the isolated state "< ^^ W W >", contain no illegal pair
# and contribute spurious zero-energy states. None of the pairs occurs on
# a good path.
_REPAIR = (
    (17, "UUP W"),
    (18, "L_ARROW RIGHT_END"),
    (18, "UP RIGHT_END"),
)
_REPAIR_LEFT = ((19, "LEFT_END ANY"),)


def _pairs(spec) -> tuple[IllegalPair, ...]:
    return tuple(IllegalPair(*text.split(), item) for item, text in spec)


def _rules() -> tuple[TransitionRule, ...]:
    return tuple(
        TransitionRule(tuple(l.split()), tuple(r.split()), act, item)
        for l, r, act, item in _RULES
    )


def builtin_chain_ruleset(repaired: bool = True) -> RuleSet:
    """Rule set of the finite-chain construction.

    Rules 1-9 and illegal items 1-14; with ``repaired`` also items 17-19,
    which remove the zero-energy paths that items 1-14 miss.
    """
    if not repaired:
        return RuleSet(
            symbols=_SYMBOLS,
            transitions=_rules(),
            illegal_pairs=_pairs(_ILLEGAL),
            single_site_penalties=(Penalty("init"), Penalty("bracket"), Penalty("boundary")),
        )
    return RuleSet(
        symbols=_SYMBOLS,
        transitions=_rules(),
        illegal_pairs=_pairs(_ILLEGAL + _REPAIR + _REPAIR_LEFT),
        allowed_pairs=(AllowedPair("LEFT_END", "UUP", 19), AllowedPair("LEFT_END", "e", 19)),
        single_site_penalties=(Penalty("init"), Penalty("bracket"), Penalty("boundary")),
    )


def builtin_cycle_ruleset(repaired: bool = True) -> RuleSet:
    """Cycle variant: the pair ``> <`` is legal, items 15-16 forbid short segments.

    Item 16 already covers item 19, so ``repaired`` adds only items 17-18.
    """
    extra = ((15, "UUP RIGHT_END"), (16, "LEFT_END ANY"))
    return RuleSet(
        symbols=_SYMBOLS,
        transitions=_rules(),
        illegal_pairs=_pairs(_ILLEGAL + extra + (_REPAIR if repaired else ())),
        allowed_pairs=(
            AllowedPair("RIGHT_END", "LEFT_END", 1),
            AllowedPair("LEFT_END", "UUP", 16),
            AllowedPair("LEFT_END", "e", 16),
        ),
        single_site_penalties=(Penalty("init"), Penalty("size")),
    )


# -- text format -------------------------------------------------------------


def _tokens(line: str) -> list[tuple[str, int]]:
    """Split a line on whitespace, keeping 1-based start columns."""
    out = []
    i = 0
    while i < len(line):
        if line[i].isspace():
            i += 1
            continue
        j = i
        while j < len(line) and not line[j].isspace():
            j += 1
        out.append((line[i:j], i + 1))
        i = j
    return out


def _options(toks, allowed, lineno) -> dict[str, tuple[str, int]]:
    opts = {}
    for tok, col in toks:
        key, sep, val = tok.partition("=")
        if not sep:
            if key in allowed and allowed[key] is None:
                opts[key] = ("", col)
                continue
            raise RuleSyntaxError(f"unexpected token {tok!r}", lineno, col)
        if key not in allowed or allowed[key] is None:
            raise RuleSyntaxError(f"unknown option {key!r}", lineno, col)
        opts[key] = (val, col)
    return opts


def _int_opt(opts, key, lineno, default=None):
    if key not in opts:
        if default is None:
            raise RuleSyntaxError(f"missing {key}=", lineno, 1)
        return default
    val, col = opts[key]
    try:
        return int(val)
    except ValueError:
        raise RuleSyntaxError(f"{key} must be an integer", lineno, col) from None


def parse_ruleset(text: str) -> RuleSet:
    """Parse the rule-spec text format into a :class:`RuleSet`."""
    symbols: list[SiteSymbol] = []
    declared: dict[str, SiteSymbol] = {}
    rules: list[TransitionRule] = []
    illegal: list[IllegalPair] = []
    allowed: list[AllowedPair] = []
    penalties: list[Penalty] = []

    def check_pattern(tok, col, lineno):
        if tok in CLASSES or tok in declared:
            return
        head, sep, bit = tok.rpartition("_")
        if sep and bit in ("0", "1") and head in declared:
            if declared[head].arity != 2:
                raise RuleSyntaxError(f"{head} has no qubit", lineno, col)
            return
        raise UndeclaredSymbolError(f"undeclared symbol {tok!r}", lineno, col)

    def check_tag(tok, col, lineno):
        if tok not in declared:
            raise UndeclaredSymbolError(f"undeclared symbol {tok!r}", lineno, col)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        toks = _tokens(line)
        if not toks:
            continue
        head, hcol = toks[0]
        rest = toks[1:]

        if head == "symbol":
            if not rest:
                raise RuleSyntaxError("symbol needs a tag", lineno, hcol)
            tag, tcol = rest[0]
            if tag in declared:
                raise RuleSyntaxError(f"symbol {tag!r} declared twice", lineno, tcol)
            if tag in CLASSES or tag.rpartition("_")[2] in ("0", "1"):
                raise RuleSyntaxError(f"reserved symbol name {tag!r}", lineno, tcol)
            opts = _options(
                rest[1:],
                {"arity": "", "glyph": "", "control": None, "lower": None, "upper": None},
                lineno,
            )
            arity = _int_opt(opts, "arity", lineno)
            kinds = [k for k in ("control", "lower", "upper") if k in opts]
            if len(kinds) > 1:
                raise RuleSyntaxError("at most one of control/lower/upper", lineno, tcol)
            try:
                sym = SiteSymbol(
                    tag, arity, kinds[0] if kinds else "other", opts.get("glyph", ("", 0))[0]
                )
            except InvalidRuleError as exc:
                raise RuleSyntaxError(str(exc), lineno, opts["arity"][1]) from None
            declared[tag] = sym
            symbols.append(sym)

        elif head == "rule":
            words = [t for t, _ in rest]
            if len(rest) < 5 or words[2] != "->":
                raise RuleSyntaxError("expected 'rule <a> <b> -> <c> <d> action=...'", lineno, hcol)
            for tok, col in (rest[0], rest[1], rest[3], rest[4]):
                check_tag(tok, col, lineno)
            opts = _options(rest[5:], {"action": "", "item": ""}, lineno)
            action = opts.get("action", ("carry", 0))[0]
            if action not in ACTIONS:
                raise RuleSyntaxError(f"unknown action {action!r}", lineno, opts["action"][1])
            rule = TransitionRule(
                (words[0], words[1]), (words[3], words[4]), action, _int_opt(opts, "item", lineno, 0)
            )
            for side, pair in (("left", rule.lhs), ("right", rule.rhs)):
                n_ctrl = sum(declared[t].is_control for t in pair)
                if n_ctrl != 1:
                    word = "no" if n_ctrl == 0 else "two"
                    raise InvalidRuleError(
                        f"{word} control symbol on the {side} side", lineno, hcol
                    )
            rules.append(rule)

        elif head in ("illegal", "allow"):
            if len(rest) < 2:
                raise RuleSyntaxError(f"{head} needs two patterns", lineno, hcol)
            for tok, col in rest[:2]:
                check_pattern(tok, col, lineno)
            opts = _options(rest[2:], {"item": ""}, lineno)
            if head == "illegal":
                illegal.append(IllegalPair(rest[0][0], rest[1][0], _int_opt(opts, "item", lineno)))
            else:
                item = _int_opt(opts, "item", lineno) if "item" in opts else None
                allowed.append(AllowedPair(rest[0][0], rest[1][0], item))

        elif head == "penalty":
            if not rest:
                raise RuleSyntaxError("penalty needs a name", lineno, hcol)
            name, ncol = rest[0]
            if name not in PENALTY_NAMES:
                raise RuleSyntaxError(f"unknown penalty {name!r}", lineno, ncol)
            opts = _options(rest[1:], {"weight": ""}, lineno)
            weight = Fraction(1)
            if "weight" in opts:
                try:
                    weight = Fraction(opts["weight"][0])
                except ValueError:
                    raise RuleSyntaxError("bad weight", lineno, opts["weight"][1]) from None
            penalties.append(Penalty(name, weight))

        else:
            raise RuleSyntaxError(f"unknown directive {head!r}", lineno, hcol)

    try:
        return RuleSet(
            tuple(symbols), tuple(rules), tuple(illegal), tuple(allowed), tuple(penalties)
        )
    except RuleSpecError:
        raise
    except ValueError as exc:
        raise InvalidRuleError(str(exc)) from None


def format_ruleset(rs: RuleSet) -> str:
    """Serialize a rule set; inverse of :func:`parse_ruleset`."""
    lines = []
    for s in rs.symbols:
        parts = ["symbol", s.tag, f"arity={s.arity}"]
        if s.kind != "other":
            parts.append(s.kind)
        if s.glyph != s.tag:
            parts.append(f"glyph={s.glyph}")
        lines.append(" ".join(parts))
    for r in rs.transitions:
        lines.append(
            f"rule {r.lhs[0]} {r.lhs[1]} -> {r.rhs[0]} {r.rhs[1]} action={r.action} item={r.item}"
        )
    for p in rs.illegal_pairs:
        lines.append(f"illegal {p.left} {p.right} item={p.item}")
    for a in rs.allowed_pairs:
        suffix = "" if a.item is None else f" item={a.item}"
        lines.append(f"allow {a.left} {a.right}{suffix}")
    for pen in rs.single_site_penalties:
        lines.append(f"penalty {pen.name} weight={pen.weight}")
    return "\n".join(lines) + "\n"


def load_bundled(name: str) -> RuleSet:
    """Parse one of the bundled rule files (``chain.rules`` or ``cycle.rules``)."""
    text = resources.files("tichain.data").joinpath(name).read_text(encoding="utf-8")
    return parse_ruleset(text)


# -- determinism -------------------------------------------------------------


@dataclass
class DeterminismReport:
    n: int
    checked: int
    violations: list[tuple[tuple[int, ...], str, int]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_determinism(rs: RuleSet, n: int, max_states: int = 5_000_000) -> DeterminismReport:
    """Check that every well-formed state on ``n`` sites has at most one
    forward and at most one backward applicable rule.

    Violations are reported as ``(state codes, direction, count)``.
    """
    from .configspace import enumerate_chain_basis
    from .transition import RuleTables

    basis = enumerate_chain_basis(n, "all", rs, max_states=max_states)
    tables = RuleTables(rs)
    report = DeterminismReport(n=n, checked=len(basis))
    for direction in ("forward", "backward"):
        counts = tables.applicable_counts(basis.states, direction, cyclic=False)
        for i in np.flatnonzero(counts > 1):
            report.violations.append(
                (tuple(int(c) for c in basis.states[i]), direction, int(counts[i]))
            )
    return report
