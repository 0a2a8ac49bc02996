import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tichain.ruleset import (
    IllegalPair,
    InvalidRuleError,
    RuleSet,
    RuleSyntaxError,
    UndeclaredSymbolError,
    builtin_chain_ruleset,
    builtin_cycle_ruleset,
    format_ruleset,
    load_bundled,
    parse_ruleset,
    validate_determinism,
)

CHAIN = builtin_chain_ruleset()
CYCLE = builtin_cycle_ruleset()
LITERAL = builtin_chain_ruleset(repaired=False)


def items(rs, left, right):
    return rs.pair_items.get((rs.code(*left), rs.code(*right)), frozenset())


def test_alphabet():
    assert len(CHAIN.symbols) == 14
    assert CHAIN.num_states == 21
    two = {s.tag for s in CHAIN.symbols if s.arity == 2}
    assert two == {"E", "e", "U", "u", "R_ARROW", "RR_ARROW", "DOWN"}
    controls = {s.tag for s in CHAIN.symbols if s.is_control}
    assert controls == {"R_ARROW", "RR_ARROW", "L_ARROW", "UP", "UUP", "DOWN"}
    for state in CHAIN.states:
        assert (state.qubit is None) == (state.symbol.arity == 1)


def test_transition_schemas():
    numbered = {r.item for r in CHAIN.transitions}
    assert numbered == set(range(1, 10))
    entangle = {r.item for r in CHAIN.transitions if r.action == "entangle"}
    transfer = {r.item for r in CHAIN.transitions if r.action.startswith("transfer")}
    assert entangle == {6, 7}
    assert transfer == {3}
    controls = {s.tag for s in CHAIN.symbols if s.is_control}
    for rule in CHAIN.transitions:
        for side in (rule.lhs, rule.rhs):
            assert sum(tag in controls for tag in side) == 1


def test_item_three_is_control_control():
    assert IllegalPair("CONTROL", "CONTROL", 3) in CHAIN.illegal_pairs


def test_qubit_pairs_present():
    assert 13 in items(CHAIN, ("e", 0), ("R_ARROW", 1))
    assert 13 in items(CHAIN, ("e", 1), ("R_ARROW", 0))
    assert 14 in items(CHAIN, ("e", 0), ("RR_ARROW", 1))
    assert not items(CHAIN, ("e", 0), ("R_ARROW", 0))


def test_cycle_additions():
    assert not items(CYCLE, ("RIGHT_END",), ("LEFT_END",))
    assert items(CHAIN, ("RIGHT_END",), ("LEFT_END",))
    assert 15 in items(CYCLE, ("UUP",), ("RIGHT_END",))
    assert 16 in items(CYCLE, ("LEFT_END",), ("W",))
    assert not items(CYCLE, ("LEFT_END",), ("UUP",))
    assert not items(CYCLE, ("LEFT_END",), ("e", 1))


def test_repair_items_only_in_repaired_set():
    assert 17 in items(CHAIN, ("UUP",), ("W",))
    assert 18 in items(CHAIN, ("L_ARROW",), ("RIGHT_END",))
    assert 19 in items(CHAIN, ("LEFT_END",), ("u", 0))
    assert not items(CHAIN, ("LEFT_END",), ("e", 0))
    assert not items(LITERAL, ("UUP",), ("W",))
    assert not items(LITERAL, ("LEFT_END",), ("u", 0))
    assert max(p.item for p in LITERAL.illegal_pairs) == 14


@pytest.mark.parametrize(
    "name, expected",
    [("chain.rules", CHAIN), ("cycle.rules", CYCLE), ("chain-literal.rules", LITERAL)],
)
def test_bundled_files_match_builtins(name, expected):
    assert load_bundled(name) == expected


@pytest.mark.parametrize("rs", [CHAIN, CYCLE, LITERAL])
def test_format_parse_round_trip(rs):
    assert parse_ruleset(format_ruleset(rs)) == rs


@settings(max_examples=40, deadline=None)
@given(
    keep_rules=st.lists(st.booleans(), min_size=13, max_size=13),
    keep_pairs=st.lists(st.booleans(), min_size=len(CHAIN.illegal_pairs),
                        max_size=len(CHAIN.illegal_pairs)),
)
def test_round_trip_on_sub_rule_sets(keep_rules, keep_pairs):
    rules = tuple(r for r, k in zip(CHAIN.transitions, keep_rules) if k)
    pairs = tuple(p for p, k in zip(CHAIN.illegal_pairs, keep_pairs) if k)
    rs = RuleSet(CHAIN.symbols, rules, pairs, CHAIN.allowed_pairs, CHAIN.single_site_penalties)
    assert parse_ruleset(format_ruleset(rs)) == rs


HEADER = "symbol W arity=1 upper\nsymbol R_ARROW arity=2 control\n"


def test_rule_without_control_is_rejected():
    with pytest.raises(InvalidRuleError):
        parse_ruleset(HEADER + "rule W W -> W W action=carry\n")


def test_undeclared_symbol_reports_position():
    with pytest.raises(UndeclaredSymbolError) as exc:
        parse_ruleset(HEADER + "illegal Q W item=1\n")
    assert exc.value.line == 3
    assert exc.value.column is not None


def test_syntax_error_reports_line():
    with pytest.raises(RuleSyntaxError) as exc:
        parse_ruleset(HEADER + "illegal W W item=x\n")
    assert exc.value.line == 3


@pytest.mark.parametrize("n", [5, 7])
def test_builtin_rules_are_deterministic(n):
    assert validate_determinism(CHAIN, n).ok


def test_duplicated_lhs_is_reported():
    text = format_ruleset(CHAIN) + "rule R_ARROW U -> R_ARROW u action=carry\n"
    broken = parse_ruleset(text)
    report = validate_determinism(broken, 4)
    assert not report.ok
    assert all(direction == "forward" for _, direction, _ in report.violations)
