import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tichain import builtin_chain_ruleset
from tichain.configspace import (
    PreconditionError,
    chain_rules,
    enumerate_chain_basis,
    format_state,
    good_start_state,
    is_good_start,
    legal_mask,
    parse_state,
)
from tichain.suites import path_heads
from tichain.transition import (
    Potential,
    classify_path,
    dump_path,
    extract_path,
    path_count_formula,
    potential,
    potentials,
    step_backward,
    step_forward,
    successor_indices,
)

RS = chain_rules()

# Configurations along the good path at n=7, qubit digits dropped.
SEVEN_SITE_PATH = [
    "< ^^ U U W W >",
    "< e => U W W >",
    "< e u => W W >",
    "< e u w => W >",
    "< e u w w => >",
    "< e u w w v >",
    "< e u w <- E >",
    "< e u <- W E >",
    "< e <- U W E >",
    "< e o U W E >",
    "< e e -> W E >",
    "< e e w -> E >",
    "< e e w v E >",
    "< e e <- E E >",
    "< e e o E E >",
]


def state(text):
    return parse_state(text, RS)


def shape(s):
    return " ".join(g.rstrip("01") for g in format_state(s, RS).split())


@pytest.mark.parametrize("x", [0, 1])
def test_step_forward_carries_qubit(x):
    s = state(f"< ^^ U{x} W >")
    nxt = step_forward(s, RS)
    assert format_state(nxt, RS) == f"< e{x} =>{x} W >"
    assert step_backward(nxt, RS) == s


def test_terminal_state_has_no_forward_move():
    for x in (0, 1):
        assert step_forward(state(f"< e{x} o E{x} >"), RS) is None


def test_good_start_has_no_backward_move():
    assert step_backward(good_start_state(7, rs=RS), RS) is None


def test_seven_site_path_matches_reference():
    p = extract_path(good_start_state(7, (1, 0), RS), RS)
    assert p.K == 15 == path_count_formula(7)
    assert [shape(s) for s in p.states] == SEVEN_SITE_PATH
    assert classify_path(p, RS) == "good"
    # qubits are carried, not altered: e sites record x in order
    assert format_state(p.states[-1], RS) == "< e1 e0 o E0 E1 >"


def test_five_site_path():
    p = extract_path(state("< ^^ U0 W >"), RS)
    assert p.K == 6 == path_count_formula(5)
    assert format_state(p.states[-1], RS) == "< e0 o E0 >"


def test_isolated_state_has_trivial_path():
    p = extract_path(state("e0 e1"), RS)
    assert p.K == 1
    assert classify_path(p, RS) == "unbracketed"


def test_classification_examples():
    p = extract_path(state("< e0 o E0 E1 >"), RS)
    assert classify_path(p, RS) == "illegal-containing"
    assert p.start_kind == "other"
    p = extract_path(state("e0 w ->0"), RS)
    assert p.K == 3
    assert classify_path(p, RS) == "unbracketed"
    assert [format_state(s, RS) for s in p.states] == ["o U0 W", "e0 ->0 W", "e0 w ->0"]


def test_path_needs_well_formed_state():
    with pytest.raises(PreconditionError):
        extract_path(state("W e0"), RS)
    with pytest.raises(PreconditionError):
        potential(state("W e0"), RS)


def test_potential_examples():
    assert potential(state("< ^^ U0 W >"), RS).x == 0
    assert potential(state("< e0 =>0 W >"), RS) == Potential(1, 0)
    assert Potential(1, 0) < Potential(1, 1) < Potential(2, 0)


def test_potential_increases_along_seven_site_path():
    p = extract_path(good_start_state(7, rs=RS), RS)
    keys = [tuple(k) for k in potentials(p.array, RS)]
    assert all(a < b for a, b in zip(keys, keys[1:]))


@pytest.mark.parametrize("n, expected", [(5, 6), (7, 15), (9, 28)])
def test_path_count_formula(n, expected):
    assert path_count_formula(n) == expected


@pytest.mark.parametrize("n", [4, 6, 3])
def test_path_count_formula_rejects_bad_n(n):
    with pytest.raises(ValueError):
        path_count_formula(n)


def test_dump_path_format():
    text = dump_path(extract_path(state("< ^^ U0 W >"), RS), RS)
    lines = text.splitlines()
    assert len(lines) == 6
    assert lines[1].split() == ["<", "e0", "=>0", "W", ">", "(1,", "0)"]
    assert text.endswith("\n")


@pytest.mark.parametrize("n", [5, 6])
def test_successors_invert_each_other(n):
    basis = enumerate_chain_basis(n, "all", RS)
    fwd = successor_indices(basis, "forward")
    back = successor_indices(basis, "backward")
    moved = np.flatnonzero(fwd >= 0)
    assert np.array_equal(back[fwd[moved]], moved)
    assert (back >= 0).sum() == moved.size


BASIS6 = enumerate_chain_basis(6, "all", RS)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, BASIS6.dim - 1))
def test_step_round_trip_on_samples(i):
    s = BASIS6.states[i]
    nxt = step_forward(s, RS)
    if nxt is not None:
        assert step_backward(nxt, RS).sites == tuple(int(c) for c in s)
    prev = step_backward(s, RS)
    if prev is not None:
        assert step_forward(prev, RS).sites == tuple(int(c) for c in s)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, BASIS6.dim - 1))
def test_path_length_bounded_and_potential_monotone(i):
    p = extract_path(BASIS6.states[i], RS)
    assert p.K <= 36
    keys = [tuple(k) for k in potentials(p.array, RS)]
    assert all(a < b for a, b in zip(keys, keys[1:]))


@pytest.mark.parametrize("n", [4, 6])
def test_even_length_has_no_good_path(n):
    basis = enumerate_chain_basis(n, "bracketed", RS)
    assert not any(is_good_start(row, RS) for row in basis.states)


def _spurious(rs, n):
    """Bracketed paths that are all-legal yet do not start at a good start."""
    basis = enumerate_chain_basis(n, "bracketed", rs)
    heads = path_heads(successor_indices(basis, "backward"))
    illegal = ~legal_mask(basis.states, rs)
    dirty = np.bincount(heads, weights=illegal, minlength=basis.dim) > 0
    bad = [h for h in np.unique(heads)
           if not dirty[h] and not is_good_start(basis.states[h], rs)]
    return len(bad), int(np.isin(heads, bad).sum())


def test_literal_rules_leave_unpenalized_paths():
    assert _spurious(builtin_chain_ruleset(repaired=False), 5) == (32, 100)
    assert _spurious(RS, 5) == (0, 0)
    assert _spurious(RS, 7) == (0, 0)
