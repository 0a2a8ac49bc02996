import numpy as np
import pytest

from tichain import builtin_chain_ruleset
from tichain.ruleset import format_ruleset, parse_ruleset
from tichain.suites import path_heads, run_suites


def test_path_heads_by_pointer_doubling():
    # two paths: 0 <- 1 <- 2 and 3 <- 4, plus a lone 5
    back = np.array([-1, 0, 1, -1, 3, -1])
    assert path_heads(back).tolist() == [0, 0, 0, 3, 3, 5]


@pytest.mark.parametrize("n", [4, 5, 6])
def test_all_suites_pass(n):
    results = run_suites(n)
    assert {r.suite for r in results} == {
        "determinism", "grammar", "inverse", "potential", "length", "classification"}
    assert all(r.passed and r.checked > 0 for r in results)


def test_literal_rules_share_the_transition_graph():
    # the literal rules differ only in penalties, so every path property still holds
    results = run_suites(5, builtin_chain_ruleset(repaired=False))
    assert all(r.passed for r in results)
    good = {r.suite: r for r in results}["classification"].detail
    assert good["good_paths"] == 2 and good["good_states"] == 12


def test_nondeterministic_rules_stop_early():
    text = format_ruleset(builtin_chain_ruleset()) + "rule R_ARROW U -> R_ARROW u action=carry\n"
    results = run_suites(4, parse_ruleset(text))
    assert [r.suite for r in results] == ["determinism", "grammar"]
    assert not results[0].passed
    assert results[0].record()["passed"] is False
