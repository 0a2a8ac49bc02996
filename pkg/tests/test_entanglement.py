import csv
import io
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tichain.configspace import Region, chain_rules, enumerate_layout_basis
from tichain.entanglement import (
    CSV_HEADER,
    StateVector,
    construct_cycle_state,
    construct_phi_g,
    construct_phi_x,
    cycle_entropy_bound,
    cycle_layout,
    entropy,
    entropy_bits,
    entropy_sweep,
    good_particle_count,
    reduced_density,
    split_phi_g,
    sweep_csv,
)
from tichain.hamiltonian import assemble_chain
from tichain.spectral import lowest_eigenpairs

RS = chain_rules()


def dense_reduced(v: StateVector, keep):
    """Partial trace through a full amplitude table; independent of the sparse route."""
    rows = v.states
    keep = np.asarray(keep)
    drop = np.setdiff1d(np.arange(v.n_sites), keep)
    a_keys = {tuple(r) for r in rows[:, keep]}
    b_keys = {tuple(r) for r in rows[:, drop]}
    a_idx = {k: i for i, k in enumerate(sorted(a_keys))}
    b_idx = {k: i for i, k in enumerate(sorted(b_keys))}
    m = np.zeros((len(a_idx), len(b_idx)))
    for r, amp in zip(rows, v.amplitudes):
        m[a_idx[tuple(r[keep])], b_idx[tuple(r[drop])]] += amp
    return m @ m.T


@pytest.mark.parametrize("n, size", [(5, 12), (7, 60), (9, 224), (11, 720)])
def test_phi_g_support(n, size):
    g = construct_phi_g(n)
    assert g.support_size == size
    assert np.allclose(g.amplitudes, 1 / np.sqrt(size))
    assert g.norm == pytest.approx(1.0, abs=1e-14)


def test_phi_x_is_one_path():
    v = construct_phi_x(7, [1, 0])
    assert v.label == "phi_x:10" and v.support_size == 15
    assert np.allclose(v.amplitudes, 1 / np.sqrt(15))
    with pytest.raises(ValueError):
        construct_phi_x(7, [1])


@pytest.mark.parametrize("n", [4, 3, 8])
def test_constructors_reject_bad_n(n):
    with pytest.raises(ValueError):
        construct_phi_g(n)


def test_phi_g_is_the_core_zero_mode():
    r = lowest_eigenpairs(assemble_chain(7), 2)
    g = construct_phi_g(7)
    assert abs(g.to_dense(assemble_chain(7).basis) @ r.ground_vectors[:, 0]) > 1 - 1e-8


@pytest.mark.parametrize("n, c", [(5, Fraction(5, 6)), (7, Fraction(1, 3)), (9, Fraction(1, 2)),
                                  (11, Fraction(14, 45))])
def test_split_constant(n, c):
    g = construct_phi_g(n)
    phi1, phi2, got = split_phi_g(n)
    assert got == c and got >= Fraction(1, 4)
    assert phi1.overlap(phi2) == 0
    assert g.overlap(phi2) == pytest.approx(np.sqrt(float(c)), abs=1e-12)
    assert g.overlap(phi1) == pytest.approx(np.sqrt(1 - float(c)), abs=1e-12)


def test_cycle_states_are_orthonormal():
    psi = [construct_cycle_state(5, 2, i) for i in range(5)]
    gram = np.array([[a.overlap(b) for b in psi] for a in psi])
    assert np.allclose(gram, np.eye(5), atol=1e-12)
    assert psi[0].support_size == 144
    phi = construct_cycle_state(5, 2)
    assert phi.support_size == 720 and phi.norm == pytest.approx(1.0, abs=1e-12)
    assert all(phi.overlap(p) == pytest.approx(1 / np.sqrt(5), abs=1e-12) for p in psi)
    with pytest.raises(IndexError):
        construct_cycle_state(5, 2, 5)


def test_cycle_state_lives_on_its_layout():
    basis = enumerate_layout_basis([5, 5], 2, RS)
    psi = construct_cycle_state(5, 2, 2)
    assert cycle_layout(5, 2, 2) == [2, 7]
    assert (psi.indices(basis) >= 0).all()


def test_whole_system_is_pure():
    g = construct_phi_g(7)
    rho = reduced_density(g, Region(0, 7, 7))
    assert entropy(rho) == pytest.approx(0.0, abs=1e-12)


def test_entropy_bits_examples():
    assert entropy_bits([0.5, 0.5]) == pytest.approx(1.0)
    assert entropy_bits([1.0, 0.0]) == 0.0
    assert entropy_bits(np.full(8, 1 / 8)) == pytest.approx(3.0)


@pytest.mark.parametrize("n, cut", [(7, 3), (7, 4), (9, 5)])
def test_reduced_density_matches_dense_oracle(n, cut):
    g = construct_phi_g(n)
    keep = np.arange(n - cut)
    rho = reduced_density(g, Region(0, n - cut, n))
    ref = dense_reduced(g, keep)
    vals = np.sort(np.linalg.eigvalsh(ref))[::-1]
    got = np.sort(rho.eigenvalues)[::-1]
    assert np.allclose(got[: len(vals)], vals[: len(got)], atol=1e-12)
    assert rho.trace == pytest.approx(1.0, abs=1e-12)


def test_both_sides_of_a_cut_agree():
    g = construct_phi_g(9)
    for cut in range(1, 9):
        left = entropy(reduced_density(g, Region(0, cut, 9)))
        right = entropy(reduced_density(g, Region(cut, 9 - cut, 9)))
        assert left == pytest.approx(right, abs=1e-9)


def test_segment_of_a_cycle_state_matches_phi_g():
    psi = construct_cycle_state(5, 2, 0)
    g = construct_phi_g(5)
    for length in (2, 3, 4):
        a = np.sort(reduced_density(psi, Region(0, length, 10, True)).eigenvalues)
        b = np.sort(reduced_density(g, Region(0, length, 5)).eigenvalues)
        assert np.allclose(a[-len(b):], b, atol=1e-12)


@pytest.mark.parametrize("n", [7, 11, 15])
def test_phi2_splits_into_qubit_blocks(n):
    s = (n - 3) // 4
    _, phi2, _ = split_phi_g(n)
    for t in range(s + 2, n - s - 1):
        rho = reduced_density(phi2, Region(0, n - t, n))
        blocks = rho.labelled_blocks(range(1, s + 1), RS)
        assert blocks is not None and len(blocks) == 2**s
        assert np.allclose(list(blocks.values()), 2.0**-s, atol=1e-12)
        assert entropy(rho) >= s - 1e-9


def test_phi_g_entropy_at_eleven():
    g = construct_phi_g(11)
    assert entropy(reduced_density(g, Region(0, 6, 11))) >= 0.5


def test_good_particle_count_examples():
    layout = cycle_layout(9, 2, 0)
    assert layout == [0, 9]
    assert good_particle_count(layout, Region(1, 2, 18, True), 9) == 1
    # a whole segment keeps every partner inside
    assert good_particle_count(layout, Region(0, 9, 18, True), 9) == 0
    # sites 7 and 8 of a segment (positions 8 and 9) pair with positions 2 and 1
    assert good_particle_count(layout, Region(7, 2, 18, True), 9) == 1


def test_cycle_entropy_bound():
    assert cycle_entropy_bound(16, 9) == pytest.approx((9 / 4 - 2) / 16)
    assert cycle_entropy_bound(1, 9) < 0


def test_sweep_csv_schema():
    g = construct_phi_g(7)
    reps = entropy_sweep(g, range(1, 7), 7, c_split=1 / 3)
    rows = list(csv.reader(io.StringIO(sweep_csv(reps))))
    assert tuple(rows[0]) == CSV_HEADER
    assert len(rows) == 7
    assert [int(r[4]) for r in rows[1:]] == list(range(1, 7))
    assert all(0 <= float(r[5]) <= int(r[4]) * np.log2(21) for r in rows[1:])
    with pytest.raises(ValueError):
        entropy_sweep(g, [8], 7)


def test_cycle_sweep_covers_every_start():
    psi = construct_cycle_state(5, 2, 0)
    reps = entropy_sweep(psi, [3], 5, t=2)
    assert sorted(r.region.start for r in reps) == list(range(10))
    assert all(r.good_count is not None for r in reps)
    assert all(r.entropy_bits >= r.good_count / 4 - 1e-9 for r in reps)


@pytest.mark.parametrize("n", [7, 11])
def test_entropy_profile_is_bounded_by_region_size(n):
    g = construct_phi_g(n)
    prof = [entropy(reduced_density(g, Region(0, k, n))) for k in range(1, n)]
    assert all(0 <= s <= min(k, n - k) * np.log2(21) + 1e-9 for k, s in enumerate(prof, 1))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=12))
def test_entropy_of_mixture_is_bounded(weights):
    w = np.asarray(weights)
    if w.sum() < 1e-6:
        return
    p = w / w.sum()
    S = entropy_bits(p)
    assert -1e-12 <= S <= np.log2(len(p)) + 1e-12
