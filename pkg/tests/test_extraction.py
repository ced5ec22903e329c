import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from qbattery.ergotropy import EnergySpectrum, multi_copy_passive_energy
from qbattery.extraction import (ExtractionPlan, StructureError, TranspositionStep, build_plan,
                                 decompose_permutation, execute_plan, hamming, index_of, label_of,
                                 passive_permutation, plan_for_copies, separability_certificate, step_unitary,
                                 swap_steps, transposition_path)
from qbattery.qops import DensityState, is_unitary, random_state

QUTRIT = EnergySpectrum((0.0, 0.579, 1.0))
QUBIT = EnergySpectrum((0.0, 1.0))


def test_labels_round_trip():
    for idx in range(27):
        assert index_of(label_of(idx, 3, 3), 3) == idx
    assert label_of(1, 2, 2) == (0, 1)  # left site most significant
    assert hamming((0, 1, 2), (0, 2, 2)) == 1


def test_step_must_be_single_site_hop():
    with pytest.raises(ValueError):
        TranspositionStep((0, 0), (1, 1))
    assert TranspositionStep((2, 2), (0, 2)).site == 0


def test_passive_permutation_examples():
    assert list(passive_permutation([0.5, 0.3, 0.2], [0, 1, 2])) == [0, 1, 2]
    p = np.array([0.1, 0.2, 0.0, 0.3, 0.4])
    perm = passive_permutation(p, [-2, -1, 0, 1, 2])
    assert np.array_equal(p[perm], [0.4, 0.3, 0.2, 0.1, 0.0])
    with pytest.raises(ValueError):
        passive_permutation([0.5, 0.6], [0, 1])


def test_two_copy_qutrit_permutation():
    p = 0.3
    cell = np.array([0.0, 1 - p, p])
    pops = np.array(oracles.product_populations(cell, 2))
    perm = passive_permutation(pops, QUTRIT.ensemble_energies(2))
    s = pops[perm]
    # 1-based |11>, |12>, |21>, |13> carry (1-p)^2, p(1-p), p(1-p), p^2
    expect = np.zeros(9)
    expect[index_of((0, 0), 3)] = (1 - p) ** 2
    expect[index_of((0, 1), 3)] = p * (1 - p)
    expect[index_of((1, 0), 3)] = p * (1 - p)
    expect[index_of((0, 2), 3)] = p**2
    assert np.allclose(s, expect, atol=1e-15)


def test_transposition_paths():
    assert transposition_path((2, 2), (0, 0)) == [(2, 2), (0, 2), (0, 0)]
    assert transposition_path((1, 0), (1, 0)) == [(1, 0)]
    assert transposition_path((0, 0, 0), (1, 1, 1)) == [(0, 0, 0), (1, 0, 0), (1, 1, 0), (1, 1, 1)]


@given(st.integers(1, 5), st.integers(2, 4), st.integers(0, 2**32 - 1))
def test_swap_step_count(n, d, seed):
    rng = np.random.default_rng(seed)
    a = tuple(int(x) for x in rng.integers(0, d, n))
    b = tuple(int(x) for x in rng.integers(0, d, n))
    if a == b:
        return
    steps = swap_steps(a, b)
    assert len(steps) == 2 * hamming(a, b) - 1
    # applying the hops swaps exactly a and b
    D = d**n
    p = np.arange(D, dtype=float)
    plan = ExtractionPlan(d, n, tuple(steps), tuple(range(D)), (), np.zeros(D))
    out = plan.apply(p)
    expect = p.copy()
    ia, ib = index_of(a, d), index_of(b, d)
    expect[ia], expect[ib] = expect[ib], expect[ia]
    assert np.array_equal(out, expect)


def test_step_unitary_examples():
    assert np.array_equal(step_unitary(0, 3, 0.0, 4), np.eye(4))
    u = step_unitary(0, 3, np.pi / 2, 4)
    assert is_unitary(u, 1e-12)
    rho = np.diag([0.7, 0.1, 0.2, 0.0])
    assert np.allclose(np.diag(u @ rho @ u.T), [0.0, 0.1, 0.2, 0.7], atol=1e-15)
    h = step_unitary(0, 1, np.pi / 4, 2)
    assert np.allclose(np.diag(h @ np.diag([1.0, 0.0]) @ h.T), [0.5, 0.5])
    with pytest.raises(ValueError):
        step_unitary(1, 1, 0.3, 3)


@given(st.integers(0, 2**32 - 1), st.sampled_from([(2, 2), (3, 2), (2, 3)]))
def test_plan_realises_passive_energy(seed, dn):
    d, n = dn
    rng = np.random.default_rng(seed)
    spec = EnergySpectrum(tuple(np.sort(rng.uniform(0, 1, d)) + np.arange(d) * 0.05))
    pops = rng.dirichlet(np.ones(d**n))
    plan = build_plan(pops, spec, n)
    final = plan.apply(pops)
    energies = spec.ensemble_energies(n)
    assert final @ energies == pytest.approx(oracles.passive_energy_by_assignment(pops, energies), abs=1e-12)
    assert np.allclose(final, pops[np.asarray(plan.target_permutation)])


def test_decomposition_orders_large_gaps_first():
    pops = np.array([0.0, 0.1, 0.2, 0.7])
    perm = passive_permutation(pops, [0, 1, 2, 3])
    swaps = decompose_permutation(perm, pops)
    assert swaps[0] == (0, 3)


def test_identity_plan_leaves_state_unchanged():
    rho = DensityState(np.diag([0.4, 0.3, 0.2, 0.1]), (2, 2))
    plan = build_plan(np.real(np.diag(rho.matrix)), QUBIT, 2)
    assert plan.steps == ()
    tr = execute_plan(rho, plan)
    assert np.array_equal(tr.final_state.matrix, rho.matrix)


def test_two_copy_worked_example_execution():
    p = 0.3
    cell = DensityState(np.diag([0.0, 1 - p, p]))
    state, plan, rot = plan_for_copies(cell, QUTRIT, 2)
    assert np.array_equal(rot, np.eye(3))
    tr = execute_plan(state, plan)
    final = np.real(np.diag(tr.final_state.matrix))
    expect = np.array(oracles.product_populations([0, 1 - p, p], 2))[list(plan.target_permutation)]
    assert np.max(np.abs(final - expect)) <= 1e-9
    e = QUTRIT.ensemble_energies(2)
    pops0 = np.real(np.diag(state.matrix))
    oracle_work = pops0 @ e - oracles.passive_energy_by_assignment(pops0, e)
    assert -tr.energy[-1] == pytest.approx(oracle_work, abs=1e-9)
    assert final @ e == pytest.approx(multi_copy_passive_energy(cell, QUTRIT, 2), abs=1e-9)
    for s, cert in zip(tr.states, tr.extras["certificates"]):
        assert np.allclose(cert.reconstruct(), s.matrix, atol=1e-12)


def test_mid_step_certificate_structure():
    p = 0.3
    pops = np.array(oracles.product_populations([0, 1 - p, p], 2))
    rho = np.diag(pops).astype(complex)
    step = TranspositionStep((2, 2), (0, 2))
    a, b = index_of(step.source, 3), index_of(step.target, 3)
    r = step_unitary(a, b, np.pi / 5, 9) @ rho @ step_unitary(a, b, np.pi / 5, 9).T
    cert = separability_certificate(DensityState(r, (3, 3)), step)
    assert cert.site == 0
    assert cert.spectator[1] == 2
    assert np.count_nonzero(np.abs(cert.local_state) > 1e-15) > 2
    assert np.allclose(cert.reconstruct(), r, atol=1e-14)


def test_diagonal_certificate_and_negative_control(rng):
    cert = separability_certificate(DensityState(np.diag([0.5, 0.2, 0.2, 0.1]), (2, 2)), None)
    assert cert.weight == 0 and cert.ppt_ok
    ent = random_state(4, rng, dims=(2, 2))
    with pytest.raises(StructureError):
        separability_certificate(ent, TranspositionStep((0, 0), (1, 0)))
    with pytest.raises(StructureError):
        separability_certificate(ent, None)


@given(st.integers(0, 2**32 - 1))
def test_two_qubit_trajectories_are_ppt(seed):
    rng = np.random.default_rng(seed)
    pops = rng.dirichlet(np.ones(4))
    plan = build_plan(pops, QUBIT, 2)
    tr = execute_plan(DensityState(np.diag(pops), (2, 2)), plan)
    for s, cert in zip(tr.states, tr.extras["certificates"]):
        assert cert.ppt_ok
        assert oracles.min_pt_eigenvalue_two_qubits(s.matrix) >= -1e-12


def test_non_diagonal_input_rejected(rng):
    plan = build_plan([0.1, 0.2, 0.3, 0.4], QUBIT, 2)
    with pytest.raises(ValueError):
        execute_plan(random_state(4, rng), plan)
    with pytest.raises(ValueError):
        execute_plan(DensityState.maximally_mixed(9), plan)


def test_coherent_cell_uses_local_rotation(rng):
    cell = random_state(3, rng)
    state, plan, rot = plan_for_copies(cell, QUTRIT, 2)
    rotated = rot @ cell.matrix @ rot.conj().T
    assert np.max(np.abs(rotated - np.diag(np.diag(rotated)))) <= 1e-12
    tr = execute_plan(state, plan)
    assert tr.final_state is not None


def test_power_integrates_to_work():
    from scipy.integrate import simpson

    p, S = 0.3, 64
    state, plan, _ = plan_for_copies(DensityState(np.diag([0.0, 1 - p, p])), QUTRIT, 2)
    tr = execute_plan(state, plan, substeps=S, certify=False)
    for k in range(len(plan.steps)):
        sl = slice(k * S, (k + 1) * S + 1)
        assert simpson(tr.power[sl], x=tr.times[sl]) == pytest.approx(tr.energy[sl][-1] - tr.energy[sl][0], abs=1e-6)
    assert tr.energy[-1] < 0
