import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from qbattery.ergotropy import (INFINITE_BETA, EnergySpectrum, activation_asymptote, activation_curve, energy,
                                ensemble_hamiltonian, entropy, entropy_matched_beta, ergotropy,
                                ergotropy_thermal_bound, extractable_work, gibbs_state, internal_hamiltonian,
                                is_passive, multi_copy_passive, multi_copy_passive_energy, passive_decomposition,
                                per_copy_ergotropy)
from qbattery.qops import DimensionCapError, DensityState, random_state, random_unitary

QUTRIT = EnergySpectrum((0.0, 0.579, 1.0))
QUTRIT_EIG = np.array([0.538, 0.237, 0.224]) / 0.999
FIVE = EnergySpectrum((-2.0, -1.0, 0.0, 1.0, 2.0))


def test_spectrum_validation():
    with pytest.raises(ValueError):
        EnergySpectrum((1.0,))
    with pytest.raises(ValueError):
        EnergySpectrum((0.0, 1.0, 1.0))
    assert EnergySpectrum((0, 1, 3)).gap == 3


def test_internal_hamiltonian_examples():
    eps = 0.7
    assert np.array_equal(internal_hamiltonian(EnergySpectrum((-eps, eps))).matrix, np.diag([-eps, eps]))
    assert np.array_equal(np.real(np.diag(internal_hamiltonian(QUTRIT).matrix)), [0, 0.579, 1])
    Lz = 1.3
    levels = tuple(Lz * (l - 3) for l in range(1, 6))
    assert np.allclose(np.diag(internal_hamiltonian(EnergySpectrum(levels)).matrix), Lz * np.arange(-2, 3))


def test_ensemble_hamiltonian():
    q = EnergySpectrum((-1.0, 1.0))
    assert np.array_equal(ensemble_hamiltonian(q, 1).matrix, internal_hamiltonian(q).matrix)
    assert np.array_equal(np.real(np.diag(ensemble_hamiltonian(q, 2).matrix)), [-2, 0, 0, 2])
    brute = max(a + b for a in QUTRIT.levels for b in QUTRIT.levels)
    assert np.max(np.linalg.eigvalsh(ensemble_hamiltonian(QUTRIT, 2).matrix)) == pytest.approx(brute, abs=1e-15)
    with pytest.raises(DimensionCapError):
        ensemble_hamiltonian(QUTRIT, 8)


def test_five_level_worked_example():
    rho = DensityState(np.diag([0.1, 0.2, 0.0, 0.3, 0.4]))
    h0 = internal_hamiltonian(FIVE)
    dec = passive_decomposition(rho, h0)
    assert np.array_equal(np.real(np.diag(dec.passive_state.matrix)), [0.4, 0.3, 0.2, 0.1, 0.0])
    e_rho = 0.1 * -2 + 0.2 * -1 + 0.0 * 0 + 0.3 * 1 + 0.4 * 2
    e_sig = 0.4 * -2 + 0.3 * -1 + 0.2 * 0 + 0.1 * 1 + 0.0 * 2
    assert dec.ergotropy == pytest.approx(e_rho - e_sig, abs=1e-12)
    assert dec.ergotropy == pytest.approx(1.7, abs=1e-12)
    u = dec.rearranging_unitary
    assert np.allclose(u @ rho.matrix @ u.conj().T, dec.passive_state.matrix, atol=1e-14)


def test_sorting_permutation_reaches_passive_state():
    # |1><5| + |2><4| + |3><2| + |4><1| + |5><3|, 1-based
    u = np.zeros((5, 5))
    for a, b in ((1, 5), (2, 4), (3, 2), (4, 1), (5, 3)):
        u[a - 1, b - 1] = 1
    rho = DensityState(np.diag([0.1, 0.2, 0.0, 0.3, 0.4]))
    h0 = internal_hamiltonian(FIVE)
    assert np.allclose(np.diag(u @ rho.matrix @ u.T), [0.4, 0.3, 0.2, 0.1, 0.0])
    assert extractable_work(rho, h0, u) == pytest.approx(ergotropy(rho, h0), abs=1e-12)
    assert extractable_work(rho, h0, np.eye(5)) == 0
    with pytest.raises(ValueError):
        extractable_work(rho, h0, 2 * np.eye(5))


def test_passive_fixed_points():
    h0 = internal_hamiltonian(QUTRIT)
    sigma = DensityState(np.diag(QUTRIT_EIG))
    dec = passive_decomposition(sigma, h0)
    assert np.allclose(dec.passive_state.matrix, sigma.matrix)
    assert dec.ergotropy == pytest.approx(0, abs=1e-15)
    mm = DensityState.maximally_mixed(3)
    assert passive_decomposition(mm, h0).ergotropy == pytest.approx(0, abs=1e-15)


def test_degenerate_hamiltonian_rejected():
    with pytest.raises(ValueError):
        passive_decomposition(DensityState.maximally_mixed(3), np.diag([0.0, 1.0, 1.0]))


def test_coherent_state_decomposition(rng):
    h0 = internal_hamiltonian(QUTRIT)
    rho = random_state(3, rng)
    dec = passive_decomposition(rho, h0)
    s = dec.passive_state.matrix
    assert np.max(np.abs(s @ h0.matrix - h0.matrix @ s)) <= 1e-10
    assert np.all(np.diff(np.real(np.diag(s))) <= 1e-12)
    assert np.allclose(np.sort(np.real(np.diag(s)))[::-1], np.sort(np.linalg.eigvalsh(rho.matrix))[::-1])
    u = dec.rearranging_unitary
    assert np.allclose(u @ rho.matrix @ u.conj().T, s, atol=1e-12)


def test_is_passive_examples():
    q = EnergySpectrum((-1.0, 1.0))
    h0 = internal_hamiltonian(q)
    assert is_passive(gibbs_state(h0, 0.3), h0)
    assert is_passive(gibbs_state(internal_hamiltonian(QUTRIT), 2.0), internal_hamiltonian(QUTRIT))
    assert not is_passive(DensityState.from_pure([0, 1]), h0)
    assert not is_passive(DensityState.from_pure(np.array([1, 1]) / np.sqrt(2)), h0)


def test_gibbs_state_examples():
    q = EnergySpectrum((-1.0, 1.0))
    h0 = internal_hamiltonian(q)
    assert np.allclose(gibbs_state(h0, 0).matrix, np.eye(2) / 2)
    assert np.max(np.abs(gibbs_state(internal_hamiltonian(QUTRIT), 1e3).matrix - np.diag([1, 0, 0]))) <= 1e-10
    z = math.exp(0.5) + math.exp(-0.5)
    assert np.allclose(np.diag(gibbs_state(h0, 0.5).matrix), [math.exp(0.5) / z, math.exp(-0.5) / z], atol=1e-15)
    with pytest.raises(ValueError):
        gibbs_state(h0, -1)
    assert np.allclose(gibbs_state(h0, INFINITE_BETA).matrix, np.diag([1, 0]))


def test_entropy_examples():
    assert entropy(DensityState.from_pure([0, 1, 0])) == pytest.approx(0, abs=1e-15)
    assert entropy(DensityState.maximally_mixed(4)) == pytest.approx(math.log(4), abs=1e-14)
    p = [0.538, 0.237, 0.224]
    rho = DensityState(np.diag(np.array(p) / sum(p)))
    assert entropy(rho) == pytest.approx(oracles.shannon([x / sum(p) for x in p]), abs=1e-14)


def test_entropy_matched_beta():
    h0 = internal_hamiltonian(QUTRIT)
    assert entropy_matched_beta(DensityState.maximally_mixed(3), h0) == 0
    assert entropy_matched_beta(DensityState.from_pure([0, 0, 1]), h0) == INFINITE_BETA
    sigma = DensityState(np.diag(QUTRIT_EIG))
    beta = entropy_matched_beta(sigma, h0)
    s_oracle = oracles.shannon(oracles.gibbs_pops(QUTRIT.levels, beta))
    assert abs(s_oracle - entropy(sigma)) <= 1e-10


def test_thermal_bound_examples():
    h0 = internal_hamiltonian(QUTRIT)
    th = gibbs_state(h0, 0.8)
    assert ergotropy_thermal_bound(th, h0) == pytest.approx(0, abs=1e-9)
    assert ergotropy(th, h0) == pytest.approx(0, abs=1e-15)
    sigma = DensityState(np.diag(QUTRIT_EIG))
    assert ergotropy(sigma, h0) == pytest.approx(0, abs=1e-15)
    assert ergotropy_thermal_bound(sigma, h0) > 1e-3


@given(st.integers(2, 6), st.integers(0, 2**32 - 1), st.booleans())
def test_ergotropy_properties(d, seed, pure):
    rng = np.random.default_rng(seed)
    levels = np.sort(rng.uniform(-2, 2, d))
    if np.min(np.diff(levels)) < 1e-3:
        levels = np.arange(d, dtype=float)
    h0 = internal_hamiltonian(EnergySpectrum(tuple(levels)))
    rho = random_state(d, rng, rank=1 if pure else None)
    w = ergotropy(rho, h0)
    assert w >= -1e-12
    assert ergotropy_thermal_bound(rho, h0) >= w - 1e-9
    u = random_unitary(d, rng)
    assert extractable_work(rho, h0, u) <= w + 1e-12
    # spectrum-only dependence
    v = random_unitary(d, rng)
    assert ergotropy(DensityState(v @ rho.matrix @ v.conj().T), h0) + energy(rho, h0) == pytest.approx(
        w + energy(DensityState(v @ rho.matrix @ v.conj().T), h0), abs=1e-9)


@given(st.integers(0, 2**32 - 1))
def test_qubit_bound_is_tight(seed):
    rng = np.random.default_rng(seed)
    h0 = internal_hamiltonian(EnergySpectrum((0.0, rng.uniform(0.1, 3))))
    rho = random_state(2, rng)
    assert ergotropy_thermal_bound(rho, h0) == pytest.approx(ergotropy(rho, h0), abs=1e-9)


@given(st.integers(2, 4), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_multi_copy_passive_matches_oracles(d, n, seed):
    rng = np.random.default_rng(seed)
    if d**n > 16:
        n = 1
    spec = EnergySpectrum(tuple(np.sort(rng.uniform(0, 1, d)) + np.arange(d) * 1e-2))
    rho = random_state(d, rng)
    pops = np.linalg.eigvalsh(rho.matrix)
    prods = oracles.product_populations(pops, n)
    energies = oracles.product_energies(spec.levels, n)
    e = multi_copy_passive_energy(rho, spec, n)
    assert e == pytest.approx(oracles.passive_energy_by_assignment(prods, energies), abs=1e-12)
    if d**n <= 8:
        assert e == pytest.approx(oracles.passive_energy_by_permutation(prods, energies), abs=1e-12)


def test_multi_copy_passive_state():
    rho = DensityState(np.diag(QUTRIT_EIG))
    one = multi_copy_passive(rho, QUTRIT, 1)
    assert np.allclose(one.passive_state.matrix, passive_decomposition(rho, internal_hamiltonian(QUTRIT)).passive_state.matrix)
    two = multi_copy_passive(rho, QUTRIT, 2)
    h = ensemble_hamiltonian(QUTRIT, 2)
    # the ensemble spectrum is degenerate, so check ordering along ascending energies directly
    e = np.real(np.diag(h.matrix))
    pops = np.real(np.diag(two.passive_state.matrix))[np.argsort(e, kind="stable")]
    assert np.all(np.diff(pops) <= 1e-15)
    assert energy(two.passive_state, h) == pytest.approx(multi_copy_passive_energy(rho, QUTRIT, 2), abs=1e-14)


def test_thermal_qubits_are_completely_passive():
    q = EnergySpectrum((-1.0, 1.0))
    th = gibbs_state(internal_hamiltonian(q), 0.7)
    assert per_copy_ergotropy(th, q, 2) == pytest.approx(0, abs=1e-15)
    assert all(abs(dw) <= 1e-15 for _, dw in activation_curve(th, q, 5))
    th3 = gibbs_state(internal_hamiltonian(QUTRIT), 1.1)
    assert all(abs(dw) <= 1e-14 for _, dw in activation_curve(th3, QUTRIT, 4))


def test_activation_curve_shape():
    sigma = DensityState(np.diag(QUTRIT_EIG))
    curve = activation_curve(sigma, QUTRIT, 6)
    dws = [dw for _, dw in curve]
    asym = activation_asymptote(sigma, QUTRIT)
    assert dws[0] == 0
    assert all(b >= a for a, b in zip(dws, dws[1:]))
    assert all(dw <= asym + 1e-9 for dw in dws)
    # two copies of this state stay passive; the first gain appears at three copies
    assert dws[1] == pytest.approx(0, abs=1e-15)
    assert dws[2] > 1e-4


def test_activation_asymptote_oracle():
    sigma = DensityState(np.diag(QUTRIT_EIG))
    beta = entropy_matched_beta(sigma, internal_hamiltonian(QUTRIT))
    g = oracles.gibbs_pops(QUTRIT.levels, beta)
    expected = sum(p * e for p, e in zip(QUTRIT_EIG, QUTRIT.levels)) - sum(p * e for p, e in zip(g, QUTRIT.levels))
    assert activation_asymptote(sigma, QUTRIT) == pytest.approx(expected, abs=1e-12)
