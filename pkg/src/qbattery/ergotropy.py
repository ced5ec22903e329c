"""Passive states, ergotropy and the entropy-matched thermal bound.

Energies are in arbitrary units with ħ = 1. A single unit cell has internal
Hamiltonian ``H0 = sum_j e_j |j><j|`` with strictly increasing levels, so the
computational basis is the energy basis and index 0 is the ground level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from .qops import (
    DIM_CAP,
    DensityState,
    HermitianOperator,
    as_matrix,
    check_cap,
    eigh,
    embed_local,
    is_unitary,
)

INFINITE_BETA = math.inf
BETA_MAX = 1e3
ENTROPY_TOL = 1e-10
DEGENERACY_TOL = 1e-12


@dataclass(frozen=True)
class EnergySpectrum:
    """Strictly increasing, non-degenerate energy levels of one unit cell."""

    levels: tuple[float, ...]

    def __post_init__(self):
        lv = tuple(float(x) for x in self.levels)
        if len(lv) < 2:
            raise ValueError("a battery cell needs at least two levels")
        if any(b <= a for a, b in zip(lv, lv[1:])):
            raise ValueError(f"levels must be strictly increasing, got {lv}")
        object.__setattr__(self, "levels", lv)

    @property
    def d(self) -> int:
        return len(self.levels)

    @property
    def gap(self) -> float:
        """Top-to-bottom energy difference ``e_d - e_1``."""
        return self.levels[-1] - self.levels[0]

    def ensemble_energies(self, n: int) -> np.ndarray:
        """Diagonal of the ``n``-cell Hamiltonian, in flat-index order."""
        check_cap(self.d**n)
        e = np.zeros(1)
        lv = np.asarray(self.levels)
        for _ in range(n):
            e = np.add.outer(e, lv).ravel()
        return e


@dataclass(frozen=True)
class PassiveDecomposition:
    passive_state: DensityState
    rearranging_unitary: np.ndarray
    ergotropy: float


def internal_hamiltonian(spec: EnergySpectrum) -> HermitianOperator:
    return HermitianOperator(np.diag(spec.levels).astype(complex))


def ensemble_hamiltonian(spec: EnergySpectrum, n: int, cap: int = DIM_CAP) -> HermitianOperator:
    """Sum of local copies of the cell Hamiltonian on ``n`` cells."""
    if n < 1:
        raise ValueError("n must be >= 1")
    check_cap(spec.d**n, cap)
    h0 = internal_hamiltonian(spec)
    if n == 1:
        return h0
    total = sum((embed_local(h0, site, n).matrix for site in range(n)), start=np.zeros((spec.d**n,) * 2))
    return HermitianOperator(total, (spec.d,) * n)


def energy(rho, H0) -> float:
    return float(np.real(np.trace(as_matrix(rho) @ as_matrix(H0))))


def extractable_work(rho, H0, U) -> float:
    """Work ``tr[rho H0] - tr[U rho U^dag H0]`` extracted by the unitary ``U``."""
    r, h, u = as_matrix(rho), as_matrix(H0), as_matrix(U)
    if not (r.shape == h.shape == u.shape):
        raise ValueError("rho, H0 and U must share one dimension")
    if not is_unitary(u, 1e-10):
        raise ValueError("U is not unitary")
    return energy(r, h) - energy(u @ r @ u.conj().T, h)


def _nondegenerate_eigh(H0):
    w, v = eigh(H0)
    if np.any(np.diff(w) <= DEGENERACY_TOL):
        raise ValueError("internal Hamiltonian must have a non-degenerate spectrum")
    return w, v


def _sorted_assignment(populations, energies):
    """Target populations: largest population on the lowest energy.

    Ties in either list are broken by ascending index (stable sorts).
    """
    p = np.asarray(populations, dtype=float)
    e = np.asarray(energies, dtype=float)
    src = np.argsort(-p, kind="stable")
    dst = np.argsort(e, kind="stable")
    return src, dst


def passive_decomposition(rho, H0) -> PassiveDecomposition:
    """Passive state of ``rho`` with respect to ``H0`` and the unitary reaching it.

    When ``rho`` is already diagonal in the energy basis the unitary is a
    permutation matrix (tie order: ascending energy index). Otherwise it maps
    the eigenvectors of ``rho``, sorted by non-increasing eigenvalue, onto
    the energy eigenvectors in ascending order.
    """
    r = as_matrix(rho)
    eps, wv = _nondegenerate_eigh(H0)
    if r.shape[0] != eps.size:
        raise ValueError("state and Hamiltonian dimensions differ")
    r_e = wv.conj().T @ r @ wv
    off = r_e - np.diag(np.diag(r_e))
    d = eps.size
    if not off.size or np.max(np.abs(off)) <= 1e-12:
        pops = np.real(np.diag(r_e))
        src, dst = _sorted_assignment(pops, eps)
        perm = np.zeros((d, d), dtype=complex)
        perm[dst, src] = 1.0
        u_e = perm
        s = np.empty(d)
        s[dst] = pops[src]
    else:
        lam, q = np.linalg.eigh(0.5 * (r_e + r_e.conj().T))
        order = np.argsort(-lam, kind="stable")
        s = np.clip(lam[order], 0.0, None)
        s = s / s.sum()
        u_e = q[:, order].conj().T  # row k = <q_k|, sends |q_k> to |e_k>
    sigma = wv @ np.diag(s) @ wv.conj().T
    u = wv @ u_e @ wv.conj().T
    erg = energy(r, H0) - float(s @ eps)
    if -1e-12 < erg < 0:
        erg = 0.0
    return PassiveDecomposition(DensityState(sigma, getattr(rho, "dims", None)), u, erg)


def ergotropy(rho, H0) -> float:
    return passive_decomposition(rho, H0).ergotropy


def is_passive(rho, H0, tol: float = 1e-10) -> bool:
    r, h = as_matrix(rho), as_matrix(H0)
    if np.max(np.abs(r @ h - h @ r)) > tol:
        return False
    eps, wv = eigh(h)
    pops = np.real(np.diag(wv.conj().T @ r @ wv))
    return bool(np.all(np.diff(pops) <= tol))


def _gibbs_populations(eps: np.ndarray, beta: float) -> np.ndarray:
    if math.isinf(beta):
        p = np.zeros_like(eps)
        p[np.argmin(eps)] = 1.0
        return p
    x = -beta * (eps - eps.min())
    w = np.exp(x)
    return w / w.sum()


def gibbs_state(H0, beta: float) -> DensityState:
    """``exp(-beta H0)/Z`` for ``beta >= 0``; ``beta = inf`` gives the ground projector."""
    if not beta >= 0:
        raise ValueError("only non-negative inverse temperatures are supported")
    eps, wv = eigh(H0)
    p = _gibbs_populations(eps, beta)
    return DensityState((wv * p) @ wv.conj().T, getattr(H0, "dims", None))


def _shannon(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def entropy(rho) -> float:
    """Von Neumann entropy in nats; ``0 log 0 = 0``."""
    m = as_matrix(rho)
    w = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    return max(0.0, _shannon(np.clip(w, 0.0, None)))


def entropy_matched_beta(rho, H0) -> float:
    """Inverse temperature whose Gibbs state has the entropy of ``rho``.

    Bisection on ``[0, 1e3]``; returns :data:`INFINITE_BETA` for pure states
    and for entropies below that of the ``beta = 1e3`` Gibbs state.
    """
    eps = eigh(H0)[0]
    target = entropy(rho)

    def gap(beta):
        return _shannon(_gibbs_populations(eps, beta)) - target

    if target <= 1e-15 or gap(BETA_MAX) > 0:
        return INFINITE_BETA
    if gap(0.0) <= ENTROPY_TOL:
        return 0.0
    beta = bisect(gap, 0.0, BETA_MAX, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(gap(beta)) > ENTROPY_TOL:
        raise RuntimeError(f"entropy matching did not converge (residual {gap(beta):.3g})")
    return float(beta)


def ergotropy_thermal_bound(rho, H0) -> float:
    """Upper bound ``tr[rho H0] - tr[omega H0]`` with ``omega`` the entropy-matched Gibbs state."""
    beta = entropy_matched_beta(rho, H0)
    eps = eigh(H0)[0]
    return energy(rho, H0) - float(_gibbs_populations(eps, beta) @ eps)


# --- many copies -----------------------------------------------------------


def _product_populations(p: np.ndarray, n: int) -> np.ndarray:
    out = np.ones(1)
    for _ in range(n):
        out = np.multiply.outer(out, p).ravel()
    return out


def _cell_eigensystem(rho, spec: EnergySpectrum):
    r = as_matrix(rho)
    if r.shape[0] != spec.d:
        raise ValueError("single-cell state does not match the spectrum dimension")
    off = r - np.diag(np.diag(r))
    if np.max(np.abs(off)) <= 1e-14:
        return np.clip(np.real(np.diag(r)), 0, None), np.eye(spec.d, dtype=complex)
    lam, q = np.linalg.eigh(0.5 * (r + r.conj().T))
    return np.clip(lam, 0, None), q


def multi_copy_passive_energy(rho, spec: EnergySpectrum, n: int, cap: int = DIM_CAP) -> float:
    """Energy of the passive state of ``n`` copies of ``rho`` (no matrices built)."""
    check_cap(spec.d**n, cap)
    lam, _ = _cell_eigensystem(rho, spec)
    prods = np.sort(_product_populations(lam, n))[::-1]
    return float(prods @ np.sort(spec.ensemble_energies(n)))


def multi_copy_passive(rho, spec: EnergySpectrum, n: int, cap: int = DIM_CAP) -> PassiveDecomposition:
    """Passive decomposition of ``rho^{⊗n}`` against the ensemble Hamiltonian.

    All ``d**n`` products of the eigenvalues of ``rho`` are sorted
    non-increasingly and laid on the ensemble energies sorted ascending. The
    ensemble Hamiltonian is degenerate, so ties go to the lower flat index.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    check_cap(spec.d**n, cap)
    lam, q = _cell_eigensystem(rho, spec)
    prods = _product_populations(lam, n)
    energies = spec.ensemble_energies(n)
    src, dst = _sorted_assignment(prods, energies)
    D = energies.size
    s = np.empty(D)
    s[dst] = prods[src]
    perm = np.zeros((D, D), dtype=complex)
    perm[dst, src] = 1.0
    qn = q
    for _ in range(n - 1):
        qn = np.kron(qn, q)
    u = perm @ qn.conj().T
    e_rho = n * energy(rho, internal_hamiltonian(spec))
    erg = e_rho - float(s @ energies)
    if -1e-12 < erg < 0:
        erg = 0.0
    return PassiveDecomposition(DensityState(np.diag(s), (spec.d,) * n), u, erg)


def per_copy_ergotropy(rho, spec: EnergySpectrum, n: int, cap: int = DIM_CAP) -> float:
    """``w_max(n)``: ergotropy of ``n`` copies divided by ``n``."""
    e1 = energy(rho, internal_hamiltonian(spec))
    return max(0.0, e1 - multi_copy_passive_energy(rho, spec, n, cap) / n)


def activation_asymptote(rho, spec: EnergySpectrum) -> float:
    """Large-``n`` limit of the extra per-copy work, ``tr[(sigma - omega) H0]``.

    ``sigma`` is the single-copy passive state of ``rho`` and ``omega`` the
    Gibbs state of equal entropy.
    """
    h0 = internal_hamiltonian(spec)
    sigma = passive_decomposition(rho, h0).passive_state
    return energy(sigma, h0) - (energy(rho, h0) - ergotropy_thermal_bound(rho, h0))


def activation_curve(rho, spec: EnergySpectrum, n_max: int, cap: int = DIM_CAP) -> list[tuple[int, float]]:
    """Extra per-copy work ``w_max(n) - w_max(1)`` for ``n = 1 .. n_max``."""
    check_cap(spec.d**n_max, cap)
    w1 = per_copy_ergotropy(rho, spec, 1, cap)
    return [(n, max(0.0, per_copy_ergotropy(rho, spec, n, cap) - w1)) for n in range(1, n_max + 1)]
