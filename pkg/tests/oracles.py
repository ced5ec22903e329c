"""Reference computations that share no code with the library."""

import itertools
import math

import numpy as np
from scipy.optimize import linear_sum_assignment


def passive_energy_by_permutation(pops, energies):
    """Minimum of sum p_pi(k) e_k over every permutation (small sizes only)."""
    pops, energies = list(pops), list(energies)
    if len(pops) > 8:
        raise ValueError("permutation search is limited to 8 entries")
    return min(sum(p * e for p, e in zip(perm, energies)) for perm in itertools.permutations(pops))


def passive_energy_by_assignment(pops, energies):
    """Same minimum as an assignment problem solved by the Hungarian method."""
    cost = np.outer(pops, energies)
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].sum())


def product_populations(cell, n):
    out = [1.0]
    for _ in range(n):
        out = [a * b for a in out for b in cell]
    return out


def product_energies(levels, n):
    out = [0.0]
    for _ in range(n):
        out = [a + b for a in out for b in levels]
    return out


def shannon(ps):
    return -sum(p * math.log(p) for p in ps if p > 0)


def gibbs_pops(levels, beta):
    w = [math.exp(-beta * e) for e in levels]
    z = sum(w)
    return [x / z for x in w]


def rabi_excited_population(rate, t):
    """Two-level transfer under rate * sigma_x from the lower level."""
    return math.sin(rate * t) ** 2


def min_pt_eigenvalue_two_qubits(rho):
    """Partial transpose on the second qubit, written out entry by entry."""
    r = np.asarray(rho)
    pt = np.empty_like(r)
    for a in range(2):
        for b in range(2):
            for c in range(2):
                for d in range(2):
                    pt[2 * a + b, 2 * c + d] = r[2 * a + d, 2 * c + b]
    return float(np.linalg.eigvalsh(pt).min())


def thermal_ball_threshold(n):
    """Closed form of ((1 + tanh^2 e)/2)^n = 1/(2^n - 1) solved for e."""
    D = 2**n
    t2 = (2.0 / (D - 1) ** (1.0 / n)) - 1.0
    return math.atanh(math.sqrt(t2))


def transfer_driving(psi, phi, rate, rng, spectator_scale=1.0):
    """Constant Hamiltonian carrying psi onto phi (up to phase) in time arccos|<psi|phi>|/rate.

    Rotation generator inside span{psi, phi} plus a random Hermitian block on
    the orthogonal complement, which the trajectory never visits.
    """
    psi = np.asarray(psi, complex)
    phi = np.asarray(phi, complex)
    a = np.vdot(psi, phi)
    phi_aligned = phi * np.exp(-1j * np.angle(a)) if abs(a) > 0 else phi
    w = phi_aligned - np.vdot(psi, phi_aligned) * psi
    u = 1j * w / np.linalg.norm(w)
    h = rate * (np.outer(u, psi.conj()) + np.outer(psi, u.conj()))
    d = psi.size
    basis = np.linalg.qr(np.column_stack([psi, u, rng.normal(size=(d, d - 2)) + 1j * rng.normal(size=(d, d - 2))]))[0]
    comp = basis[:, 2:]
    x = rng.normal(size=(d - 2, d - 2)) + 1j * rng.normal(size=(d - 2, d - 2))
    h = h + spectator_scale * comp @ ((x + x.conj().T) / 2) @ comp.conj().T
    return 0.5 * (h + h.conj().T)


def first_arrival_time(psi, phi, h, t_max, samples=2000):
    """First local maximum of |<phi|psi(t)>|^2 reaching 1 - 1e-9, to machine precision."""
    from scipy.optimize import brentq

    w, v = np.linalg.eigh(h)
    c = v.conj().T @ psi
    f = v.conj().T @ phi

    def deriv(t):
        amp = np.vdot(f, np.exp(-1j * w * t) * c)
        damp = np.vdot(f, -1j * w * np.exp(-1j * w * t) * c)
        return 2 * np.real(np.conj(amp) * damp)

    def fid(t):
        return abs(np.vdot(f, np.exp(-1j * w * t) * c)) ** 2

    ts = np.linspace(0, t_max, samples + 1)
    ds = [deriv(t) for t in ts]
    for k in range(1, ts.size):
        if ds[k - 1] > 0 >= ds[k]:
            t = brentq(deriv, ts[k - 1], ts[k], xtol=1e-15, rtol=1e-15)
            if fid(t) >= 1 - 1e-9:
                return t
    raise RuntimeError("target not reached")
