"""Cavity-assisted charging with the Dicke model.

``H = w_c a^dag a + w_a J_z + 2 w_c lam J_x (a + a^dag)`` with ħ = 1 and
``J_i = (1/2) sum_l sigma_i^(l)`` built from the standard Pauli matrices, so
a cell's ground state ``|g>`` is the ``sigma_z = -1`` eigenvector (index 1).
The photon mode is the left (most significant) factor.

Two bases are available. ``"full"`` is the complete ``(N+1) 2^n``
space. ``"symmetric"`` keeps only the ``J = n/2`` Dicke multiplet, with
states ordered by descending ``m``. The Hamiltonian preserves ``J^2`` and
the initial state lies in that multiplet, so both bases give the same
dynamics while the symmetric one has dimension ``(N+1)(n+1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .charging import max_average_power
from .qops import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    DensityState,
    HermitianOperator,
    SimulationTrace,
    check_cap,
    embed_local,
    partial_trace,
)

COUPLING_REGIMES = {"weak": 0.05, "intermediate": 0.5, "strong": 2.0}
CONVERGENCE_RTOL = 1e-6
CUTOFF_STEP = 4
MAX_CUTOFF = 600


class CutoffConvergenceError(RuntimeError):
    def __init__(self, cutoff, value, value_next):
        self.cutoff, self.value, self.value_next = cutoff, value, value_next
        super().__init__(f"photon cutoff {cutoff} not converged: max W {value!r} vs {value_next!r} "
                         f"at cutoff {cutoff + CUTOFF_STEP}")


@dataclass(frozen=True)
class DickeConfig:
    """Dicke battery parameters.

    ``omega_a`` defaults to ``omega_c`` (resonance). ``tau_c`` defaults to
    ``2 pi max(n, 4) / omega_c`` and ``photon_cutoff`` to ``2n + 4`` with
    automatic escalation until the convergence gate passes.
    """

    n: int
    omega_c: float = 1.0
    omega_a: float | None = None
    lambda_bar: float = COUPLING_REGIMES["strong"]
    tau_c: float | None = None
    photon_cutoff: int | None = None
    rotating_wave: bool = False
    basis: str = "symmetric"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.omega_a is None:
            object.__setattr__(self, "omega_a", self.omega_c)
        if self.omega_c <= 0 or self.omega_a <= 0:
            raise ValueError("frequencies must be positive")
        if self.lambda_bar < 0:
            raise ValueError("coupling must be non-negative")
        if self.tau_c is not None and self.tau_c <= 0:
            raise ValueError("tau_c must be positive")
        if self.photon_cutoff is not None and self.photon_cutoff < self.n:
            raise ValueError(f"photon_cutoff {self.photon_cutoff} < n={self.n} cannot hold the initial Fock state")
        if self.basis not in ("full", "symmetric"):
            raise ValueError(f"unknown basis {self.basis!r}")

    @property
    def cutoff(self) -> int:
        return self.photon_cutoff if self.photon_cutoff is not None else 2 * self.n + 4

    @property
    def t_end(self) -> float:
        return self.tau_c if self.tau_c is not None else 2 * np.pi * max(self.n, 4) / self.omega_c


def collective_spin(n: int, axis: str) -> HermitianOperator:
    """``(1/2) sum_l sigma_axis^(l)`` on the full ``2^n`` space."""
    pauli = {"x": PAULI_X, "y": PAULI_Y, "z": PAULI_Z}[axis]
    check_cap(2**n)
    total = sum(embed_local(pauli, l, n).matrix for l in range(n))
    return HermitianOperator(0.5 * total, (2,) * n)


def symmetric_spin(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(J_x, J_y, J_z)`` on the ``J = n/2`` multiplet, basis ``m = j, j-1, ..., -j``."""
    j = n / 2
    m = j - np.arange(n + 1)
    jz = np.diag(m).astype(complex)
    # J+ |m> = sqrt(j(j+1) - m(m+1)) |m+1>; |m+1> sits one index lower.
    jp = np.diag(np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1)), 1).astype(complex)
    return (jp + jp.conj().T) / 2, (jp - jp.conj().T) / 2j, jz


def _annihilation(cutoff: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cutoff + 1)), 1).astype(complex)


def _spin_ops(cfg: DickeConfig, basis: str):
    if basis == "symmetric":
        jx, jy, jz = symmetric_spin(cfg.n)
        return jx, jy, jz, (cfg.n + 1,)
    jx, jy, jz = (collective_spin(cfg.n, ax).matrix for ax in "xyz")
    return jx, jy, jz, (2,) * cfg.n


def dicke_hamiltonian(cfg: DickeConfig, lam: float | None = None, basis: str | None = None,
                      cutoff: int | None = None) -> HermitianOperator:
    """Dicke Hamiltonian at coupling ``lam`` (default ``cfg.lambda_bar``).

    With ``cfg.rotating_wave`` the coupling keeps only the excitation-
    conserving part ``w_c lam (J_+ a + J_- a^dag)`` (Tavis-Cummings).
    """
    basis = basis or cfg.basis
    lam = cfg.lambda_bar if lam is None else lam
    N = cfg.cutoff if cutoff is None else cutoff
    jx, jy, jz, sdims = _spin_ops(cfg, basis)
    dim = (N + 1) * int(np.prod(sdims))
    check_cap(dim)
    a = _annihilation(N)
    ip, isp = np.eye(N + 1), np.eye(jz.shape[0])
    h = cfg.omega_c * np.kron(a.conj().T @ a, isp) + cfg.omega_a * np.kron(ip, jz)
    if lam:
        if cfg.rotating_wave:
            jp = jx + 1j * jy
            h = h + cfg.omega_c * lam * (np.kron(a, jp) + np.kron(a.conj().T, jp.conj().T))
        else:
            h = h + 2 * cfg.omega_c * lam * np.kron(a + a.conj().T, jx)
    return HermitianOperator(h, (N + 1,) + sdims)


def battery_hamiltonian(cfg: DickeConfig, basis: str | None = None, cutoff: int | None = None) -> HermitianOperator:
    """``w_a J_z`` lifted to the cavity-plus-array space."""
    basis = basis or cfg.basis
    N = cfg.cutoff if cutoff is None else cutoff
    jz = _spin_ops(cfg, basis)[2]
    sdims = (cfg.n + 1,) if basis == "symmetric" else (2,) * cfg.n
    return HermitianOperator(cfg.omega_a * np.kron(np.eye(N + 1), jz), (N + 1,) + sdims)


def initial_vector(cfg: DickeConfig, basis: str | None = None, cutoff: int | None = None) -> np.ndarray:
    basis = basis or cfg.basis
    N = cfg.cutoff if cutoff is None else cutoff
    if N < cfg.n:
        raise ValueError(f"photon cutoff {N} < n={cfg.n}")
    S = cfg.n + 1 if basis == "symmetric" else 2**cfg.n
    psi = np.zeros((N + 1) * S, dtype=complex)
    psi[cfg.n * S + (S - 1)] = 1.0  # |n photons> ⊗ |G>, |G> is the last spin index
    return psi


def initial_state(cfg: DickeConfig, basis: str | None = None) -> DensityState:
    """``|n> ⊗ |G>``: ``n`` photons and every cell in its ground state."""
    basis = basis or cfg.basis
    sdims = (cfg.n + 1,) if basis == "symmetric" else (2,) * cfg.n
    return DensityState.from_pure(initial_vector(cfg, basis), (cfg.cutoff + 1,) + sdims)


class _Evolver:
    """Spectral propagator of one Dicke Hamiltonian applied to the initial state."""

    def __init__(self, cfg: DickeConfig, basis: str, cutoff: int):
        h = dicke_hamiltonian(cfg, basis=basis, cutoff=cutoff)
        self.h = h.matrix
        self.hb = battery_hamiltonian(cfg, basis, cutoff).matrix
        self.w, self.v = np.linalg.eigh(h.matrix)
        psi0 = initial_vector(cfg, basis, cutoff)
        self.c = self.v.conj().T @ psi0
        self.e0 = float(np.real(np.vdot(psi0, self.hb @ psi0)))
        self.dims = h.dims

    def vectors(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return self.v @ (np.exp(-1j * np.outer(self.w, t)) * self.c[:, None])

    def work(self, t) -> np.ndarray:
        # w_a J_z is diagonal in both bases
        return np.real(np.diag(self.hb)) @ np.abs(self.vectors(t)) ** 2 - self.e0


def _converged_cutoff(cfg: DickeConfig, basis: str, times) -> tuple[int, "_Evolver"]:
    """Smallest cutoff in the escalation ladder whose max W survives ``cutoff + 4``."""
    N = cfg.cutoff
    ev = _Evolver(cfg, basis, N)
    w_max = float(np.max(ev.work(times)))
    while True:
        nxt = _Evolver(cfg, basis, N + CUTOFF_STEP)
        w_next = float(np.max(nxt.work(times)))
        if abs(w_next - w_max) <= CONVERGENCE_RTOL * max(abs(w_next), 1e-300):
            return N, ev
        if cfg.photon_cutoff is not None:
            raise CutoffConvergenceError(N, w_max, w_next)
        N = N + max(CUTOFF_STEP, N // 2)
        if N > MAX_CUTOFF:
            raise CutoffConvergenceError(N, w_max, w_next)
        ev = _Evolver(cfg, basis, N)
        w_max = float(np.max(ev.work(times)))


def charge_dicke(cfg: DickeConfig, samples: int = 400, keep_states: bool = False,
                 basis: str | None = None) -> SimulationTrace:
    """Switch the coupling on at ``t = 0`` and record the array's energy up to ``tau_c``.

    ``energy`` is ``W(t) = <w_a J_z>(t) - <w_a J_z>(0)``, ``power`` its time
    derivative and ``purity`` that of the reduced array state, which evolves
    non-unitarily. ``extras`` holds the converged ``cutoff``.
    """
    basis = basis or cfg.basis
    times = np.linspace(0.0, cfg.t_end, samples + 1)
    N, ev = _converged_cutoff(cfg, basis, times)
    psi = ev.vectors(times)
    W = np.real(np.diag(ev.hb)) @ np.abs(psi) ** 2 - ev.e0
    comm = ev.h @ ev.hb - ev.hb @ ev.h
    P = np.real(1j * np.einsum("it,ij,jt->t", psi.conj(), comm, psi))
    S = psi.shape[0] // (N + 1)
    purity, states = [], []
    for k in range(times.size):
        m = psi[:, k].reshape(N + 1, S)
        rb = m.T @ m.conj()
        purity.append(float(np.real(np.vdot(rb, rb))))
        if keep_states:
            states.append(DensityState._trusted(rb, ev.dims[1:]))
    return SimulationTrace(times, W, P, np.array(purity), tuple(states) if keep_states else None,
                           unitary=False, extras={"cutoff": N})


def battery_state(cfg: DickeConfig, t: float, basis: str | None = None) -> DensityState:
    """Reduced array state at time ``t``, obtained by tracing out the cavity."""
    basis = basis or cfg.basis
    ev = _Evolver(cfg, basis, cfg.cutoff)
    psi = ev.vectors([t])[:, 0]
    full = DensityState._trusted(np.outer(psi, psi.conj()), ev.dims)
    return partial_trace(full, ev.dims, range(1, len(ev.dims)))


@dataclass(frozen=True)
class DickePower:
    n: int
    cutoff: int
    tau: float
    power: float


def dicke_max_power(cfg: DickeConfig, grid: int = 400, basis: str | None = None) -> DickePower:
    """Largest average power ``max_tau W(tau)/tau`` over ``(0, tau_c]``.

    Uniform grid of ``grid`` points, one bounded refinement around the best
    grid point.
    """
    basis = basis or cfg.basis
    times = np.linspace(cfg.t_end / grid, cfg.t_end, grid)
    N, ev = _converged_cutoff(cfg, basis, times)
    tau, p = max_average_power(ev.work, times)
    return DickePower(cfg.n, N, tau, p)


def dicke_power_ratio(n_list, template: DickeConfig, grid: int = 400, mapper=map,
                      details: list | None = None) -> list[tuple[int, float]]:
    """``max P_collective(n) / (n max P(1))`` for each ``n``.

    The parallel reference is ``n`` independent single-cell Dicke batteries,
    each with its own one-photon cavity. ``mapper`` must preserve order;
    when ``details`` is a list it receives the ``DickePower`` of every ``n``.
    """
    ns = list(n_list)
    results = list(mapper(lambda n: dicke_max_power(replace(template, n=n, photon_cutoff=None), grid),
                          [1] + [n for n in ns if n != 1]))
    single, rest = results[0], iter(results[1:])
    powers = [single if n == 1 else next(rest) for n in ns]
    if details is not None:
        details.extend(powers)
    return [(n, 1.0 if n == 1 else r.power / (n * single.power)) for n, r in zip(ns, powers)]


def fit_exponent(ns, ratios) -> float:
    """Slope of ``log ratio`` against ``log n`` (least squares)."""
    return float(np.polyfit(np.log(np.asarray(ns, float)), np.log(np.asarray(ratios, float)), 1)[0])


def excitation_number(cfg: DickeConfig, basis: str | None = None, cutoff: int | None = None) -> np.ndarray:
    """``a^dag a + J_z + n/2``: conserved only in the rotating-wave model."""
    basis = basis or cfg.basis
    N = cfg.cutoff if cutoff is None else cutoff
    jz = _spin_ops(cfg, basis)[2]
    a = _annihilation(N)
    return (np.kron(a.conj().T @ a, np.eye(jz.shape[0])) + np.kron(np.eye(N + 1), jz)
            + cfg.n / 2 * np.eye((N + 1) * jz.shape[0]))

