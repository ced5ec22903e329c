"""Entanglement-free optimal work extraction from diagonal many-cell states.

The passive state of a diagonal ``n``-cell state is reached by permuting
populations. Every transposition ``a <-> b`` is broken into two-level
rotations between basis states that differ at a single site, which keeps
the register separable at every instant: during a rotation the state is a
mixed block on one site, tensored with a basis projector on all the others,
plus a diagonal remainder.

Basis labels are tuples of 0-based per-site level indices, left site most
significant (``(2, 2)`` is the state written ``|33>`` with 1-based labels).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .ergotropy import EnergySpectrum
from .qops import DensityState, SimulationTrace, as_matrix, partial_transpose

BasisLabel = tuple[int, ...]

STRUCTURE_TOL = 1e-12
PPT_TOL = 1e-12
DEFAULT_SUBSTEPS = 8


class StructureError(ValueError):
    """A state does not have the block-plus-diagonal form of a protocol step."""


def label_of(index: int, d: int, n: int) -> BasisLabel:
    return tuple(int(x) for x in np.unravel_index(index, (d,) * n))


def index_of(label: BasisLabel, d: int) -> int:
    return int(np.ravel_multi_index(tuple(label), (d,) * len(label)))


def hamming(a: BasisLabel, b: BasisLabel) -> int:
    return sum(x != y for x, y in zip(a, b))


@dataclass(frozen=True)
class TranspositionStep:
    """Full population swap between two labels that differ at one site."""

    source: BasisLabel
    target: BasisLabel
    duration: float = 1.0

    def __post_init__(self):
        if len(self.source) != len(self.target) or hamming(self.source, self.target) != 1:
            raise ValueError(f"{self.source} -> {self.target} is not a single-site hop")
        if self.duration <= 0:
            raise ValueError("duration must be positive")

    @property
    def site(self) -> int:
        return next(k for k, (x, y) in enumerate(zip(self.source, self.target)) if x != y)


@dataclass(frozen=True)
class ExtractionPlan:
    """Sequence of single-site swaps realising ``target_permutation``.

    ``target_permutation[k]`` is the flat index whose population ends up at
    flat index ``k``. ``swaps`` lists the transpositions the steps were
    expanded from, and ``energies`` the diagonal of the register Hamiltonian.
    """

    d: int
    n: int
    steps: tuple[TranspositionStep, ...]
    target_permutation: tuple[int, ...]
    swaps: tuple[tuple[int, int], ...]
    energies: np.ndarray

    @property
    def dim(self) -> int:
        return self.d**self.n

    @property
    def total_time(self) -> float:
        return float(sum(s.duration for s in self.steps))

    def apply(self, populations) -> np.ndarray:
        """Push populations through the step sequence symbolically."""
        p = np.array(populations, dtype=float)
        for st in self.steps:
            a, b = index_of(st.source, self.d), index_of(st.target, self.d)
            p[a], p[b] = p[b], p[a]
        return p


def passive_permutation(rho_populations, spectrum) -> np.ndarray:
    """Permutation ``perm`` with ``s[k] = p[perm[k]]`` non-increasing in energy.

    Populations are sorted non-increasingly (ties: ascending source index)
    and laid on energies sorted ascending (ties: ascending target index).
    """
    p = np.asarray(rho_populations, dtype=float)
    e = np.asarray(spectrum, dtype=float)
    if p.shape != e.shape:
        raise ValueError("populations and spectrum must have equal length")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("populations must sum to 1")
    src = np.argsort(-p, kind="stable")
    dst = np.argsort(e, kind="stable")
    perm = np.empty(p.size, dtype=int)
    perm[dst] = src
    return perm


def transposition_path(alpha: BasisLabel, beta: BasisLabel) -> list[BasisLabel]:
    """Waypoints from ``alpha`` to ``beta`` rewriting one differing site at a time, left to right."""
    if len(alpha) != len(beta):
        raise ValueError("labels must have the same number of sites")
    path = [tuple(alpha)]
    cur = list(alpha)
    for k, digit in enumerate(beta):
        if cur[k] != digit:
            cur[k] = digit
            path.append(tuple(cur))
    return path


def swap_steps(alpha: BasisLabel, beta: BasisLabel, duration: float = 1.0) -> list[TranspositionStep]:
    """``2h - 1`` single-site swaps exchanging the populations of ``alpha`` and ``beta``.

    Forward along the path, then back over all but the last hop.
    """
    path = transposition_path(alpha, beta)
    hops = list(zip(path, path[1:]))
    seq = hops + hops[-2::-1] if hops else []
    return [TranspositionStep(a, b, duration) for a, b in seq]


def decompose_permutation(perm, populations) -> list[tuple[int, int]]:
    """Transpositions realising ``perm``, larger population differences first.

    Each swap puts one position in its final place. Among the positions
    still wrong, the one whose swap moves the largest population difference
    goes first (ties: lowest position).
    """
    perm = np.asarray(perm)
    D = perm.size
    holder = np.arange(D)  # holder[pos] = source index currently sitting at pos
    where = np.arange(D)   # where[src] = position currently holding src
    p = np.asarray(populations, dtype=float)
    swaps = []
    while True:
        wrong = np.nonzero(holder != perm)[0]
        if wrong.size == 0:
            return swaps
        best, best_gap = None, -1.0
        for pos in wrong:
            other = where[perm[pos]]
            gap = abs(p[holder[pos]] - p[holder[other]])
            if gap > best_gap + 1e-15:
                best, best_gap = (int(pos), int(other)), gap
        a, b = best
        holder[a], holder[b] = holder[b], holder[a]
        where[holder[a]], where[holder[b]] = a, b
        swaps.append((min(a, b), max(a, b)))


def build_plan(populations, spec: EnergySpectrum, n: int, step_duration: float = 1.0) -> ExtractionPlan:
    """Extraction plan for a diagonal ``n``-cell state with the given populations."""
    energies = spec.ensemble_energies(n)
    p = np.asarray(populations, dtype=float)
    if p.size != energies.size:
        raise ValueError(f"expected {energies.size} populations, got {p.size}")
    perm = passive_permutation(p, energies)
    swaps = decompose_permutation(perm, p)
    steps = []
    for a, b in swaps:
        steps += swap_steps(label_of(a, spec.d, n), label_of(b, spec.d, n), step_duration)
    return ExtractionPlan(spec.d, n, tuple(steps), tuple(int(x) for x in perm), tuple(swaps), energies)


def plan_for_copies(rho_cell, spec: EnergySpectrum, n: int, step_duration: float = 1.0):
    """Diagonal product state of ``n`` copies, its plan, and the local pre-rotation.

    A non-diagonal cell state is first rotated into its eigenbasis by the
    same unitary on every cell; that rotation is local and creates no
    correlations. Returns ``(state, plan, local_rotation)``.
    """
    r = as_matrix(rho_cell)
    off = r - np.diag(np.diag(r))
    if np.max(np.abs(off)) <= STRUCTURE_TOL:
        rot = np.eye(spec.d, dtype=complex)
        pops = np.real(np.diag(r))
    else:
        lam, q = np.linalg.eigh(0.5 * (r + r.conj().T))
        rot = q.conj().T
        pops = np.clip(lam, 0, None)
    prod = np.ones(1)
    for _ in range(n):
        prod = np.multiply.outer(prod, pops).ravel()
    prod = prod / prod.sum()
    state = DensityState(np.diag(prod), (spec.d,) * n)
    return state, build_plan(prod, spec, n, step_duration), rot


def step_unitary(a: int, b: int, theta: float, dim: int) -> np.ndarray:
    """Identity except a real rotation by ``theta`` on the ``{a, b}`` block.

    ``theta = pi/2`` exchanges the populations of ``a`` and ``b``.
    """
    if a == b:
        raise ValueError("a rotation needs two distinct levels")
    u = np.eye(dim, dtype=complex)
    c, s = np.cos(theta), np.sin(theta)
    u[a, a], u[a, b], u[b, a], u[b, b] = c, -s, s, c
    return u


def _rotate(rho: np.ndarray, a: int, b: int, theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    out = rho.copy()
    ra, rb = rho[a, :].copy(), rho[b, :].copy()
    out[a, :], out[b, :] = c * ra - s * rb, s * ra + c * rb
    ca, cb = out[:, a].copy(), out[:, b].copy()
    out[:, a], out[:, b] = c * ca - s * cb, s * ca + c * cb
    return out


@dataclass(frozen=True)
class SeparabilityCertificate:
    """Explicit product decomposition of a protocol state.

    ``state = weight * local_state ⊗ |spectator><spectator| + diag(remainder)``
    where ``local_state`` (``d x d``) lives on ``site`` and ``spectator``
    fixes every other site. ``ppt`` maps each bipartition (the sites on one
    side, always containing site 0) to the smallest eigenvalue of the
    partial transpose.
    """

    d: int
    n: int
    weight: float
    site: int | None
    local_state: np.ndarray | None
    spectator: BasisLabel | None
    remainder: np.ndarray
    ppt: dict

    @property
    def ppt_ok(self) -> bool:
        return all(v >= -PPT_TOL for v in self.ppt.values())

    def reconstruct(self) -> np.ndarray:
        out = np.diag(self.remainder).astype(complex)
        if self.site is None:
            return out
        factors = []
        for k in range(self.n):
            if k == self.site:
                factors.append(self.local_state)
            else:
                e = np.zeros((self.d, self.d), dtype=complex)
                e[self.spectator[k], self.spectator[k]] = 1.0
                factors.append(e)
        block = factors[0]
        for f in factors[1:]:
            block = np.kron(block, f)
        return out + self.weight * block


def ppt_spectrum(state, dims) -> dict:
    """Minimum partial-transpose eigenvalue for every bipartition of ``dims``."""
    m = as_matrix(state)
    n = len(dims)
    out = {}
    for size in range(1, n):
        for side in combinations(range(n), size):
            if 0 not in side:
                continue
            pt = partial_transpose(m, dims, side)
            out[side] = float(np.linalg.eigvalsh(0.5 * (pt + pt.conj().T))[0])
    return out


def separability_certificate(state, active_step: TranspositionStep | None, d: int | None = None,
                             n: int | None = None) -> SeparabilityCertificate:
    """Certify that ``state`` has the single-site block structure of a protocol step.

    Raises :class:`StructureError` when any coherence lies outside the block
    of ``active_step`` (or anywhere at all when ``active_step`` is ``None``).
    """
    m = as_matrix(state)
    dims = getattr(state, "dims", None)
    if d is None or n is None:
        if not dims or len(set(dims)) != 1:
            raise ValueError("pass d and n, or a state with uniform factor dims")
        d, n = dims[0], len(dims)
    D = d**n
    if m.shape != (D, D):
        raise ValueError("state dimension does not match d**n")
    off = m - np.diag(np.diag(m))
    pops = np.real(np.diag(m)).copy()
    ppt = ppt_spectrum(m, (d,) * n) if n > 1 else {}
    if active_step is None:
        if np.max(np.abs(off)) > STRUCTURE_TOL:
            raise StructureError("state has coherences but no active step was given")
        return SeparabilityCertificate(d, n, 0.0, None, None, None, pops, ppt)
    a, b = index_of(active_step.source, d), index_of(active_step.target, d)
    mask = np.ones_like(off, dtype=bool)
    mask[a, b] = mask[b, a] = False
    if np.max(np.abs(off[mask]), initial=0.0) > STRUCTURE_TOL:
        raise StructureError("coherences outside the active two-level block")
    site = active_step.site
    weight = pops[a] + pops[b]
    local = np.zeros((d, d), dtype=complex)
    if weight > 0:
        ia, ib = active_step.source[site], active_step.target[site]
        local[ia, ia] = m[a, a] / weight
        local[ib, ib] = m[b, b] / weight
        local[ia, ib] = m[a, b] / weight
        local[ib, ia] = m[b, a] / weight
    remainder = pops.copy()
    remainder[a] = remainder[b] = 0.0
    return SeparabilityCertificate(d, n, float(weight), site, local, tuple(active_step.source), remainder, ppt)


def execute_plan(rho, plan: ExtractionPlan, substeps: int = DEFAULT_SUBSTEPS,
                 certify: bool = True) -> SimulationTrace:
    """Run the plan with each rotation angle ramped linearly to ``pi/2``.

    Energies and powers are recorded against the register Hamiltonian; the
    power is negative while work is being extracted. With ``certify`` every
    sample carries a :class:`SeparabilityCertificate` in
    ``trace.extras["certificates"]``.
    """
    m = as_matrix(rho)
    if m.shape != (plan.dim, plan.dim):
        raise ValueError(f"state dim {m.shape[0]} does not match plan dim {plan.dim}")
    if np.max(np.abs(m - np.diag(np.diag(m)))) > STRUCTURE_TOL:
        raise ValueError("the protocol acts on states diagonal in the computational basis")
    if substeps < 1:
        raise ValueError("substeps must be positive")
    dims = (plan.d,) * plan.n
    e = plan.energies

    def energy_of(r):
        return float(np.real(np.diag(r)) @ e)

    e0 = energy_of(m)
    cur = np.array(m, dtype=complex)
    times, states, W, P, purity = [0.0], [DensityState._trusted(cur, dims)], [0.0], [0.0], [float(np.real(np.vdot(cur, cur)))]
    certs = [separability_certificate(cur, None, plan.d, plan.n)] if certify else None
    t0 = 0.0
    for st in plan.steps:
        a, b = index_of(st.source, plan.d), index_of(st.target, plan.d)
        rate = (np.pi / 2) / st.duration
        start = cur
        for k in range(1, substeps + 1):
            theta = (np.pi / 2) * k / substeps
            r = _rotate(start, a, b, theta)
            # generator i*rate*(|b><a| - |a><b|); P = -i tr([G, rho] H0)
            power = 2.0 * rate * np.real(r[a, b]) * (e[b] - e[a])
            times.append(t0 + st.duration * k / substeps)
            states.append(DensityState._trusted(r, dims))
            W.append(energy_of(r) - e0)
            P.append(power)
            purity.append(float(np.real(np.vdot(r, r))))
            if certify:
                certs.append(separability_certificate(r, st, plan.d, plan.n))
        cur = r
        t0 += st.duration
    extras = {"certificates": certs} if certify else {}
    return SimulationTrace(np.array(times), np.array(W), np.array(P), np.array(purity), tuple(states),
                           extras=extras)
