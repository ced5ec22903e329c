"""Dense operator and state substrate.

Everything here works on plain complex numpy matrices wrapped in two thin,
immutable value types, :class:`HermitianOperator` and :class:`DensityState`.
Tensor products use the Kronecker convention with the *left* factor most
significant, i.e. flat index ``i = i_1 * d_2 * ... * d_n + ... + i_n``.
Every module in the package shares this convention.

Time evolution is exact for piecewise-constant generators: each segment is
exponentiated through its eigendecomposition (all generators are Hermitian),
so unitarity holds to machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Iterator, NamedTuple, Sequence

import numpy as np
from scipy.stats import unitary_group

HERMITIAN_ATOL = 1e-10
TRACE_ATOL = 1e-10
CLAMP_ATOL = 1e-12
DIM_CAP = 4096


class DimensionError(ValueError):
    """Operand dimensions are inconsistent."""


class DimensionCapError(DimensionError):
    """A requested Hilbert space exceeds the configured dimension cap."""


class NotHermitianError(ValueError):
    pass


class InvalidStateError(ValueError):
    """Matrix is not a valid density operator."""


def check_cap(dim: int, cap: int = DIM_CAP) -> None:
    if dim > cap:
        raise DimensionCapError(f"dimension {dim} exceeds cap {cap}")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


def _hermiticity_error(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def _check_dims(dims, dim):
    if dims is None:
        return None
    dims = tuple(int(x) for x in dims)
    if int(np.prod(dims)) != dim:
        raise DimensionError(f"factor dims {dims} do not multiply to {dim}")
    return dims


class HermitianOperator:
    """Immutable dense Hermitian matrix with optional tensor-factor metadata.

    Parameters
    ----------
    matrix : array_like
        Square complex matrix. Must equal its conjugate transpose to within
        ``atol`` (max absolute entry deviation).
    dims : sequence of int, optional
        Dimensions of the tensor factors, left factor first.
    """

    __slots__ = ("matrix", "dims")
    __array_priority__ = 20

    def __init__(self, matrix, dims: Sequence[int] | None = None, *, atol: float = HERMITIAN_ATOL):
        m = np.asarray(matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {m.shape}")
        err = _hermiticity_error(m)
        if err > atol:
            raise NotHermitianError(f"matrix is not Hermitian (deviation {err:.3g})")
        object.__setattr__(self, "matrix", _readonly(m))
        object.__setattr__(self, "dims", _check_dims(dims, m.shape[0]))

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim}, dims={self.dims})"

    def __eq__(self, other):
        if not isinstance(other, HermitianOperator):
            return NotImplemented
        return type(self) is type(other) and np.array_equal(self.matrix, other.matrix)

    __hash__ = None

    def __add__(self, other):
        if isinstance(other, HermitianOperator):
            if other.dim != self.dim:
                raise DimensionError(f"cannot add dims {self.dim} and {other.dim}")
            return HermitianOperator(self.matrix + other.matrix, self.dims or other.dims)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, HermitianOperator):
            return self + (-1.0) * other
        return NotImplemented

    def __mul__(self, scalar):
        if np.isscalar(scalar) and np.isreal(scalar):
            return HermitianOperator(self.matrix * float(np.real(scalar)), self.dims)
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return (-1.0) * self

    def __matmul__(self, other):
        return self.matrix @ np.asarray(other)

    def opnorm(self) -> float:
        """Largest absolute eigenvalue."""
        if self.dim == 0:
            return 0.0
        return float(np.max(np.abs(np.linalg.eigvalsh(self.matrix))))

    def expectation(self, state) -> float:
        return float(np.real(np.trace(np.asarray(state) @ self.matrix)))


class DensityState(HermitianOperator):
    """Unit-trace, positive semidefinite Hermitian matrix.

    Eigenvalues in ``[-1e-12, 0)`` are treated as round-off: they are clamped
    to zero and the state renormalised. Anything more negative is rejected.
    """

    __slots__ = ()

    def __init__(self, matrix, dims: Sequence[int] | None = None, *, atol: float = HERMITIAN_ATOL):
        super().__init__(matrix, dims, atol=atol)
        m = self.matrix
        tr = np.trace(m)
        if abs(tr - 1.0) > TRACE_ATOL:
            raise InvalidStateError(f"trace {tr.real:.12g} differs from 1")
        h = 0.5 * (m + m.conj().T)
        w, v = np.linalg.eigh(h)
        if w[0] < -CLAMP_ATOL:
            raise InvalidStateError(f"negative eigenvalue {w[0]:.3g}")
        if w[0] < 0:
            w = np.clip(w, 0.0, None)
            w /= w.sum()
            object.__setattr__(self, "matrix", _readonly((v * w) @ v.conj().T))

    @classmethod
    def _trusted(cls, matrix, dims=None) -> "DensityState":
        # Skips validation; only for unitary images of already valid states.
        obj = object.__new__(cls)
        object.__setattr__(obj, "matrix", _readonly(matrix))
        object.__setattr__(obj, "dims", None if dims is None else tuple(dims))
        return obj

    @classmethod
    def from_pure(cls, psi, dims=None) -> "DensityState":
        psi = np.asarray(psi, dtype=complex).ravel()
        nrm = np.linalg.norm(psi)
        if nrm == 0:
            raise InvalidStateError("zero vector")
        psi = psi / nrm
        return cls(np.outer(psi, psi.conj()), dims)

    @classmethod
    def from_populations(cls, populations, dims=None) -> "DensityState":
        p = np.asarray(populations, dtype=float)
        return cls(np.diag(p), dims)

    @classmethod
    def maximally_mixed(cls, dim: int, dims=None) -> "DensityState":
        return cls(np.eye(dim) / dim, dims)

    def purity(self) -> float:
        return float(np.real(np.vdot(self.matrix, self.matrix)))

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.matrix)).copy()


def as_matrix(x) -> np.ndarray:
    return np.asarray(x, dtype=complex)


def _dims_of(x):
    return getattr(x, "dims", None) or (np.asarray(x).shape[0],)


def tensor(a, b):
    """Kronecker product ``a ⊗ b`` with ``a`` as the most significant factor.

    Returns a :class:`DensityState` when both operands are states, a
    :class:`HermitianOperator` when both are operators, and a plain array
    otherwise.
    """
    m = np.kron(as_matrix(a), as_matrix(b))
    dims = _dims_of(a) + _dims_of(b)
    if isinstance(a, DensityState) and isinstance(b, DensityState):
        return DensityState(m, dims)
    if isinstance(a, HermitianOperator) and isinstance(b, HermitianOperator):
        return HermitianOperator(m, dims)
    return m


def tensor_all(factors):
    return reduce(tensor, factors)


def tensor_power(x, n: int):
    if n < 1:
        raise ValueError("n must be >= 1")
    check_cap(np.asarray(x).shape[0] ** n)
    return tensor_all([x] * n)


def embed_local(op, site: int, n: int) -> HermitianOperator:
    """Place a single-cell operator on ``site`` of an ``n``-cell register."""
    if not 0 <= site < n:
        raise IndexError(f"site {site} out of range for {n} cells")
    m = as_matrix(op)
    d = m.shape[0]
    check_cap(d**n)
    out = np.kron(np.kron(np.eye(d**site), m), np.eye(d ** (n - site - 1)))
    return HermitianOperator(out, (d,) * n)


def eigh(op) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and a unitary matrix of eigenvectors (columns)."""
    m = as_matrix(op)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    err = _hermiticity_error(m)
    if err > HERMITIAN_ATOL:
        raise NotHermitianError(f"eigh needs a Hermitian input (deviation {err:.3g})")
    return np.linalg.eigh(0.5 * (m + m.conj().T))


def expm_hermitian(op, t: float) -> np.ndarray:
    """``exp(-i * op * t)`` for Hermitian ``op``."""
    w, v = eigh(op)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def commutator(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    return a @ b - b @ a


def is_unitary(u, atol: float = 1e-10) -> bool:
    u = as_matrix(u)
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= atol)


def partial_trace(state, dims: Sequence[int], keep) -> DensityState:
    """Reduced state on the factors listed in ``keep``.

    Kept factors appear in ascending order regardless of the order given.
    """
    m = as_matrix(state)
    dims = tuple(int(x) for x in dims)
    n = len(dims)
    if int(np.prod(dims)) != m.shape[0]:
        raise DimensionError(f"factor dims {dims} do not match state dimension {m.shape[0]}")
    keep = sorted({int(k) for k in keep})
    if any(k < 0 or k >= n for k in keep):
        raise IndexError(f"keep={keep} out of range for {n} factors")
    if len(keep) == n:
        return state if isinstance(state, DensityState) else DensityState(m, dims)
    t = m.reshape(dims + dims)
    # Trace out from the highest axis down so that lower axis numbers stay valid.
    cur = n
    for ax in reversed(range(n)):
        if ax in keep:
            continue
        t = np.trace(t, axis1=ax, axis2=ax + cur)
        cur -= 1
    kd = tuple(dims[k] for k in keep)
    size = int(np.prod(kd))
    return DensityState(t.reshape(size, size), kd)


def partial_transpose(state, dims: Sequence[int], sites) -> np.ndarray:
    m = as_matrix(state)
    dims = tuple(dims)
    n = len(dims)
    t = m.reshape(dims + dims)
    perm = list(range(2 * n))
    for s in sites:
        perm[s], perm[s + n] = perm[s + n], perm[s]
    return t.transpose(perm).reshape(m.shape)


# --- schedules and traces -------------------------------------------------


class Segment(NamedTuple):
    generator: HermitianOperator
    duration: float


@dataclass(frozen=True)
class ControlSchedule:
    """Piecewise-constant generator ``H(t)``; durations in units with ħ = 1."""

    segments: tuple[Segment, ...]

    def __post_init__(self):
        segs = tuple(
            Segment(g if isinstance(g, HermitianOperator) else HermitianOperator(g), float(t))
            for g, t in self.segments
        )
        if not segs:
            raise ValueError("schedule needs at least one segment")
        if any(s.duration <= 0 for s in segs):
            raise ValueError("all segment durations must be positive")
        if len({s.generator.dim for s in segs}) != 1:
            raise DimensionError("all generators must share one dimension")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def constant(cls, generator, duration: float) -> "ControlSchedule":
        return cls(((generator, duration),))

    @classmethod
    def discretize(cls, fn, t_end: float, max_step_norm: float = 0.1) -> "ControlSchedule":
        """Sample a continuous ``fn(t) -> Hermitian`` at segment midpoints.

        The step is chosen so that ``||H||_op * dt <= max_step_norm`` for the
        largest norm seen on a coarse probe grid.
        """
        probe = np.linspace(0.0, t_end, 33)
        hmax = max(HermitianOperator(fn(t)).opnorm() for t in probe) or 1.0
        nseg = max(1, int(np.ceil(t_end * hmax / max_step_norm)))
        dt = t_end / nseg
        return cls(tuple((fn((k + 0.5) * dt), dt) for k in range(nseg)))

    @property
    def dim(self) -> int:
        return self.segments[0].generator.dim

    @property
    def total_time(self) -> float:
        return float(sum(s.duration for s in self.segments))

    def scaled(self, c: float) -> "ControlSchedule":
        """Generators times ``c``, durations divided by ``c``: same unitary."""
        return ControlSchedule(tuple((c * s.generator, s.duration / c) for s in self.segments))

    def unitary(self) -> np.ndarray:
        u = np.eye(self.dim, dtype=complex)
        for s in self.segments:
            u = expm_hermitian(s.generator, s.duration) @ u
        return u


class Sample(NamedTuple):
    t: float
    state: DensityState | None
    energy: float
    power: float
    purity: float


@dataclass(frozen=True)
class SimulationTrace:
    """Time series of a simulated protocol.

    ``energy`` holds the deposited energy ``W(t) = E(t) - E(0)`` against the
    observable the trace was recorded with; ``power`` is ``dW/dt``. ``states``
    may be ``None`` when storing every sample would be too costly.
    """

    times: np.ndarray
    energy: np.ndarray
    power: np.ndarray
    purity: np.ndarray
    states: tuple[DensityState, ...] | None = None
    segment: np.ndarray | None = None
    unitary: bool = True
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if self.states is not None and len(self.states) != t.size:
            raise ValueError("one state per sample is required")
        for name in ("energy", "power", "purity"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != t.shape:
                raise ValueError(f"{name} must have one value per sample")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "times", t)
        if self.states is not None:
            object.__setattr__(self, "states", tuple(self.states))

    def __len__(self):
        return self.times.size

    def __iter__(self) -> Iterator[Sample]:
        for k in range(len(self)):
            st = None if self.states is None else self.states[k]
            yield Sample(self.times[k], st, self.energy[k], self.power[k], self.purity[k])

    @property
    def final_state(self) -> DensityState | None:
        return None if self.states is None else self.states[-1]


def instantaneous_power(state, generator, observable) -> float:
    """``P = -i tr([H, rho] O)``, the rate of change of ``<O>`` under ``H``."""
    rho, h, o = as_matrix(state), as_matrix(generator), as_matrix(observable)
    return float(np.real(-1j * np.trace(commutator(h, rho) @ o)))


def propagate(initial: DensityState, schedule: ControlSchedule, samples_per_segment: int = 1,
              observable=None) -> SimulationTrace:
    """Evolve ``initial`` through ``schedule`` with exact segment propagators.

    The trace starts at ``t = 0`` and records ``samples_per_segment`` equally
    spaced samples inside every segment, the last one at the segment end.
    If ``observable`` is given the trace carries the deposited energy and the
    instantaneous power with respect to it; otherwise those columns are NaN.
    The power at a sample is evaluated with the generator of the segment that
    produced it.
    """
    if samples_per_segment < 1:
        raise ValueError("samples_per_segment must be positive")
    rho = as_matrix(initial)
    if rho.shape[0] != schedule.dim:
        raise DimensionError(f"state dim {rho.shape[0]} vs schedule dim {schedule.dim}")
    obs = None if observable is None else as_matrix(observable)
    if obs is not None and obs.shape != rho.shape:
        raise DimensionError("observable dimension does not match the state")
    dims = getattr(initial, "dims", None)

    def energy_of(r):
        return float(np.real(np.trace(r @ obs))) if obs is not None else np.nan

    e0 = energy_of(rho)
    first_gen = schedule.segments[0].generator
    times, states, energy, power, purity, seg_idx = [0.0], [initial], [0.0], [], [], [0]
    power.append(instantaneous_power(rho, first_gen, obs) if obs is not None else np.nan)
    purity.append(float(np.real(np.vdot(rho, rho))))
    t0 = 0.0
    for k, (gen, dur) in enumerate(schedule.segments):
        w, v = eigh(gen)
        rho_eig = v.conj().T @ rho @ v
        dt = dur / samples_per_segment
        for j in range(1, samples_per_segment + 1):
            tau = j * dt
            phase = np.exp(-1j * w * tau)
            r = v @ (phase[:, None] * rho_eig * phase.conj()[None, :]) @ v.conj().T
            r = 0.5 * (r + r.conj().T)
            times.append(t0 + tau)
            states.append(DensityState._trusted(r, dims))
            energy.append(energy_of(r) - e0)
            power.append(instantaneous_power(r, gen, obs) if obs is not None else np.nan)
            purity.append(float(np.real(np.vdot(r, r))))
            seg_idx.append(k)
        rho = r
        t0 += dur
    return SimulationTrace(np.array(times), np.array(energy), np.array(power), np.array(purity),
                           tuple(states), np.array(seg_idx))


def evolve_pure(psi0, hamiltonian, times) -> np.ndarray:
    """State vectors ``exp(-iHt) psi0`` for every ``t`` in ``times`` (columns)."""
    w, v = eigh(hamiltonian)
    c = v.conj().T @ np.asarray(psi0, dtype=complex)
    t = np.asarray(times, dtype=float)
    return v @ (np.exp(-1j * np.outer(w, t)) * c[:, None])


# --- random sampling helpers ---------------------------------------------


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    return unitary_group.rvs(d, random_state=rng)


def random_hermitian(d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * 0.5 * (a + a.conj().T)


def random_state(d: int, rng: np.random.Generator, rank: int | None = None, dims=None) -> DensityState:
    """Ginibre-distributed mixed state of the given rank (full rank by default)."""
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    m = g @ g.conj().T
    return DensityState(m / np.trace(m).real, dims)


def random_pure(d: int, rng: np.random.Generator) -> np.ndarray:
    psi = rng.normal(size=d) + 1j * rng.normal(size=d)
    return psi / np.linalg.norm(psi)


def fidelity(a, b) -> float:
    """Uhlmann fidelity ``(tr sqrt(sqrt(a) b sqrt(a)))**2``."""
    a, b = as_matrix(a), as_matrix(b)
    w, v = np.linalg.eigh(0.5 * (a + a.conj().T))
    sa = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    inner = sa @ b @ sa
    ev = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    return float(np.sum(np.sqrt(np.clip(ev, 0, None))) ** 2)


PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
