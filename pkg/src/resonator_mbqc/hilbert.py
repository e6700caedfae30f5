"""Dense truncated-Fock linear algebra and time evolution.

Everything here works in units with hbar = 1: Hamiltonians are angular
frequencies (rad/s) and times are seconds.  Matrices are small (tens of
levels), so all operators are plain dense numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, Union

import numpy as np

STEPS_PER_PERIOD = 200


class HilbertError(ValueError):
    """Base class for errors raised by this module."""


class DimensionError(HilbertError):
    """Invalid dimension or mismatched shapes."""


class ParameterError(HilbertError):
    """Invalid numerical parameter (negative rate, empty index set, ...)."""


class StepSizeError(HilbertError):
    """Integrator drift exceeded tolerance; a smaller dt is needed."""


@dataclass(frozen=True)
class TensorSpace:
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise DimensionError("a tensor space needs at least one factor")
        if any(d < 2 for d in dims):
            raise DimensionError(f"every subsystem dimension must be >= 2, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def total_dim(self) -> int:
        return math.prod(self.dims)

    def index(self, labels: Sequence[int]) -> int:
        """Flat index of the product basis state with the given per-factor labels."""
        if len(labels) != len(self.dims):
            raise DimensionError(f"expected {len(self.dims)} labels, got {len(labels)}")
        for lab, d in zip(labels, self.dims):
            if not 0 <= lab < d:
                raise DimensionError(f"label {lab} out of range for dimension {d}")
        return int(np.ravel_multi_index(tuple(labels), self.dims))


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StateVector:
    space: TensorSpace
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(np.ravel(self.amplitudes))
        if amps.shape != (self.space.total_dim,):
            raise DimensionError(
                f"state of length {amps.shape[0]} does not fit space of dim {self.space.total_dim}"
            )
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def basis(cls, space: TensorSpace, labels: Sequence[int]) -> "StateVector":
        amps = np.zeros(space.total_dim, dtype=complex)
        amps[space.index(labels)] = 1.0
        return cls(space, amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> "StateVector":
        n = self.norm
        if n == 0:
            raise ParameterError("cannot normalize the zero vector")
        return StateVector(self.space, self.amplitudes / n)

    def overlap(self, other: "StateVector") -> complex:
        _check_same_space(self.space, other.space)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(self.space, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    space: TensorSpace
    entries: np.ndarray

    def __post_init__(self):
        m = _frozen(self.entries)
        n = self.space.total_dim
        if m.shape != (n, n):
            raise DimensionError(f"density matrix shape {m.shape} does not fit dim {n}")
        object.__setattr__(self, "entries", m)

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    def is_physical(self, tol: float = 1e-9) -> bool:
        m = self.entries
        if np.max(np.abs(m - m.conj().T)) > tol:
            return False
        if abs(np.trace(m) - 1) > tol:
            return False
        return bool(np.linalg.eigvalsh((m + m.conj().T) / 2).min() >= -tol)

    def expectation(self, op: "Operator") -> complex:
        _check_same_space(self.space, op.space)
        return complex(np.trace(op.entries @ self.entries))


@dataclass(frozen=True, eq=False)
class Operator:
    space: TensorSpace
    entries: np.ndarray
    hermitian: bool = field(default=False)

    def __post_init__(self):
        m = _frozen(self.entries)
        n = self.space.total_dim
        if m.shape != (n, n):
            raise DimensionError(f"operator shape {m.shape} does not fit dim {n}")
        if self.hermitian and m.size and np.max(np.abs(m - m.conj().T)) >= 1e-12 * max(1.0, np.max(np.abs(m))):
            raise ParameterError("operator flagged Hermitian but A != A^dagger")
        object.__setattr__(self, "entries", m)

    @classmethod
    def from_matrix(cls, matrix, hermitian: bool = False) -> "Operator":
        """Single-factor operator on a space sized from the matrix."""
        m = np.asarray(matrix, dtype=complex)
        return cls(TensorSpace((m.shape[0],)), m, hermitian)

    @property
    def dag(self) -> "Operator":
        return Operator(self.space, self.entries.conj().T, self.hermitian)

    def __matmul__(self, other):
        if isinstance(other, Operator):
            _check_same_space(self.space, other.space)
            return Operator(self.space, self.entries @ other.entries)
        if isinstance(other, StateVector):
            _check_same_space(self.space, other.space)
            return StateVector(self.space, self.entries @ other.amplitudes)
        return NotImplemented

    def __add__(self, other: "Operator") -> "Operator":
        _check_same_space(self.space, other.space)
        return Operator(self.space, self.entries + other.entries, self.hermitian and other.hermitian)

    def __sub__(self, other: "Operator") -> "Operator":
        _check_same_space(self.space, other.space)
        return Operator(self.space, self.entries - other.entries, self.hermitian and other.hermitian)

    def __mul__(self, scalar) -> "Operator":
        herm = self.hermitian and np.isreal(scalar)
        return Operator(self.space, self.entries * scalar, bool(herm))

    __rmul__ = __mul__


def _check_same_space(a: TensorSpace, b: TensorSpace) -> None:
    if a.dims != b.dims:
        raise DimensionError(f"space mismatch: {a.dims} vs {b.dims}")


def annihilation(n_max: int) -> Operator:
    """Lowering operator on Fock levels 0..n_max."""
    if n_max < 1:
        raise DimensionError(f"n_max must be >= 1, got {n_max}")
    m = np.diag(np.sqrt(np.arange(1, n_max + 1)), 1)
    return Operator.from_matrix(m)


def creation(n_max: int) -> Operator:
    return annihilation(n_max).dag


def number(n_max: int) -> Operator:
    if n_max < 1:
        raise DimensionError(f"n_max must be >= 1, got {n_max}")
    return Operator.from_matrix(np.diag(np.arange(n_max + 1, dtype=float)), hermitian=True)


def identity(space: TensorSpace) -> Operator:
    return Operator(space, np.eye(space.total_dim), hermitian=True)


def embed(op: Operator, site_index: int, space: TensorSpace) -> Operator:
    """Lift a single-factor operator into ``space`` acting on factor ``site_index``."""
    if not 0 <= site_index < len(space.dims):
        raise DimensionError(f"site index {site_index} out of range for {space.dims}")
    d = space.dims[site_index]
    if op.entries.shape != (d, d):
        raise DimensionError(
            f"operator of size {op.entries.shape[0]} cannot act on factor of dimension {d}"
        )
    left = math.prod(space.dims[:site_index])
    right = math.prod(space.dims[site_index + 1:])
    m = np.kron(np.kron(np.eye(left), op.entries), np.eye(right))
    return Operator(space, m, op.hermitian)


def tensor(*ops: Operator) -> Operator:
    dims = tuple(d for op in ops for d in op.space.dims)
    m = np.array([[1.0 + 0j]])
    for op in ops:
        m = np.kron(m, op.entries)
    return Operator(TensorSpace(dims), m, all(op.hermitian for op in ops))


def tensor_states(*states: StateVector) -> StateVector:
    dims = tuple(d for s in states for d in s.space.dims)
    v = np.array([1.0 + 0j])
    for s in states:
        v = np.kron(v, s.amplitudes)
    return StateVector(TensorSpace(dims), v)


def fidelity(a: StateVector, b: StateVector) -> float:
    """|<a|b>|^2 for normalized copies of ``a`` and ``b``."""
    _check_same_space(a.space, b.space)
    ov = np.vdot(a.amplitudes, b.amplitudes) / (a.norm * b.norm)
    return float(min(1.0, abs(ov) ** 2))


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    keep = sorted(set(keep))
    dims = rho.space.dims
    if not keep:
        raise ParameterError("keep set must be nonempty")
    if keep[0] < 0 or keep[-1] >= len(dims):
        raise ParameterError(f"keep indices {keep} out of range for {len(dims)} factors")
    n = len(dims)
    t = rho.entries.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    # einsum over paired bra/ket indices of the traced factors
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    ket = list(letters[:n])
    bra = list(letters[n:2 * n])
    for i in traced:
        bra[i] = ket[i]
    out = "".join(ket[i] for i in keep) + "".join(bra[i] for i in keep)
    reduced = np.einsum("".join(ket) + "".join(bra) + "->" + out, t)
    kd = math.prod(dims[i] for i in keep)
    return DensityMatrix(TensorSpace(tuple(dims[i] for i in keep)), reduced.reshape(kd, kd))


# ---------------------------------------------------------------- integration

HamiltonianSource = Union[Operator, Callable[[float], Operator]]


def _matrix_of(h) -> np.ndarray:
    return h.entries if isinstance(h, Operator) else np.asarray(h, dtype=complex)


def _spectral_half_width(m: np.ndarray) -> tuple[float, float]:
    """Return (centre, half_width) of the spectrum of a Hermitian matrix."""
    ev = np.linalg.eigvalsh((m + m.conj().T) / 2)
    return float((ev[-1] + ev[0]) / 2), float((ev[-1] - ev[0]) / 2)


def default_dt(hamiltonian: HamiltonianSource, steps_per_period: int = STEPS_PER_PERIOD) -> float:
    """dt = 1 / (steps_per_period * f_max), f_max the largest frequency scale of H.

    For a constant operator the spectrum is centred first (a global phase), so
    f_max is its half-width.  A callable may advertise ``max_frequency`` in rad/s.
    """
    if isinstance(hamiltonian, Operator):
        _, omega = _spectral_half_width(hamiltonian.entries)
    elif hasattr(hamiltonian, "max_frequency"):
        omega = float(hamiltonian.max_frequency)
    else:
        m = _matrix_of(hamiltonian(0.0))
        omega = float(np.max(np.abs(np.linalg.eigvalsh((m + m.conj().T) / 2))))
    f_max = omega / (2 * math.pi)
    return math.inf if f_max == 0 else 1.0 / (steps_per_period * f_max)


def _step_count(duration: float, dt: float) -> tuple[int, float]:
    if dt <= 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    if duration < 0:
        raise ParameterError(f"duration must be non-negative, got {duration}")
    if duration == 0:
        return 0, 0.0
    if dt > duration:
        dt = duration
    n = max(1, math.ceil(duration / dt - 1e-9))
    return n, duration / n


def _rk4_step_matrix(generator: np.ndarray, dt: float) -> np.ndarray:
    """Degree-4 Taylor polynomial of exp(dt*G): one classical RK4 step for dy/dt = G y."""
    n = generator.shape[0]
    x = dt * generator
    step = np.eye(n, dtype=complex)
    term = np.eye(n, dtype=complex)
    for k in range(1, 5):
        term = term @ x / k
        step = step + term
    return step


def propagator(hamiltonian: Operator, duration: float, dt: float | None = None) -> Operator:
    """RK4 propagator of a time-independent Hamiltonian.

    Fixed-step RK4 applied to a constant linear system is repeated
    multiplication by the same step matrix, so the n-step product is formed
    by binary powering.  The spectrum is centred before stepping and the
    removed global phase restored exactly afterwards.
    """
    m = hamiltonian.entries
    if dt is None:
        dt = default_dt(hamiltonian)
    n, h = _step_count(duration, min(dt, duration) if duration > 0 else dt)
    centre, _ = _spectral_half_width(m)
    shifted = m - centre * np.eye(m.shape[0])
    u = np.linalg.matrix_power(_rk4_step_matrix(-1j * shifted, h), n) if n else np.eye(m.shape[0])
    return Operator(hamiltonian.space, u * np.exp(-1j * centre * duration))


def _check_norms(states: np.ndarray, norms0: np.ndarray, dt: float, tol: float) -> None:
    drift = np.max(np.abs(np.sum(np.abs(states) ** 2, axis=0) - norms0))
    if drift > tol:
        raise StepSizeError(
            f"norm drift {drift:.3g} exceeds {tol:g} at dt={dt:.3g}s; use a smaller dt"
        )


def evolve(hamiltonian: HamiltonianSource, psi0: StateVector, duration: float,
           dt: float | None = None, *, tol: float = 1e-6) -> StateVector:
    """Integrate i d|psi>/dt = H(t)|psi> with fixed-step RK4.

    ``hamiltonian`` is either a constant :class:`Operator` or a callable
    ``t -> Operator``.  The state is never renormalized; if the squared norm
    drifts by more than ``tol`` a :class:`StepSizeError` is raised.
    """
    if dt is None:
        dt = default_dt(hamiltonian)
    if isinstance(hamiltonian, Operator):
        _check_same_space(hamiltonian.space, psi0.space)
        if not math.isfinite(dt):
            dt = duration or 1.0
        u = propagator(hamiltonian, duration, dt)
        out = u.entries @ psi0.amplitudes
    else:
        if not math.isfinite(dt):
            dt = duration or 1.0
        out = _rk4_time_dependent(hamiltonian, psi0.amplitudes[:, None], duration, dt)[:, 0]
    _check_norms(out[:, None], np.array([psi0.norm ** 2]), dt, tol)
    return StateVector(psi0.space, out)


def _rk4_time_dependent(hamiltonian: Callable[[float], Operator], y0: np.ndarray,
                        duration: float, dt: float) -> np.ndarray:
    n, h = _step_count(duration, dt)
    y = np.array(y0, dtype=complex)
    t = 0.0
    for k in range(n):
        t = k * h
        h0 = -1j * _matrix_of(hamiltonian(t))
        hm = -1j * _matrix_of(hamiltonian(t + h / 2))
        h1 = -1j * _matrix_of(hamiltonian(t + h))
        k1 = h0 @ y
        k2 = hm @ (y + 0.5 * h * k1)
        k3 = hm @ (y + 0.5 * h * k2)
        k4 = h1 @ (y + h * k3)
        y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def trajectory(hamiltonian: Operator, psi0: StateVector, duration: float, samples: int,
               dt: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Sample a constant-Hamiltonian RK4 evolution at ``samples`` evenly spaced times.

    Returns ``(times, states)`` with ``states[k]`` the amplitudes at ``times[k]``
    (first sample is t=0, last is ``duration``).
    """
    if samples < 2:
        raise ParameterError("need at least 2 samples")
    _check_same_space(hamiltonian.space, psi0.space)
    if dt is None:
        dt = default_dt(hamiltonian)
    interval = duration / (samples - 1)
    stride = propagator(hamiltonian, interval, min(dt, interval)).entries
    states = np.empty((samples, psi0.space.total_dim), dtype=complex)
    states[0] = psi0.amplitudes
    for k in range(1, samples):
        states[k] = stride @ states[k - 1]
    return np.linspace(0.0, duration, samples), states


# ----------------------------------------------------------------- Lindblad

def liouvillian(h: np.ndarray, collapse: Sequence[tuple[np.ndarray, float]]) -> np.ndarray:
    """Row-major vectorized Lindblad generator: vec(drho/dt) = L vec(rho)."""
    n = h.shape[0]
    eye = np.eye(n)
    lv = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for c, rate in collapse:
        if rate == 0:
            continue
        cdc = c.conj().T @ c
        lv += rate * (np.kron(c, c.conj()) - 0.5 * np.kron(cdc, eye) - 0.5 * np.kron(eye, cdc.T))
    return lv


def _collapse_matrices(collapse_ops) -> list[tuple[np.ndarray, float]]:
    out = []
    for op, rate in collapse_ops:
        if rate < 0:
            raise ParameterError(f"collapse rate must be >= 0, got {rate}")
        out.append((_matrix_of(op), float(rate)))
    return out


def lindblad_propagator(hamiltonian: Operator, collapse_ops, duration: float,
                        dt: float | None = None) -> np.ndarray:
    """RK4 superoperator (row-major vectorization) for a constant Lindbladian."""
    collapse = _collapse_matrices(collapse_ops)
    m = hamiltonian.entries
    if dt is None:
        dt = default_dt(hamiltonian)
    centre, _ = _spectral_half_width(m)
    n, h = _step_count(duration, min(dt, duration) if duration > 0 else dt)
    lv = liouvillian(m - centre * np.eye(m.shape[0]), collapse)
    if n == 0:
        return np.eye(lv.shape[0], dtype=complex)
    return np.linalg.matrix_power(_rk4_step_matrix(lv, h), n)


def evolve_lindblad(hamiltonian: HamiltonianSource, rho0: DensityMatrix, collapse_ops,
                    duration: float, dt: float | None = None, *, tol: float = 1e-6) -> DensityMatrix:
    """Integrate the Lindblad master equation with fixed-step RK4.

    ``collapse_ops`` is a sequence of ``(Operator, rate)`` pairs; each adds
    rate * (C rho C^dagger - {C^dagger C, rho}/2).
    """
    collapse = _collapse_matrices(collapse_ops)
    if dt is None:
        dt = default_dt(hamiltonian)
    if not math.isfinite(dt):
        dt = duration or 1.0
    n_dim = rho0.space.total_dim
    if isinstance(hamiltonian, Operator):
        _check_same_space(hamiltonian.space, rho0.space)
        sup = lindblad_propagator(hamiltonian, collapse_ops, duration, dt)
        out = (sup @ rho0.entries.reshape(-1)).reshape(n_dim, n_dim)
    else:
        out = _lindblad_rk4_time_dependent(hamiltonian, rho0.entries, collapse, duration, dt)
    drift = abs(np.trace(out).real - rho0.trace)
    if drift > tol:
        raise StepSizeError(f"trace drift {drift:.3g} exceeds {tol:g}; use a smaller dt")
    return DensityMatrix(rho0.space, out)


def _lindblad_rhs(h: np.ndarray, rho: np.ndarray, collapse) -> np.ndarray:
    out = -1j * (h @ rho - rho @ h)
    for c, rate in collapse:
        if rate == 0:
            continue
        cd = c.conj().T
        cdc = cd @ c
        out += rate * (c @ rho @ cd - 0.5 * (cdc @ rho + rho @ cdc))
    return out


def _lindblad_rk4_time_dependent(hamiltonian, rho0, collapse, duration, dt):
    n, h = _step_count(duration, dt)
    rho = np.array(rho0, dtype=complex)
    for k in range(n):
        t = k * h
        h0 = _matrix_of(hamiltonian(t))
        hm = _matrix_of(hamiltonian(t + h / 2))
        h1 = _matrix_of(hamiltonian(t + h))
        k1 = _lindblad_rhs(h0, rho, collapse)
        k2 = _lindblad_rhs(hm, rho + 0.5 * h * k1, collapse)
        k3 = _lindblad_rhs(hm, rho + 0.5 * h * k2, collapse)
        k4 = _lindblad_rhs(h1, rho + h * k3, collapse)
        rho = rho + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    return rho


# ------------------------------------------------------------ gate metrics

def average_gate_fidelity(channel_blocks: np.ndarray, target: np.ndarray) -> float:
    """Average gate fidelity of a (possibly leaky) map against a unitary target.

    ``channel_blocks[k, l]`` is the d x d matrix E(|k><l|) restricted to the
    computational subspace.  Uses F = (sum_kl <k|V^dag E(|k><l|) V|l> + Tr E(I)) / (d(d+1)),
    which reduces to (|Tr V^dag M|^2 + Tr M^dag M) / (d(d+1)) for E(rho) = M rho M^dag.
    """
    d = target.shape[0]
    vd = target.conj().T
    overlap = 0.0 + 0j
    trace_id = 0.0
    for k in range(d):
        trace_id += float(np.trace(channel_blocks[k, k]).real)
        for l in range(d):
            overlap += (vd @ channel_blocks[k, l] @ target)[k, l]
    f = (overlap.real + trace_id) / (d * (d + 1))
    return float(min(1.0, max(0.0, f)))


def unitary_channel_blocks(m: np.ndarray) -> np.ndarray:
    """channel_blocks for rho -> M rho M^dagger."""
    return np.einsum("ik,jl->klij", m, m.conj())
