"""Pulse-level dynamics of one junction (resonator, mediator, resonator) and one site.

Junction space ordering is ``[left resonator, mediator, right resonator]`` with
the mediator basis ``(g, e)``; site space ordering is ``[inner qubit, resonator]``.

Constant Hamiltonians are integrated in rotating frames that are exact
(the frame generator commutes with the static Hamiltonian), which makes
the drive time-independent; the lab-frame path exists for cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .device import (
    InnerQubitSpec,
    JunctionSpec,
    ResonatorSpec,
    mhz,
    selectivity_gap,
    stark_shifted_frequency,
    to_ghz,
    to_mhz,
)
from .hilbert import (
    DensityMatrix,
    Operator,
    StateVector,
    TensorSpace,
    annihilation,
    average_gate_fidelity,
    default_dt,
    embed,
    evolve,
    evolve_lindblad,
    StepSizeError,
    lindblad_propagator,
    propagator,
    trajectory,
    unitary_channel_blocks,
    _rk4_time_dependent,
)

DEFAULT_OMEGA = mhz(4)
SELECTIVITY_FACTOR = 10
# finer than the generic default: binary powering makes small steps cheap
CZ_STEPS_PER_PERIOD = 1000
CZ_TARGET = np.diag([1, 1, 1, -1]).astype(complex)
# computational labels (n_left, n_right) in CZ_TARGET order
COMPUTATIONAL = ((0, 0), (0, 1), (1, 0), (1, 1))

SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |g><e|
PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class PulseError(ValueError):
    pass


class SelectivityError(PulseError):
    """Rabi strength too large to resolve the photon-number-split lines."""


class LeakageError(PulseError):
    """Simulated gate leaves the computational manifold with probability > 0.5."""


class SelectivityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PulseSpec:
    drive_frequency: float
    rabi_strength: float
    duration: float
    phase: float = 0.0

    def __post_init__(self):
        if self.duration <= 0:
            raise PulseError("pulse duration must be > 0")
        if self.rabi_strength < 0:
            raise PulseError("Rabi strength must be >= 0 (phase is carried separately)")

    def to_record(self) -> dict:
        return {
            "wd_GHz": to_ghz(self.drive_frequency),
            "omega_MHz": to_mhz(self.rabi_strength),
            "duration_ns": self.duration * 1e9,
        }


@dataclass(frozen=True)
class DecoherenceSpec:
    """Amplitude damping times (seconds, ``inf`` for none) plus optional pure dephasing."""

    qubit_T1: float = math.inf
    photon_T1: float = math.inf
    qubit_Tphi: float = math.inf

    def __post_init__(self):
        for name in ("qubit_T1", "photon_T1", "qubit_Tphi"):
            if not getattr(self, name) > 0:
                raise PulseError(f"{name} must be positive or infinite")

    @property
    def active(self) -> bool:
        return any(math.isfinite(t) for t in (self.qubit_T1, self.photon_T1, self.qubit_Tphi))

    @staticmethod
    def rate(t: float) -> float:
        return 0.0 if math.isinf(t) else 1.0 / t


@dataclass
class GateResult:
    conditional_phase: float
    single_qubit_phases: tuple[float, float]
    leakage: float
    avg_gate_fidelity: float
    final_states: list
    pulse: PulseSpec
    idle_conditional_phase: float = 0.0
    # E(|k><l|) on the computational subspace, relative to idle evolution
    channel: np.ndarray | None = field(default=None, repr=False)
    # unitary runs only: the 4x4 block after the local-Z corrections
    computational_block: np.ndarray | None = field(default=None, repr=False)

    def to_record(self) -> dict:
        return {
            "conditional_phase_rad": self.conditional_phase,
            "conditional_phase_over_pi": self.conditional_phase / math.pi,
            "single_qubit_phases_rad": list(self.single_qubit_phases),
            "leakage": self.leakage,
            "fidelity": self.avg_gate_fidelity,
            "idle_conditional_phase_rad": self.idle_conditional_phase,
            "pulse": self.pulse.to_record(),
        }


def wrap_phase(phi: float, low: float = -math.pi) -> float:
    """Map an angle into [low, low + 2 pi)."""
    return (phi - low) % (2 * math.pi) + low


def phase_distance(a: float, b: float) -> float:
    return abs(wrap_phase(a - b))


# -------------------------------------------------------------- Hamiltonians

class JunctionHamiltonian:
    """Lab-frame H(t) for one junction; call with a time to get an :class:`Operator`."""

    def __init__(self, j: JunctionSpec, left: ResonatorSpec, right: ResonatorSpec,
                 pulse: PulseSpec | None, n_max: int):
        if n_max < 1:
            raise PulseError("n_max must be >= 1")
        self.junction, self.left, self.right, self.pulse, self.n_max = j, left, right, pulse, n_max
        self.space = TensorSpace((n_max + 1, 2, n_max + 1))
        a = annihilation(n_max)
        sm = Operator.from_matrix(SIGMA_MINUS)
        self.a = embed(a, 0, self.space).entries
        self.b = embed(a, 2, self.space).entries
        self.sm = embed(sm, 1, self.space).entries
        self.excitations = (self.a.conj().T @ self.a + self.b.conj().T @ self.b
                            + self.sm.conj().T @ self.sm).real
        coupling = (j.g_left * self.a.conj().T @ self.sm + j.g_right * self.b.conj().T @ self.sm)
        self._static = (left.frequency * self.a.conj().T @ self.a
                        + right.frequency * self.b.conj().T @ self.b
                        + j.epsilon * self.sm.conj().T @ self.sm
                        + coupling + coupling.conj().T)

    @property
    def static(self) -> Operator:
        return Operator(self.space, self._static, hermitian=True)

    def _drive(self, t: float) -> np.ndarray:
        p = self.pulse
        if p is None or p.rabi_strength == 0:
            return 0
        sp = self.sm.conj().T
        term = p.rabi_strength * np.exp(-1j * (p.drive_frequency * t + p.phase)) * sp
        return term + term.conj().T

    def __call__(self, t: float) -> Operator:
        return Operator(self.space, self._static + self._drive(t))

    @property
    def max_frequency(self) -> float:
        ev = np.linalg.eigvalsh(self._static)
        return float(np.max(np.abs(ev))) + (self.pulse.rabi_strength if self.pulse else 0.0)

    def rotating(self, frame_frequency: float, *, drive: bool = True) -> Operator:
        """Time-independent H in the frame exp(i w t N), N the total excitation number.

        With ``frame_frequency`` equal to the drive frequency the drive term
        becomes static; the transformation is exact because N commutes with
        the static Hamiltonian.
        """
        h = self._static - frame_frequency * self.excitations
        p = self.pulse
        if drive and p is not None and p.rabi_strength != 0:
            if frame_frequency != p.drive_frequency:
                raise PulseError("drive is static only in the frame rotating at the drive frequency")
            term = p.rabi_strength * np.exp(-1j * p.phase) * self.sm.conj().T
            h = h + term + term.conj().T
        return Operator(self.space, h, hermitian=True)

    def frame_phase(self, frame_frequency: float, t: float) -> np.ndarray:
        """Diagonal of exp(-i w t N): maps rotating-frame amplitudes back to the lab frame."""
        return np.exp(-1j * frame_frequency * t * np.diag(self.excitations))

    def collapse_ops(self, deco: DecoherenceSpec) -> list:
        ops = [
            (self.sm, DecoherenceSpec.rate(deco.qubit_T1)),
            (self.a, DecoherenceSpec.rate(deco.photon_T1)),
            (self.b, DecoherenceSpec.rate(deco.photon_T1)),
        ]
        if math.isfinite(deco.qubit_Tphi):
            sz = self.sm.conj().T @ self.sm - self.sm @ self.sm.conj().T
            ops.append((sz, DecoherenceSpec.rate(deco.qubit_Tphi) / 2))
        return [(Operator(self.space, c), r) for c, r in ops]

    def index(self, n_left: int, excited: int, n_right: int) -> int:
        return self.space.index((n_left, excited, n_right))


def junction_hamiltonian(j: JunctionSpec, left: ResonatorSpec, right: ResonatorSpec,
                         pulse: PulseSpec | None = None, n_max: int = 3) -> JunctionHamiltonian:
    return JunctionHamiltonian(j, left, right, pulse, n_max)


# ----------------------------------------------------------------- CZ pulses

def optimal_cz_pulse(j: JunctionSpec, left: ResonatorSpec, right: ResonatorSpec,
                     omega: float | None = None, phase: float = 0.0) -> PulseSpec:
    """Drive at the dispersive (1;1) line for duration pi/Omega.

    Omega must be below the selectivity gap; between gap/10 and the gap it is
    clamped to gap/10 with a :class:`SelectivityWarning`.
    """
    import warnings

    omega = DEFAULT_OMEGA if omega is None else float(omega)
    if omega <= 0:
        raise PulseError("Rabi strength must be > 0 to define a pulse duration")
    gap = selectivity_gap(j, left, right)
    if omega >= gap:
        raise SelectivityError(
            f"Omega/2pi = {to_mhz(omega):.3g} MHz is not below the selectivity gap "
            f"{to_mhz(gap):.3g} MHz"
        )
    limit = gap / SELECTIVITY_FACTOR
    if omega > limit * (1 + 1e-12):
        warnings.warn(
            f"Omega/2pi = {to_mhz(omega):.3g} MHz clamped to gap/{SELECTIVITY_FACTOR} = "
            f"{to_mhz(limit):.3g} MHz", SelectivityWarning, stacklevel=2,
        )
        omega = limit
    wd = stark_shifted_frequency(j, left, right, 1, 1)
    return PulseSpec(wd, omega, math.pi / omega, phase)


def dressed_transition(j: JunctionSpec, left: ResonatorSpec, right: ResonatorSpec,
                       n: int, n_prime: int, n_max: int = 3) -> tuple[float, float]:
    """Exact mediator transition frequency for photon numbers (n, n') and its drive matrix element.

    Dressed states are the eigenvectors of the undriven junction Hamiltonian
    with the largest overlap on the bare labels; the matrix element is
    |<n,e,n'~| sigma_+ |n,g,n'~>|, i.e. the fraction of Omega that survives dressing.
    """
    hj = junction_hamiltonian(j, left, right, None, n_max)
    ev, vec = np.linalg.eigh(hj._static)

    def pick(excited):
        col = int(np.argmax(np.abs(vec[hj.index(n, excited, n_prime), :])))
        return ev[col], vec[:, col]

    eg, vg = pick(0)
    ee, ve = pick(1)
    element = abs(np.vdot(ve, hj.sm.conj().T @ vg))
    return float(ee - eg), float(element)


def calibrated_cz_pulse(j: JunctionSpec, left: ResonatorSpec, right: ResonatorSpec,
                        omega: float | None = None, n_max: int = 3, phase: float = 0.0) -> PulseSpec:
    """CZ pulse from exact diagonalization rather than the dispersive formula.

    Drives at the dressed (1;1) transition and stretches the duration so the
    dressed matrix element still accumulates a full 2 pi rotation.
    """
    omega = DEFAULT_OMEGA if omega is None else float(omega)
    if omega <= 0:
        raise PulseError("Rabi strength must be > 0 to define a pulse duration")
    wd, element = dressed_transition(j, left, right, 1, 1, n_max)
    return PulseSpec(wd, omega, math.pi / (omega * element), phase)


def _computational_indices(hj: JunctionHamiltonian) -> list[int]:
    return [hj.index(n, 0, m) for n, m in COMPUTATIONAL]


def _unitary_blocks(hj, pulse, dt, frame):
    idx = _computational_indices(hj)
    T = pulse.duration
    if frame == "rotating":
        h_drive = hj.rotating(pulse.drive_frequency)
        h_idle = hj.rotating(pulse.drive_frequency, drive=False)
        if dt is None:
            dt = default_dt(h_drive, CZ_STEPS_PER_PERIOD)
        u = propagator(h_drive, T, dt).entries[:, idx]
        u0 = propagator(h_idle, T, dt).entries[:, idx]
        lab = hj.frame_phase(pulse.drive_frequency, T)[:, None] * u
    elif frame == "lab":
        idle = JunctionHamiltonian(hj.junction, hj.left, hj.right, None, hj.n_max)
        if dt is None:
            dt = default_dt(hj, CZ_STEPS_PER_PERIOD)
        y0 = np.eye(hj.space.total_dim, dtype=complex)[:, idx]
        u = _rk4_time_dependent(hj, y0, T, dt)
        u0 = _rk4_time_dependent(idle, y0, T, dt)
        lab = u
    else:
        raise PulseError(f"unknown frame {frame!r}")
    drift = np.max(np.abs(np.sum(np.abs(u) ** 2, axis=0) - 1))
    if drift > 1e-6:
        raise StepSizeError(f"norm drift {drift:.3g} exceeds 1e-6; use a smaller dt")
    m = u0.conj().T @ u
    states = [StateVector(hj.space, lab[:, k]) for k in range(len(idx))]
    return unitary_channel_blocks(m), u0, states, m


def _lindblad_blocks(hj, pulse, deco, dt):
    idx = _computational_indices(hj)
    T = pulse.duration
    dim = hj.space.total_dim
    h_drive = hj.rotating(pulse.drive_frequency)
    h_idle = hj.rotating(pulse.drive_frequency, drive=False)
    if dt is None:
        dt = default_dt(h_drive, CZ_STEPS_PER_PERIOD)
    collapse = hj.collapse_ops(deco)
    sup = lindblad_propagator(h_drive, collapse, T, dt)
    u0 = propagator(h_idle, T, dt).entries
    blocks = np.empty((4, 4, 4, 4), dtype=complex)
    finals = []
    phases = hj.frame_phase(pulse.drive_frequency, T)
    for k, ik in enumerate(idx):
        for l, il in enumerate(idx):
            x = np.zeros((dim, dim), dtype=complex)
            x[ik, il] = 1.0
            rho = (sup @ x.reshape(-1)).reshape(dim, dim)
            if k == l:
                lab = phases[:, None] * rho * phases.conj()[None, :]
                finals.append(DensityMatrix(hj.space, lab))
            back = u0.conj().T @ rho @ u0
            blocks[k, l] = back[np.ix_(idx, idx)]
    return blocks, u0[:, idx], finals, None


def simulate_cz(j: JunctionSpec, left: ResonatorSpec, right: ResonatorSpec, pulse: PulseSpec,
                n_max: int = 3, decoherence: DecoherenceSpec | None = None, *,
                dt: float | None = None, frame: str = "rotating") -> GateResult:
    """Evolve the four |n, g, n'> inputs under the driven junction and extract the gate.

    Amplitudes are taken relative to the undriven evolution over the same
    duration, so the static dispersive shifts are not attributed to the pulse
    (their conditional part is reported as ``idle_conditional_phase``).
    """
    hj = junction_hamiltonian(j, left, right, pulse, n_max)
    if decoherence is not None and decoherence.active:
        if frame != "rotating":
            raise PulseError("open-system gates are simulated in the rotating frame only")
        blocks, u0_comp, finals, block = _lindblad_blocks(hj, pulse, decoherence, dt)
    else:
        blocks, u0_comp, finals, block = _unitary_blocks(hj, pulse, dt, frame)

    # relative phase of |k> against |00>, read from the coherence E(|k><00|)
    rel = [float(np.angle(blocks[k, 0][k, 0])) for k in range(4)]
    theta_right, theta_left = rel[1], rel[2]
    cp = wrap_phase(rel[3] - rel[1] - rel[2], -math.pi / 2)
    correction = np.diag(np.exp(-1j * np.array([0.0, theta_right, theta_left,
                                                theta_left + theta_right])))
    corrected = np.einsum("ia,klab,jb->klij", correction, blocks, correction.conj())
    fid = average_gate_fidelity(corrected, CZ_TARGET)
    leakage = float(1 - np.mean([np.trace(blocks[k, k]).real for k in range(4)]))
    leakage = min(1.0, max(0.0, leakage))
    if leakage > 0.5:
        raise LeakageError(
            f"leakage {leakage:.3f} > 0.5: pulse is far off resonance or the junction is not dispersive"
        )
    d0 = u0_comp[_computational_indices(hj), :].diagonal()
    idle_cp = wrap_phase(float(np.angle(d0[3] * d0[0] / (d0[1] * d0[2]))))
    return GateResult(
        conditional_phase=cp,
        single_qubit_phases=(wrap_phase(-theta_left), wrap_phase(-theta_right)),
        leakage=leakage,
        avg_gate_fidelity=fid,
        final_states=finals,
        pulse=pulse,
        idle_conditional_phase=idle_cp,
        channel=blocks,
        computational_block=None if block is None else correction @ block,
    )


# ------------------------------------------------------------------- hopping

def hopping_curve(j: JunctionSpec, left: ResonatorSpec, right: ResonatorSpec, duration: float,
                  n_max: int = 3, side: str = "left", samples: int | None = None):
    """Transfer probability versus time for one photon starting on ``side``, no drive."""
    hj = junction_hamiltonian(j, left, right, None, n_max)
    # exact frame: N commutes with the undriven Hamiltonian
    h = hj.rotating((left.frequency + right.frequency) / 2, drive=False)
    if side == "left":
        start, other_axis = (1, 0, 0), 2
    elif side == "right":
        start, other_axis = (0, 0, 1), 0
    else:
        raise PulseError("side must be 'left' or 'right'")
    psi0 = StateVector.basis(hj.space, start)
    if samples is None:
        scale = max(abs(left.frequency - right.frequency),
                    abs(j.g_left) + abs(j.g_right), 1.0 / duration)
        samples = int(min(200_000, max(2001, math.ceil(duration * scale / (2 * math.pi) * 40))))
    times, states = trajectory(h, psi0, duration, samples, default_dt(h, CZ_STEPS_PER_PERIOD))
    labels = np.array(np.unravel_index(np.arange(hj.space.total_dim), hj.space.dims))
    moved = labels[other_axis] >= 1
    probs = np.sum(np.abs(states[:, moved]) ** 2, axis=1)
    return times, probs


def simulate_hopping(j: JunctionSpec, left: ResonatorSpec, right: ResonatorSpec,
                     duration: float = 1e-6, n_max: int = 3, side: str = "left",
                     samples: int | None = None) -> float:
    """Peak probability, over sampled times, of the photon appearing in the other resonator."""
    _, probs = hopping_curve(j, left, right, duration, n_max, side, samples)
    return float(probs.max())


# ------------------------------------------------------- single-site control

def qubit_rotation(axis: str, angle: float) -> Operator:
    """R_axis(angle) = exp(-i angle sigma_axis / 2)."""
    try:
        s = PAULI[axis.lower()]
    except KeyError:
        raise PulseError(f"axis must be x, y or z, got {axis!r}") from None
    m = math.cos(angle / 2) * np.eye(2) - 1j * math.sin(angle / 2) * s
    return Operator.from_matrix(m)


def u_gamma(gamma: float) -> Operator:
    """R_x(pi/2) R_z(pi/2 - gamma): rotates |+gamma> to |g> and |-gamma> to |e>."""
    return qubit_rotation("x", math.pi / 2) @ qubit_rotation("z", math.pi / 2 - gamma)


def _site_space(n_max: int) -> TensorSpace:
    return TensorSpace((2, n_max + 1))


def _jc_resonant(site: InnerQubitSpec, n_max: int) -> Operator:
    """Resonant Jaynes-Cummings coupling in the frame rotating at the common frequency."""
    space = _site_space(n_max)
    sm = embed(Operator.from_matrix(SIGMA_MINUS), 0, space).entries
    a = embed(annihilation(n_max), 1, space).entries
    h = site.coupling * (a.conj().T @ sm + a @ sm.conj().T)
    return Operator(space, h, hermitian=True)


def _site_collapse(site_space: TensorSpace, deco: DecoherenceSpec | None) -> list:
    if deco is None or not deco.active:
        return []
    n_max = site_space.dims[1] - 1
    sm = embed(Operator.from_matrix(SIGMA_MINUS), 0, site_space)
    a = embed(annihilation(n_max), 1, site_space)
    ops = [(sm, DecoherenceSpec.rate(deco.qubit_T1)), (a, DecoherenceSpec.rate(deco.photon_T1))]
    if math.isfinite(deco.qubit_Tphi):
        sz = embed(Operator.from_matrix(PAULI["z"]), 0, site_space) * -1.0
        ops.append((sz, DecoherenceSpec.rate(deco.qubit_Tphi) / 2))
    return ops


def _run_stage(h: Operator, state, duration: float, deco: DecoherenceSpec | None):
    if duration == 0:
        return state
    if deco is not None and deco.active:
        rho = state if isinstance(state, DensityMatrix) else state.to_density()
        return evolve_lindblad(h, rho, _site_collapse(h.space, deco), duration)
    return evolve(h, state, duration)


def _apply_qubit_op(op: Operator, state, n_max: int):
    full = embed(op, 0, _site_space(n_max))
    if isinstance(state, DensityMatrix):
        return DensityMatrix(state.space, full.entries @ state.entries @ full.entries.conj().T)
    return full @ state


def _state_fidelity(target: StateVector, state) -> float:
    if isinstance(state, DensityMatrix):
        v = target.amplitudes
        return float(np.real(np.vdot(v, state.entries @ v)))
    return float(abs(np.vdot(target.amplitudes, state.amplitudes)) ** 2)


def _finite_half_pi(site: InnerQubitSpec, res: ResonatorSpec, n_max: int, rabi: float, state,
                    deco: DecoherenceSpec | None):
    """Resonant pi/2 drive on the detuned inner qubit (phase referenced to the qubit frame)."""
    space = _site_space(n_max)
    eps = site.epsilon_range[1]
    sm = embed(Operator.from_matrix(SIGMA_MINUS), 0, space).entries
    a = embed(annihilation(n_max), 1, space).entries
    # drive at the vacuum-dressed qubit line
    wd = eps + site.coupling ** 2 / (eps - res.frequency)
    h = ((res.frequency - wd) * a.conj().T @ a + (eps - wd) * sm.conj().T @ sm
         + site.coupling * (a.conj().T @ sm + a @ sm.conj().T)
         + rabi / 2 * (sm + sm.conj().T))
    return _run_stage(Operator(space, h, hermitian=True), state, math.pi / (2 * rabi), deco)


def simulate_initialization(site: InnerQubitSpec, res: ResonatorSpec, n_max: int = 3,
                            decoherence: DecoherenceSpec | None = None, *,
                            swap_duration: float | None = None,
                            drive_strength: float | None = None):
    """pi/2 pulse on the inner qubit, then a resonant swap of duration 3 pi / (2 g_i).

    Returns ``(final_state, fidelity)`` against |g>(|0> + |1>)/sqrt(2).  The
    pulse is instantaneous unless ``drive_strength`` (rad/s) is given.
    """
    space = _site_space(n_max)
    state = StateVector.basis(space, (0, 0))
    if drive_strength is None:
        state = _apply_qubit_op(qubit_rotation("x", math.pi / 2), state, n_max)
    else:
        state = _finite_half_pi(site, res, n_max, drive_strength, state, decoherence)
    t = 3 * math.pi / (2 * site.coupling) if swap_duration is None else swap_duration
    state = _run_stage(_jc_resonant(site, n_max), state, t, decoherence)
    target = StateVector(space, (StateVector.basis(space, (0, 0)).amplitudes
                                 + StateVector.basis(space, (0, 1)).amplitudes) / math.sqrt(2))
    return state, _state_fidelity(target, state)


def _photonic_input(space: TensorSpace, alpha: complex, beta: complex) -> StateVector:
    amps = np.zeros(space.total_dim, dtype=complex)
    amps[space.index((0, 0))] = alpha
    amps[space.index((0, 1))] = beta
    return StateVector(space, amps).normalize()


def simulate_transfer(site: InnerQubitSpec, res: ResonatorSpec, alpha: complex = 1.0,
                      beta: complex = 0.0, n_max: int = 3):
    """Resonant swap for pi / (2 g_i): (a|0> + b|1>)|g> -> (a|g> - i b|e>)|0>."""
    space = _site_space(n_max)
    psi = _photonic_input(space, alpha, beta)
    out = evolve(_jc_resonant(site, n_max), psi, math.pi / (2 * site.coupling))
    a, b = psi.amplitudes[space.index((0, 0))], psi.amplitudes[space.index((0, 1))]
    target = np.zeros(space.total_dim, dtype=complex)
    target[space.index((0, 0))] = a
    target[space.index((1, 0))] = -1j * b
    return out, _state_fidelity(StateVector(space, target), out)


def measurement_probabilities(site: InnerQubitSpec, res: ResonatorSpec, alpha: complex,
                              beta: complex, gamma: float, n_max: int = 3):
    """Outcome probabilities and the pre-readout site state of the B(gamma) sequence."""
    state, _ = simulate_transfer(site, res, alpha, beta, n_max)
    state = _apply_qubit_op(qubit_rotation("z", math.pi / 2), state, n_max)
    state = _apply_qubit_op(u_gamma(gamma), state, n_max)
    amps = state.amplitudes.reshape(2, n_max + 1)
    p0 = float(np.sum(np.abs(amps[0]) ** 2))
    p1 = float(np.sum(np.abs(amps[1]) ** 2))
    return (p0, p1), state


def full_measurement_sequence(site: InnerQubitSpec, res: ResonatorSpec,
                              photonic_state: Sequence[complex], gamma: float,
                              rng: np.random.Generator, n_max: int = 3):
    """Transfer, R_z(pi/2), U_gamma, then an ideal projective readout of the inner qubit.

    Outcome 0 (qubit in |g>) corresponds to the |+gamma> projection and 1 to
    |-gamma>.  Returns ``(outcome, post_measurement_state)``.
    """
    alpha, beta = photonic_state
    (p0, p1), state = measurement_probabilities(site, res, alpha, beta, gamma, n_max)
    outcome = 0 if rng.random() < p0 / (p0 + p1) else 1
    amps = state.amplitudes.reshape(2, n_max + 1).copy()
    amps[1 - outcome] = 0
    return outcome, StateVector(state.space, amps.reshape(-1)).normalize()
