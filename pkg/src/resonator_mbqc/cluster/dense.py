"""Dense N-qubit registers for lattice cluster states (N <= 20)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..device import LatticeSpec, Site
from .schedule import FusionSchedule, fusion_schedule

MAX_DENSE_QUBITS = 20


class CapacityError(ValueError):
    """Register too large for the dense representation; use the graph backend."""


@dataclass
class DenseRegister:
    """Amplitudes over ``sites`` (first site is the most significant bit)."""

    sites: list[Site]
    amplitudes: np.ndarray

    def __post_init__(self):
        n = len(self.sites)
        if n > MAX_DENSE_QUBITS:
            raise CapacityError(
                f"{n} qubits exceeds the dense capacity of {MAX_DENSE_QUBITS}; use the graph backend"
            )
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(2 ** n)

    @property
    def qubit_count(self) -> int:
        return len(self.sites)

    @property
    def site_map(self) -> dict[Site, int]:
        return {s: i for i, s in enumerate(self.sites)}

    def index_of(self, site: Site) -> int:
        try:
            return self.sites.index(tuple(site))
        except ValueError:
            raise KeyError(f"site {site} not in register") from None

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.qubit_count)

    def copy(self) -> "DenseRegister":
        return DenseRegister(list(self.sites), self.amplitudes.copy())

    def apply_cz(self, a: Site, b: Site) -> None:
        i, j = self.index_of(a), self.index_of(b)
        t = self.tensor()
        sl = [slice(None)] * self.qubit_count
        sl[i] = 1
        sl[j] = 1
        t[tuple(sl)] *= -1

    def apply_single(self, u: np.ndarray, site: Site) -> None:
        q = self.index_of(site)
        t = np.tensordot(np.asarray(u, dtype=complex), self.tensor(), axes=([1], [q]))
        self.amplitudes = np.moveaxis(t, 0, q).reshape(-1)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def plus_register(sites: Sequence[Site], inputs: Mapping[Site, Sequence[complex]] | None = None) -> DenseRegister:
    """Product of |+> on every site, with ``inputs`` overriding individual factors."""
    inputs = {tuple(k): v for k, v in (inputs or {}).items()}
    if len(sites) > MAX_DENSE_QUBITS:
        raise CapacityError(
            f"{len(sites)} qubits exceeds the dense capacity of {MAX_DENSE_QUBITS}; use the graph backend"
        )
    v = np.array([1.0 + 0j])
    plus = np.array([1, 1], dtype=complex) / math.sqrt(2)
    for s in sites:
        f = np.asarray(inputs.get(tuple(s), plus), dtype=complex)
        v = np.kron(v, f / np.linalg.norm(f))
    return DenseRegister(list(sites), v)


def build_cluster_dense(lattice: LatticeSpec, schedule: FusionSchedule | None = None,
                        inputs: Mapping[Site, Sequence[complex]] | None = None) -> DenseRegister:
    """|+>^N followed by an ideal CZ on every scheduled edge."""
    reg = plus_register(lattice.sites, inputs)
    for edge_round in (schedule or fusion_schedule(lattice)).rounds:
        for a, b in edge_round:
            reg.apply_cz(a, b)
    return reg


def b_gamma_bra(gamma: float, outcome: int) -> np.ndarray:
    """<+gamma| for outcome 0, <-gamma| for outcome 1."""
    sign = 1 if outcome == 0 else -1
    return np.array([1, sign * np.exp(-1j * gamma)], dtype=complex) / math.sqrt(2)


def project_out(reg: DenseRegister, site: Site, bra: np.ndarray) -> tuple[float, DenseRegister]:
    """Contract ``site`` with ``bra``; returns (probability, renormalized remainder)."""
    q = reg.index_of(site)
    rest = np.tensordot(bra, reg.tensor(), axes=([0], [q])).reshape(-1)
    p = float(np.vdot(rest, rest).real)
    sites = [s for s in reg.sites if s != tuple(site)]
    amps = rest / math.sqrt(p) if p > 0 else rest
    return p, DenseRegister(sites, amps)


def b_gamma_probabilities(reg: DenseRegister, site: Site, gamma: float) -> tuple[float, float]:
    p0, _ = project_out(reg, site, b_gamma_bra(gamma, 0))
    p1, _ = project_out(reg, site, b_gamma_bra(gamma, 1))
    total = p0 + p1
    return p0 / total, p1 / total


def measure_b_gamma(reg: DenseRegister, site: Site, gamma: float,
                    rng: np.random.Generator) -> tuple[int, DenseRegister]:
    """Measure ``site`` in {|+gamma>, |-gamma>}; the measured qubit is removed."""
    p0, collapsed0 = project_out(reg, site, b_gamma_bra(gamma, 0))
    p1, collapsed1 = project_out(reg, site, b_gamma_bra(gamma, 1))
    outcome = 0 if rng.random() < p0 / (p0 + p1) else 1
    return outcome, (collapsed0 if outcome == 0 else collapsed1)


def apply_pauli_string(reg: DenseRegister, xs: Sequence[Site], zs: Sequence[Site]) -> np.ndarray:
    """Amplitudes of (prod X_xs)(prod Z_zs)|psi> without modifying ``reg``."""
    t = reg.tensor().copy()
    n = reg.qubit_count
    for s in zs:
        sl = [slice(None)] * n
        sl[reg.index_of(s)] = 1
        t[tuple(sl)] *= -1
    for s in xs:
        t = np.flip(t, axis=reg.index_of(s))
    return t.reshape(-1)


def verify_stabilizers(reg: DenseRegister, lattice: LatticeSpec) -> dict[Site, float]:
    """<K_a> = <X_a prod_b Z_b> for every site present in the register."""
    present = set(reg.sites)
    out = {}
    for a in reg.sites:
        nbrs = [b for b in lattice.neighbours(a) if b in present]
        v = apply_pauli_string(reg, [a], nbrs)
        out[a] = float(np.vdot(reg.amplitudes, v).real)
    return out
