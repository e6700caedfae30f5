"""Stabilizer-tableau graph states for Clifford-only measurement patterns."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..device import LatticeSpec, Site
from .schedule import fusion_schedule

MAX_TO_DENSE = 16


def _g(x1, z1, x2, z2):
    """Exponent of i picked up when multiplying single-qubit Paulis (x1,z1)*(x2,z2)."""
    x1 = x1.astype(np.int64)
    z1 = z1.astype(np.int64)
    x2 = x2.astype(np.int64)
    z2 = z2.astype(np.int64)
    return np.where(
        (x1 == 1) & (z1 == 1), z2 - x2,
        np.where((x1 == 1) & (z1 == 0), z2 * (2 * x2 - 1),
                 np.where((x1 == 0) & (z1 == 1), x2 * (1 - 2 * z2), 0)),
    )


class Tableau:
    """CHP tableau: rows 0..n-1 destabilizers, rows n..2n-1 stabilizers."""

    def __init__(self, n: int):
        self.n = n
        self.x = np.zeros((2 * n, n), dtype=np.uint8)
        self.z = np.zeros((2 * n, n), dtype=np.uint8)
        self.r = np.zeros(2 * n, dtype=np.uint8)
        self.x[np.arange(n), np.arange(n)] = 1
        self.z[np.arange(n, 2 * n), np.arange(n)] = 1

    def copy(self) -> "Tableau":
        t = Tableau.__new__(Tableau)
        t.n = self.n
        t.x, t.z, t.r = self.x.copy(), self.z.copy(), self.r.copy()
        return t

    # -- Clifford gates
    def h(self, a: int) -> None:
        self.r ^= self.x[:, a] & self.z[:, a]
        self.x[:, a], self.z[:, a] = self.z[:, a].copy(), self.x[:, a].copy()

    def s(self, a: int) -> None:
        self.r ^= self.x[:, a] & self.z[:, a]
        self.z[:, a] ^= self.x[:, a]

    def sdg(self, a: int) -> None:
        for _ in range(3):
            self.s(a)

    def cx(self, a: int, b: int) -> None:
        self.r ^= self.x[:, a] & self.z[:, b] & (self.x[:, b] ^ self.z[:, a] ^ 1)
        self.x[:, b] ^= self.x[:, a]
        self.z[:, a] ^= self.z[:, b]

    def cz(self, a: int, b: int) -> None:
        self.h(b)
        self.cx(a, b)
        self.h(b)

    def pauli(self, xs: Sequence[int] = (), zs: Sequence[int] = ()) -> None:
        """Apply X on ``xs`` and Z on ``zs`` (flips signs of anticommuting rows)."""
        for a in xs:
            self.r ^= self.z[:, a]
        for a in zs:
            self.r ^= self.x[:, a]

    # -- row algebra
    def _rowsum_many(self, targets: np.ndarray, src_x, src_z, src_r) -> None:
        """Replace each target row h by (row h) * (source row), tracking the sign."""
        if targets.size == 0:
            return
        phase = (2 * self.r[targets].astype(np.int64) + 2 * int(src_r)
                 + _g(src_x[None, :], src_z[None, :], self.x[targets], self.z[targets]).sum(axis=1)) % 4
        self.r[targets] = (phase == 2).astype(np.uint8)
        self.x[targets] ^= src_x
        self.z[targets] ^= src_z

    def measure_z(self, a: int, rng: np.random.Generator) -> tuple[int, bool]:
        """Measure Z on qubit ``a``; returns (outcome bit, deterministic)."""
        n = self.n
        stab_x = self.x[n:, a]
        hits = np.nonzero(stab_x)[0]
        if hits.size:
            p = n + int(hits[0])
            px, pz, pr = self.x[p].copy(), self.z[p].copy(), self.r[p]
            others = np.nonzero(self.x[:, a])[0]
            others = others[others != p]
            self._rowsum_many(others, px, pz, pr)
            self.x[p - n], self.z[p - n], self.r[p - n] = px, pz, pr
            outcome = int(rng.integers(2))
            self.x[p] = 0
            self.z[p] = 0
            self.z[p, a] = 1
            self.r[p] = outcome
            return outcome, False
        # deterministic: accumulate stabilizers paired with destabilizers containing X_a
        sx = np.zeros(n, dtype=np.uint8)
        sz = np.zeros(n, dtype=np.uint8)
        sr = 0
        for i in np.nonzero(self.x[:n, a])[0]:
            row = n + int(i)
            phase = (2 * sr + 2 * int(self.r[row])
                     + int(_g(self.x[row], self.z[row], sx, sz).sum())) % 4
            sr = 1 if phase == 2 else 0
            sx ^= self.x[row]
            sz ^= self.z[row]
        return sr, True

    def stabilizers(self) -> list[tuple[int, np.ndarray, np.ndarray]]:
        n = self.n
        return [(int(self.r[n + i]), self.x[n + i].copy(), self.z[n + i].copy()) for i in range(n)]

    def commutation_ok(self) -> bool:
        n = self.n
        xs, zs = self.x[n:].astype(int), self.z[n:].astype(int)
        sym = (xs @ zs.T + zs @ xs.T) % 2
        return not sym.any()

    def to_state_vector(self) -> np.ndarray:
        """Dense amplitudes (qubit 0 most significant), defined up to global phase."""
        n = self.n
        if n > MAX_TO_DENSE:
            raise ValueError(f"refusing to densify {n} > {MAX_TO_DENSE} qubits")
        dim = 2 ** n
        for seed_index in range(dim):
            v = np.zeros(dim, dtype=complex)
            v[seed_index] = 1.0
            for sign, xs, zs in self.stabilizers():
                v = 0.5 * (v + _apply_pauli(v, n, sign, xs, zs))
            nv = np.linalg.norm(v)
            if nv > 1e-6:
                return v / nv
        raise RuntimeError("tableau does not describe a state")


def _apply_pauli(v: np.ndarray, n: int, sign: int, xs: np.ndarray, zs: np.ndarray) -> np.ndarray:
    t = v.reshape((2,) * n).copy()
    coeff = (-1) ** sign
    for q in range(n):
        if zs[q]:
            sl = [slice(None)] * n
            sl[q] = 1
            t[tuple(sl)] *= -1
        if xs[q]:
            t = np.flip(t, axis=q)
        if xs[q] and zs[q]:
            coeff *= 1j  # Y = i X Z
    return coeff * t.reshape(-1)


PAULI_EIGEN = {
    ("X", 0): np.array([1, 1]) / math.sqrt(2),
    ("X", 1): np.array([1, -1]) / math.sqrt(2),
    ("Y", 0): np.array([1, 1j]) / math.sqrt(2),
    ("Y", 1): np.array([1, -1j]) / math.sqrt(2),
    ("Z", 0): np.array([1, 0]),
    ("Z", 1): np.array([0, 1]),
}


@dataclass
class GraphState:
    """Stabilizer state over lattice sites; measured qubits stay in the tableau as product factors."""

    sites: list[Site]
    tableau: Tableau
    measured: dict[Site, tuple[str, int]] = field(default_factory=dict)

    @property
    def qubit_count(self) -> int:
        return len(self.sites)

    def index_of(self, site: Site) -> int:
        try:
            return self.sites.index(tuple(site))
        except ValueError:
            raise KeyError(f"site {site} not in graph state") from None

    def copy(self) -> "GraphState":
        return GraphState(list(self.sites), self.tableau.copy(), dict(self.measured))

    def generators(self) -> list[str]:
        """Stabilizer generators as signed Pauli strings over ``sites`` order."""
        out = []
        for sign, xs, zs in self.tableau.stabilizers():
            letters = "".join("IXZY"[int(x) + 2 * int(z)] for x, z in zip(xs, zs))
            out.append(("-" if sign else "+") + letters)
        return out

    def to_dense(self, drop_measured: bool = True) -> tuple[list[Site], np.ndarray]:
        """Dense amplitudes, with measured qubits contracted against their eigenstates."""
        v = self.tableau.to_state_vector()
        sites = list(self.sites)
        if drop_measured:
            t = v.reshape((2,) * len(sites))
            for site, (basis, outcome) in self.measured.items():
                q = sites.index(site)
                t = np.tensordot(PAULI_EIGEN[(basis, outcome)].conj(), t, axes=([0], [q]))
                sites.pop(q)
            v = t.reshape(-1)
            v = v / np.linalg.norm(v)
        return sites, v


def build_cluster_graph(lattice: LatticeSpec, *, via_gates: bool = False) -> GraphState:
    """Cluster state with stabilizers K_a = X_a prod_{b ~ a} Z_b.

    The tableau is written down directly; ``via_gates=True`` instead applies
    H to every qubit and CZ along the fusion schedule (same state).
    """
    sites = lattice.sites
    n = len(sites)
    idx = {s: i for i, s in enumerate(sites)}
    t = Tableau(n)
    if via_gates:
        for q in range(n):
            t.h(q)
        for edge_round in fusion_schedule(lattice).rounds:
            for a, b in edge_round:
                t.cz(idx[a], idx[b])
        return GraphState(list(sites), t)
    t.x[:] = 0
    t.z[:] = 0
    t.r[:] = 0
    for s, a in idx.items():
        t.z[a, a] = 1  # destabilizer Z_a
        t.x[n + a, a] = 1
        for nb in lattice.neighbours(s):
            t.z[n + a, idx[nb]] = 1
    return GraphState(list(sites), t)


def measure_pauli_graph(gs: GraphState, site: Site, basis: str,
                        rng: np.random.Generator) -> tuple[int, GraphState, bool]:
    """Measure X, Y or Z on ``site``; returns (outcome bit, updated copy, deterministic).

    Outcome 0 is the +1 eigenvalue.
    """
    basis = basis.upper()
    out = gs.copy()
    t = out.tableau
    q = out.index_of(site)
    if basis == "X":
        t.h(q)
        bit, det = t.measure_z(q, rng)
        t.h(q)
    elif basis == "Y":
        # (H S^dag) Y (S H) = Z
        t.sdg(q)
        t.h(q)
        bit, det = t.measure_z(q, rng)
        t.h(q)
        t.s(q)
    elif basis == "Z":
        bit, det = t.measure_z(q, rng)
    else:
        raise ValueError(f"basis must be X, Y or Z, got {basis!r}")
    out.measured[tuple(site)] = (basis, bit)
    return bit, out, det
