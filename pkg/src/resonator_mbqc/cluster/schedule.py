from __future__ import annotations

from dataclasses import dataclass

from ..device import LatticeSpec, Site

Edge = tuple[Site, Site]


@dataclass(frozen=True)
class FusionSchedule:
    """Rounds of CZ fusions; edges within one round share no endpoint."""

    rounds: tuple[tuple[Edge, ...], ...]

    @property
    def edges(self) -> list[Edge]:
        return [e for r in self.rounds for e in r]

    def __len__(self) -> int:
        return len(self.rounds)


def fusion_schedule(lattice: LatticeSpec) -> FusionSchedule:
    """Two rounds per lattice axis: pairs starting at odd coordinates, then at even ones.

    Every axis contributes exactly two rounds, so the schedule always has 2d
    rounds; a round may be empty on short axes.
    """
    rounds = []
    sites = lattice.sites
    for axis in range(lattice.dimension):
        for parity in (1, 0):
            edges = []
            for s in sites:
                if s[axis] % 2 != parity:
                    continue
                nb = s[:axis] + (s[axis] + 1,) + s[axis + 1:]
                if nb in lattice.resonators:
                    edges.append((s, nb))
            rounds.append(tuple(edges))
    return FusionSchedule(tuple(rounds))
