"""Timing budget, feasibility ratios and maximum lattice size under coherence limits."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass

from .device import LatticeSpec, hopping_rate

DEFAULT_MARGIN = 5.0
_REL_TOL = 1e-12


class ResourceError(ValueError):
    pass


@dataclass(frozen=True)
class TimingBudget:
    """Durations in seconds."""

    t_sin: float
    t_cp: float
    t_mea: float

    def __post_init__(self):
        for name in ("t_sin", "t_cp", "t_mea"):
            if not getattr(self, name) > 0:
                raise ResourceError(f"{name} must be > 0")

    @classmethod
    def from_ns(cls, t_sin: float, t_cp: float, t_mea: float) -> "TimingBudget":
        return cls(t_sin * 1e-9, t_cp * 1e-9, t_mea * 1e-9)

    def rounded(self, resolution: float) -> "TimingBudget":
        """Each duration snapped to the nearest multiple of ``resolution`` seconds."""
        def snap(t):
            return max(resolution, round(t / resolution) * resolution)
        return TimingBudget(snap(self.t_sin), snap(self.t_cp), snap(self.t_mea))


REFERENCE_BUDGET = TimingBudget.from_ns(2.5, 125.0, 8.0)


def derive_budget(lattice: LatticeSpec, omega: float | None = None, kappa_low: float | None = None,
                  *, resolution: float | None = None) -> TimingBudget:
    """t_sin = pi/g over the weakest inner qubit, t_cp = pi/omega, t_mea = 1/kappa_low.

    ``omega`` and ``kappa_low`` fall back to the lattice defaults.
    """
    omega = lattice.defaults.omega if omega is None else omega
    kappa_low = lattice.defaults.kappa_low if kappa_low is None else kappa_low
    if omega <= 0 or kappa_low <= 0:
        raise ResourceError("omega and kappa_low must be > 0")
    if not lattice.inner_qubits:
        raise ResourceError("lattice has no inner qubits")
    g_min = min(q.coupling for q in lattice.inner_qubits.values())
    budget = TimingBudget(math.pi / g_min, math.pi / omega, 1.0 / kappa_low)
    return budget.rounded(resolution) if resolution else budget


def total_time(d: int, n: int, budget: TimingBudget) -> float:
    """2d t_cp + N (4 t_sin + t_mea) + 2 t_sin."""
    if d < 1 or n < 1:
        raise ResourceError("need d >= 1 and N >= 1")
    return 2 * d * budget.t_cp + n * (4 * budget.t_sin + budget.t_mea) + 2 * budget.t_sin


def max_feasible_size(budget: TimingBudget, tau_pho: float, d: int, margin: float = DEFAULT_MARGIN) -> int:
    """Largest N with total_time(d, N) <= tau_pho / margin, or 0."""
    if margin < 1:
        raise ResourceError("margin must be >= 1")
    limit = tau_pho / margin
    fixed = 2 * d * budget.t_cp + 2 * budget.t_sin
    per_qubit = 4 * budget.t_sin + budget.t_mea
    n = math.floor((limit - fixed) / per_qubit * (1 + _REL_TOL))
    return max(n, 0)


@dataclass(frozen=True)
class JunctionMargin:
    junction: str
    ratio15: float
    ratio16: float
    passed: bool


@dataclass(frozen=True)
class FeasibilityReport:
    margin: float
    d: int
    n: int
    total_time: float
    ratio17: float
    junctions: tuple[JunctionMargin, ...]

    @property
    def worst_ratio15(self) -> JunctionMargin:
        return min(self.junctions, key=lambda j: j.ratio15)

    @property
    def worst_ratio16(self) -> JunctionMargin:
        return min(self.junctions, key=lambda j: j.ratio16)

    @property
    def pass15(self) -> bool:
        return all(j.ratio15 >= self.margin for j in self.junctions)

    @property
    def pass16(self) -> bool:
        return all(j.ratio16 >= self.margin for j in self.junctions)

    @property
    def pass17(self) -> bool:
        return self.ratio17 >= self.margin

    @property
    def passed(self) -> bool:
        return self.pass15 and self.pass16 and self.pass17

    def to_dict(self) -> dict:
        out = {
            "margin": self.margin,
            "d": self.d,
            "N": self.n,
            "total_time_ns": self.total_time * 1e9,
            "ratio17": self.ratio17,
            "pass": self.passed,
            "pass15": self.pass15,
            "pass16": self.pass16,
            "pass17": self.pass17,
            "junctions": [asdict(j) for j in self.junctions],
        }
        if self.junctions:
            out["worst"] = {
                "ratio15": asdict(self.worst_ratio15),
                "ratio16": asdict(self.worst_ratio16),
            }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["junction", "ratio15", "ratio16", "pass"])
        for j in self.junctions:
            w.writerow([j.junction, f"{j.ratio15:.9g}", f"{j.ratio16:.9g}", str(j.passed).lower()])
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [
            f"{'junction':<24} {'ratio15':>12} {'ratio16':>12}  pass",
        ]
        for j in self.junctions:
            lines.append(f"{j.junction:<24} {j.ratio15:>12.6g} {j.ratio16:>12.6g}  {'yes' if j.passed else 'NO'}")
        if self.junctions:
            w15, w16 = self.worst_ratio15, self.worst_ratio16
            lines.append(f"worst ratio15: {w15.ratio15:.6g} at {w15.junction}")
            lines.append(f"worst ratio16: {w16.ratio16:.6g} at {w16.junction}")
        lines.append(f"total time (d={self.d}, N={self.n}): {self.total_time * 1e9:.6g} ns")
        lines.append(f"ratio17 (tau_pho,min / total): {self.ratio17:.6g}")
        lines.append(f"margin {self.margin:g}: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def junction_label(junction_id) -> str:
    a, b = junction_id
    return "-".join("(" + ",".join(str(c) for c in s) + ")" for s in (a, b))


def check_feasibility(lattice: LatticeSpec, budget: TimingBudget, d: int | None = None,
                      n: int | None = None, margin: float = DEFAULT_MARGIN,
                      hopping_model: str = "one-sided") -> FeasibilityReport:
    """Per-junction detuning/hopping and coherence/gate-time ratios plus the global photon-lifetime ratio."""
    if margin < 1:
        raise ResourceError("margin must be >= 1")
    d = lattice.dimension if d is None else d
    n = lattice.n_sites if n is None else n
    rows = []
    for key in sorted(lattice.junctions):
        j = lattice.junctions[key]
        left, right = lattice.endpoints(j)
        kappa = hopping_rate(j, left, right, model=hopping_model)
        r15 = math.inf if kappa == 0 else abs(left.frequency - right.frequency) / kappa
        r16 = j.coherence_time / budget.t_cp
        rows.append(JunctionMargin(junction_label(key), r15, r16, r15 >= margin and r16 >= margin))
    t = total_time(d, n, budget)
    tau_pho = min(r.photon_lifetime for r in lattice.resonators.values())
    return FeasibilityReport(margin, d, n, t, tau_pho / t, tuple(rows))
