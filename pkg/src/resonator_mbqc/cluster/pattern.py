"""Measurement patterns with classical feedforward, executed on dense or graph backends.

A step measures one site in B(gamma) = {|+gamma>, |-gamma>}, where
|+-gamma> = (|0> +- e^{i gamma}|1>)/sqrt(2) and outcome 0 is |+gamma>.
Adaptation: the applied angle is (-1)^{s} gamma when ``flips_sign`` and
s = XOR of the referenced outcomes is 1, plus pi for each set
``pi_shift_of`` parity.  Measuring a chain qubit with outcome s leaves the
next qubit in X^s H P(-gamma)|psi>.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from ..device import LatticeSpec, Site
from .dense import DenseRegister, build_cluster_dense, measure_b_gamma
from .stabilizer import GraphState, build_cluster_graph, measure_pauli_graph

PATTERN_SCHEMA = "pattern-v1"
CLIFFORD_TOL = 1e-9


class PatternError(ValueError):
    pass


class BackendCapabilityError(PatternError):
    """The requested backend cannot execute this pattern (e.g. non-Clifford angle on graph)."""


@dataclass(frozen=True)
class Step:
    site: Site
    gamma: float
    xor_of: tuple[int, ...] = ()
    flips_sign: bool = False
    pi_shift_of: tuple[int, ...] = ()


@dataclass(frozen=True)
class Byproduct:
    """Pauli frame on an output site: X^(xor of x_of) Z^(xor of z_of)."""

    site: Site
    x_of: tuple[int, ...] = ()
    z_of: tuple[int, ...] = ()


@dataclass(frozen=True)
class MeasurementPattern:
    steps: tuple[Step, ...]
    byproducts: tuple[Byproduct, ...] = ()
    inputs: Mapping[Site, tuple[complex, complex]] = field(default_factory=dict)
    expected_output: Mapping[Site, tuple[complex, complex]] = field(default_factory=dict)

    def __post_init__(self):
        seen = set()
        for i, st in enumerate(self.steps):
            for ref in st.xor_of + st.pi_shift_of:
                if not 0 <= ref < i:
                    raise PatternError(f"step {i} depends on step {ref}, which does not precede it")
            if st.site in seen:
                raise PatternError(f"step {i} measures site {st.site} a second time")
            seen.add(st.site)
        for bp in self.byproducts:
            for ref in bp.x_of + bp.z_of:
                if not 0 <= ref < len(self.steps):
                    raise PatternError(f"byproduct on {bp.site} references unknown step {ref}")

    def applied_angle(self, index: int, outcomes: Sequence[int]) -> float:
        st = self.steps[index]
        angle = st.gamma
        if st.flips_sign and _parity(outcomes, st.xor_of):
            angle = -angle
        if _parity(outcomes, st.pi_shift_of):
            angle += math.pi
        return angle


def _parity(outcomes: Sequence[int], refs: Sequence[int]) -> int:
    p = 0
    for r in refs:
        p ^= outcomes[r]
    return p


# ------------------------------------------------------------------- file I/O

def _site(v) -> Site:
    return tuple(int(c) for c in v)


def _complex_pair(v) -> tuple[complex, complex]:
    if len(v) != 2:
        raise PatternError("a qubit state needs two amplitudes")
    out = []
    for amp in v:
        if isinstance(amp, (list, tuple)):
            out.append(complex(amp[0], amp[1]))
        else:
            out.append(complex(amp))
    return tuple(out)


def pattern_from_document(doc: Mapping[str, Any]) -> MeasurementPattern:
    if not isinstance(doc, Mapping):
        raise PatternError("pattern document must be a JSON object")
    if doc.get("schema", PATTERN_SCHEMA) != PATTERN_SCHEMA:
        raise PatternError(f"unsupported schema {doc.get('schema')!r}, expected {PATTERN_SCHEMA!r}")
    try:
        steps = []
        for i, raw in enumerate(doc["steps"]):
            adapt = raw.get("adapt", {}) or {}
            steps.append(Step(
                site=_site(raw["site"]),
                gamma=float(raw["gamma_rad"]),
                xor_of=tuple(int(k) for k in adapt.get("xor_of", ())),
                flips_sign=bool(adapt.get("flips_sign", False)),
                pi_shift_of=tuple(int(k) for k in adapt.get("pi_shift_of", ())),
            ))
        byproducts = tuple(
            Byproduct(_site(b["site"]), tuple(b.get("x_xor_of", ())), tuple(b.get("z_xor_of", ())))
            for b in doc.get("byproducts", ())
        )
        inputs = {_site(e["site"]): _complex_pair(e["state"]) for e in doc.get("inputs", ())}
        expected = {_site(e["site"]): _complex_pair(e["state"]) for e in doc.get("expected_output", ())}
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, PatternError):
            raise
        raise PatternError(f"malformed pattern: {exc!r}") from None
    return MeasurementPattern(tuple(steps), byproducts, inputs, expected)


def _pair_doc(state) -> list:
    return [[float(np.real(a)), float(np.imag(a))] for a in state]


def pattern_to_document(p: MeasurementPattern) -> dict:
    doc: dict[str, Any] = {
        "schema": PATTERN_SCHEMA,
        "steps": [
            {
                "site": list(st.site),
                "gamma_rad": st.gamma,
                "adapt": {"xor_of": list(st.xor_of), "flips_sign": st.flips_sign,
                          **({"pi_shift_of": list(st.pi_shift_of)} if st.pi_shift_of else {})},
            }
            for st in p.steps
        ],
    }
    if p.byproducts:
        doc["byproducts"] = [
            {"site": list(b.site), "x_xor_of": list(b.x_of), "z_xor_of": list(b.z_of)}
            for b in p.byproducts
        ]
    if p.inputs:
        doc["inputs"] = [{"site": list(s), "state": _pair_doc(v)} for s, v in p.inputs.items()]
    if p.expected_output:
        doc["expected_output"] = [{"site": list(s), "state": _pair_doc(v)}
                                  for s, v in p.expected_output.items()]
    return doc


def load_pattern(path) -> MeasurementPattern:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise PatternError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return pattern_from_document(doc)


# ------------------------------------------------------------------ builders

def rx(theta: float) -> np.ndarray:
    return np.array([[math.cos(theta / 2), -1j * math.sin(theta / 2)],
                     [-1j * math.sin(theta / 2), math.cos(theta / 2)]])


def rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-1j * theta / 2), np.exp(1j * theta / 2)])


def euler_unitary(a: float, b: float, c: float) -> np.ndarray:
    """R_x(c) R_z(b) R_x(a)."""
    return rx(c) @ rz(b) @ rx(a)


def rotation_chain_pattern(sites: Sequence[Site], a: float, b: float, c: float,
                           input_state: Sequence[complex] | None = None) -> MeasurementPattern:
    """Five-site chain implementing R_x(c) R_z(b) R_x(a) from ``sites[0]`` to ``sites[4]``.

    Measured angles are (0, -a, -b, -c); the second and third flip sign on
    the preceding outcome, the fourth on s1 xor s3.  The output carries
    X^(s2 xor s4) Z^(s1 xor s3).
    """
    if len(sites) != 5:
        raise PatternError("rotation chain needs exactly five sites")
    s = [tuple(x) for x in sites]
    steps = (
        Step(s[0], 0.0),
        Step(s[1], -a, xor_of=(0,), flips_sign=True),
        Step(s[2], -b, xor_of=(1,), flips_sign=True),
        Step(s[3], -c, xor_of=(0, 2), flips_sign=True),
    )
    byproducts = (Byproduct(s[4], x_of=(1, 3), z_of=(0, 2)),)
    inputs, expected = {}, {}
    if input_state is not None:
        v = np.asarray(input_state, dtype=complex)
        v = v / np.linalg.norm(v)
        inputs = {s[0]: tuple(v)}
        expected = {s[4]: tuple(euler_unitary(a, b, c) @ v)}
    return MeasurementPattern(steps, byproducts, inputs, expected)


# ------------------------------------------------------------------ execution

@dataclass
class PatternResult:
    outcomes: list[int]
    angles: list[float]
    residual: DenseRegister | GraphState
    byproducts: dict[Site, tuple[int, int]]
    deterministic: list[bool] = field(default_factory=list)

    def corrected_output(self) -> tuple[list[Site], np.ndarray]:
        """Dense residual with the tracked Pauli byproducts undone."""
        if isinstance(self.residual, DenseRegister):
            sites, v = list(self.residual.sites), self.residual.amplitudes.copy()
        else:
            sites, v = self.residual.to_dense()
        reg = DenseRegister(sites, v)
        x = np.array([[0, 1], [1, 0]], dtype=complex)
        z = np.diag([1, -1]).astype(complex)
        for site, (bx, bz) in self.byproducts.items():
            if site not in reg.sites:
                continue
            # state is X^bx Z^bz |target>; undo X first
            if bx:
                reg.apply_single(x, site)
            if bz:
                reg.apply_single(z, site)
        return reg.sites, reg.amplitudes


def clifford_basis(angle: float) -> tuple[str, int]:
    """Map a Clifford B(gamma) angle to (Pauli, sign bit): outcome_B = outcome_Pauli xor sign."""
    k = angle / (math.pi / 2)
    kr = round(k)
    if abs(k - kr) > CLIFFORD_TOL:
        raise BackendCapabilityError(
            f"angle {angle:.6g} rad is not a multiple of pi/2; the graph backend is Clifford-only"
        )
    return {0: ("X", 0), 1: ("Y", 0), 2: ("X", 1), 3: ("Y", 1)}[kr % 4]


def run_pattern(lattice: LatticeSpec, pattern: MeasurementPattern,
                inputs: Mapping[Site, Sequence[complex]] | None = None,
                rng: np.random.Generator | None = None, backend: str = "dense",
                *, initial: DenseRegister | GraphState | None = None) -> PatternResult:
    """Build the lattice cluster state, then execute ``pattern`` step by step.

    ``inputs`` (or the pattern's own inputs) replace |+> on the given sites
    before fusion; the graph backend accepts none.  ``initial`` skips the
    construction and starts from a copy of a prepared state.
    """
    rng = rng if rng is not None else np.random.default_rng()
    inputs = dict(inputs if inputs is not None else pattern.inputs)
    outcomes: list[int] = []
    angles: list[float] = []
    deterministic: list[bool] = []
    if backend == "dense":
        state = initial.copy() if initial is not None else build_cluster_dense(lattice, inputs=inputs)
        for i, st in enumerate(pattern.steps):
            angle = pattern.applied_angle(i, outcomes)
            bit, state = measure_b_gamma(state, st.site, angle, rng)
            outcomes.append(bit)
            angles.append(angle)
    elif backend == "graph":
        if inputs:
            raise BackendCapabilityError("the graph backend cannot prepare arbitrary input states")
        for st in pattern.steps:
            clifford_basis(st.gamma)
        state = initial.copy() if initial is not None else build_cluster_graph(lattice)
        for i, st in enumerate(pattern.steps):
            angle = pattern.applied_angle(i, outcomes)
            basis, sign = clifford_basis(angle)
            bit, state, det = measure_pauli_graph(state, st.site, basis, rng)
            outcomes.append(bit ^ sign)
            angles.append(angle)
            deterministic.append(det)
    else:
        raise PatternError(f"unknown backend {backend!r}")
    byproducts = {
        bp.site: (_parity(outcomes, bp.x_of), _parity(outcomes, bp.z_of)) for bp in pattern.byproducts
    }
    return PatternResult(outcomes, angles, state, byproducts, deterministic)
