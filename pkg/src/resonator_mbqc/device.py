"""Resonator lattice, mediator/inner qubit parameters and dispersive quantities.

Frequencies are stored as angular frequencies (rad/s); device files and
reports use f = omega / 2 pi in GHz or MHz.  Sites are d-tuples of 1-based
coordinates.
"""

from __future__ import annotations

import copy
import itertools
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Any, Iterator, Mapping

TWO_PI = 2 * math.pi
DISPERSIVE_RATIO_LIMIT = 0.2

Site = tuple[int, ...]
JunctionId = tuple[Site, Site]


def ghz(f: float) -> float:
    """Angular frequency for f in GHz."""
    return TWO_PI * f * 1e9


def mhz(f: float) -> float:
    return TWO_PI * f * 1e6


def to_ghz(omega: float) -> float:
    return omega / TWO_PI / 1e9


def to_mhz(omega: float) -> float:
    return omega / TWO_PI / 1e6


class DeviceError(ValueError):
    pass


class InvalidFrequencyError(DeviceError):
    pass


class ResonantConfigurationError(DeviceError, ZeroDivisionError):
    """Mediator frequency equals a neighbouring resonator: dispersive formulas diverge."""


class DispersiveValidityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ResonatorSpec:
    site_id: Site
    frequency: float
    photon_lifetime: float

    def __post_init__(self):
        if self.frequency <= 0:
            raise InvalidFrequencyError(f"resonator {self.site_id}: frequency must be > 0")
        if self.photon_lifetime <= 0:
            raise DeviceError(f"resonator {self.site_id}: photon lifetime must be > 0")


@dataclass(frozen=True)
class JunctionSpec:
    """Mediator qubit between two adjacent resonators.

    ``junction_id[0]`` is the endpoint in the ``w`` frequency class and
    ``g_left`` its coupling; ``junction_id[1]`` / ``g_right`` the ``w'`` side.
    """

    junction_id: JunctionId
    epsilon: float
    g_left: float
    g_right: float
    coherence_time: float

    def __post_init__(self):
        a, b = self.junction_id
        if not are_adjacent(a, b):
            raise DeviceError(f"junction {self.junction_id}: sites are not nearest neighbours")
        if self.coherence_time <= 0:
            raise DeviceError(f"junction {self.junction_id}: coherence time must be > 0")


@dataclass(frozen=True)
class InnerQubitSpec:
    site_id: Site
    epsilon_range: tuple[float, float]
    coupling: float
    coherence_time: float

    def __post_init__(self):
        if self.coupling <= 0:
            raise DeviceError(f"inner qubit {self.site_id}: coupling must be > 0")


@dataclass(frozen=True)
class DeviceDefaults:
    """Lattice-wide parameters, SI units (angular frequencies, seconds)."""

    epsilon: float = ghz(8.6)
    g: float = mhz(200)
    g_inner: float | None = None
    tau_cha: float = 1e-6
    tau_pho: float = 5e-6
    tau_inner: float = 1e-6
    inner_detuning: float = ghz(1.0)
    omega: float = mhz(4)
    kappa_low: float = mhz(20)

    @property
    def inner_coupling(self) -> float:
        return self.g if self.g_inner is None else self.g_inner


def are_adjacent(a: Site, b: Site) -> bool:
    if len(a) != len(b):
        return False
    diffs = [abs(x - y) for x, y in zip(a, b)]
    return sum(diffs) == 1


def in_primary_class(site: Site) -> bool:
    """True when the site takes frequency ``w`` (coordinate sum minus d even)."""
    return (sum(site) - len(site)) % 2 == 0


@dataclass(frozen=True)
class LatticeSpec:
    dimension: int
    extents: tuple[int, ...]
    resonators: Mapping[Site, ResonatorSpec]
    junctions: Mapping[JunctionId, JunctionSpec]
    inner_qubits: Mapping[Site, InnerQubitSpec]
    defaults: DeviceDefaults = field(default_factory=DeviceDefaults)

    @property
    def sites(self) -> list[Site]:
        return sorted(self.resonators)

    @property
    def n_sites(self) -> int:
        return len(self.resonators)

    def edges(self) -> list[tuple[Site, Site]]:
        """Nearest-neighbour pairs in coordinate order (lower site first)."""
        return sorted(tuple(sorted(j)) for j in self.junctions)

    def junction(self, a: Site, b: Site) -> JunctionSpec:
        for key in ((a, b), (b, a)):
            if key in self.junctions:
                return self.junctions[key]
        raise KeyError(f"no junction between {a} and {b}")

    def endpoints(self, j: JunctionSpec) -> tuple[ResonatorSpec, ResonatorSpec]:
        a, b = j.junction_id
        return self.resonators[a], self.resonators[b]

    def neighbours(self, site: Site) -> list[Site]:
        out = []
        for k in range(self.dimension):
            for step in (-1, 1):
                nb = site[:k] + (site[k] + step,) + site[k + 1:]
                if nb in self.resonators:
                    out.append(nb)
        return sorted(out)

    def with_junction(self, j: JunctionSpec) -> "LatticeSpec":
        junctions = dict(self.junctions)
        junctions[j.junction_id] = j
        return replace(self, junctions=junctions)

    def with_resonator(self, r: ResonatorSpec) -> "LatticeSpec":
        resonators = dict(self.resonators)
        resonators[r.site_id] = r
        return replace(self, resonators=resonators)


def _grid(extents: tuple[int, ...]) -> Iterator[Site]:
    return itertools.product(*(range(1, n + 1) for n in extents))


def build_lattice(d: int, extents, w: float, w_prime: float,
                  defaults: DeviceDefaults | None = None) -> LatticeSpec:
    """Checkerboard lattice with one mediator junction per nearest-neighbour pair."""
    extents = tuple(int(e) for e in (extents if hasattr(extents, "__iter__") else (extents,)))
    if d < 1 or len(extents) != d:
        raise DeviceError(f"need d >= 1 and {d} extents, got {extents}")
    if any(e < 1 for e in extents):
        raise DeviceError(f"extents must be >= 1, got {extents}")
    if w == w_prime:
        raise InvalidFrequencyError("adjacent resonators must differ in frequency (w == w')")
    defaults = defaults or DeviceDefaults()
    resonators = {}
    inner = {}
    for site in _grid(extents):
        f = w if in_primary_class(site) else w_prime
        resonators[site] = ResonatorSpec(site, f, defaults.tau_pho)
        inner[site] = InnerQubitSpec(
            site, (f, f + defaults.inner_detuning), defaults.inner_coupling, defaults.tau_inner
        )
    junctions = {}
    for site in resonators:
        for k in range(d):
            nb = site[:k] + (site[k] + 1,) + site[k + 1:]
            if nb not in resonators:
                continue
            key = (site, nb) if in_primary_class(site) else (nb, site)
            junctions[key] = JunctionSpec(key, defaults.epsilon, defaults.g, defaults.g, defaults.tau_cha)
    return LatticeSpec(d, extents, resonators, junctions, inner, defaults)


# ----------------------------------------------------------- dispersive formulas

def _detunings(j: JunctionSpec, left: ResonatorSpec, right: ResonatorSpec) -> tuple[float, float]:
    dl = j.epsilon - left.frequency
    dr = j.epsilon - right.frequency
    if dl == 0 or dr == 0:
        raise ResonantConfigurationError(
            f"junction {j.junction_id}: mediator resonant with a neighbour; dispersive formula invalid"
        )
    return dl, dr


def check_dispersive(j: JunctionSpec, left: ResonatorSpec, right: ResonatorSpec) -> float:
    """Return the largest g/|detuning| ratio, warning when it exceeds 0.2."""
    dl, dr = _detunings(j, left, right)
    ratio = max(abs(j.g_left / dl), abs(j.g_right / dr))
    if ratio > DISPERSIVE_RATIO_LIMIT:
        warnings.warn(
            f"junction {j.junction_id}: g/detuning = {ratio:.3f} > {DISPERSIVE_RATIO_LIMIT}",
            DispersiveValidityWarning, stacklevel=3,
        )
    return ratio


def stark_shifted_frequency(j: JunctionSpec, left: ResonatorSpec, right: ResonatorSpec,
                            n: int, n_prime: int) -> float:
    """Mediator transition frequency with n photons left and n' photons right."""
    check_dispersive(j, left, right)
    dl, dr = _detunings(j, left, right)
    return j.epsilon + j.g_left ** 2 / dl * (2 * n + 1) + j.g_right ** 2 / dr * (2 * n_prime + 1)


def selectivity_gap(j: JunctionSpec, left: ResonatorSpec, right: ResonatorSpec) -> float:
    target = stark_shifted_frequency(j, left, right, 1, 1)
    return min(
        abs(target - stark_shifted_frequency(j, left, right, n, m))
        for n, m in ((0, 0), (0, 1), (1, 0))
    )


def hopping_rate(j: JunctionSpec, left: ResonatorSpec, right: ResonatorSpec,
                 model: str = "one-sided") -> float:
    """Effective photon hopping rate across a junction.

    ``model="one-sided"`` is g^2/|eps - w| on the ``w`` side; ``"symmetric"`` is
    the two-sided virtual exchange (g_l g_r / 2)(1/|eps - w| + 1/|eps - w'|).
    """
    dl, dr = _detunings(j, left, right)
    if model == "one-sided":
        return j.g_left ** 2 / abs(dl)
    if model == "symmetric":
        return abs(j.g_left * j.g_right) / 2 * (1 / abs(dl) + 1 / abs(dr))
    raise ValueError(f"unknown hopping model {model!r}")


# ----------------------------------------------------------------- device-v1

SCHEMA_VERSION = "device-v1"

DEVICE_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["dimension", "extents", "w_GHz", "w_prime_GHz"],
    "additionalProperties": False,
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "dimension": {"type": "integer", "minimum": 1},
        "extents": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "w_GHz": {"type": "number", "exclusiveMinimum": 0},
        "w_prime_GHz": {"type": "number", "exclusiveMinimum": 0},
        "defaults": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "epsilon_GHz": {"type": "number", "exclusiveMinimum": 0},
                "g_MHz": {"type": "number", "exclusiveMinimum": 0},
                "g_inner_MHz": {"type": "number", "exclusiveMinimum": 0},
                "tau_cha_us": {"type": "number", "exclusiveMinimum": 0},
                "tau_pho_us": {"type": "number", "exclusiveMinimum": 0},
                "tau_inner_us": {"type": "number", "exclusiveMinimum": 0},
                "inner_detuning_GHz": {"type": "number"},
                "omega_MHz": {"type": "number", "minimum": 0},
                "kappa_low_MHz": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "overrides": {
            "type": "array",
            "items": {
                "oneOf": [
                    {
                        "type": "object",
                        "required": ["junction"],
                        "additionalProperties": False,
                        "properties": {
                            "junction": {
                                "type": "array", "minItems": 2, "maxItems": 2,
                                "items": {"type": "array", "items": {"type": "integer"}},
                            },
                            "epsilon_GHz": {"type": "number", "exclusiveMinimum": 0},
                            "g_left_MHz": {"type": "number", "minimum": 0},
                            "g_right_MHz": {"type": "number", "minimum": 0},
                            "tau_cha_us": {"type": "number", "exclusiveMinimum": 0},
                        },
                    },
                    {
                        "type": "object",
                        "required": ["site"],
                        "additionalProperties": False,
                        "properties": {
                            "site": {"type": "array", "items": {"type": "integer"}},
                            "frequency_GHz": {"type": "number", "exclusiveMinimum": 0},
                            "tau_pho_us": {"type": "number", "exclusiveMinimum": 0},
                            "g_inner_MHz": {"type": "number", "exclusiveMinimum": 0},
                        },
                    },
                ]
            },
        },
    },
}


class DeviceFileError(DeviceError):
    """Malformed device document; message carries line or field location."""


_DEFAULT_FIELDS = {
    "epsilon_GHz": ("epsilon", ghz),
    "g_MHz": ("g", mhz),
    "g_inner_MHz": ("g_inner", mhz),
    "tau_cha_us": ("tau_cha", lambda x: x * 1e-6),
    "tau_pho_us": ("tau_pho", lambda x: x * 1e-6),
    "tau_inner_us": ("tau_inner", lambda x: x * 1e-6),
    "inner_detuning_GHz": ("inner_detuning", ghz),
    "omega_MHz": ("omega", mhz),
    "kappa_low_MHz": ("kappa_low", mhz),
}


def parse_device_text(text: str, source: str = "<device>") -> dict:
    """Parse and schema-check a device-v1 document, returning the raw dict."""
    import jsonschema

    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DeviceFileError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    validator = jsonschema.Draft202012Validator(DEVICE_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for err in errors:
            where = "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)
            lines.append(f"{source}: field {where}: {err.message}")
        raise DeviceFileError("\n".join(lines))
    if len(doc["extents"]) != doc["dimension"]:
        raise DeviceFileError(f"{source}: field $.extents: expected {doc['dimension']} entries")
    return doc


def lattice_from_document(doc: Mapping[str, Any], source: str = "<device>") -> LatticeSpec:
    kwargs = {}
    for key, value in doc.get("defaults", {}).items():
        name, conv = _DEFAULT_FIELDS[key]
        kwargs[name] = conv(value)
    defaults = DeviceDefaults(**kwargs)
    try:
        lattice = build_lattice(doc["dimension"], tuple(doc["extents"]),
                                ghz(doc["w_GHz"]), ghz(doc["w_prime_GHz"]), defaults)
    except DeviceError as exc:
        raise DeviceFileError(f"{source}: {exc}") from None
    for i, ov in enumerate(doc.get("overrides", [])):
        where = f"{source}: field $.overrides[{i}]"
        if "junction" in ov:
            a, b = (tuple(s) for s in ov["junction"])
            try:
                j = lattice.junction(a, b)
            except KeyError:
                raise DeviceFileError(f"{where}: no junction between {a} and {b}") from None
            changes = {}
            if "epsilon_GHz" in ov:
                changes["epsilon"] = ghz(ov["epsilon_GHz"])
            if "g_left_MHz" in ov:
                changes["g_left"] = mhz(ov["g_left_MHz"])
            if "g_right_MHz" in ov:
                changes["g_right"] = mhz(ov["g_right_MHz"])
            if "tau_cha_us" in ov:
                changes["coherence_time"] = ov["tau_cha_us"] * 1e-6
            lattice = lattice.with_junction(replace(j, **changes))
        else:
            site = tuple(ov["site"])
            if site not in lattice.resonators:
                raise DeviceFileError(f"{where}: unknown site {site}")
            r = lattice.resonators[site]
            if "frequency_GHz" in ov:
                r = replace(r, frequency=ghz(ov["frequency_GHz"]))
            if "tau_pho_us" in ov:
                r = replace(r, photon_lifetime=ov["tau_pho_us"] * 1e-6)
            lattice = lattice.with_resonator(r)
            if "g_inner_MHz" in ov:
                inner = dict(lattice.inner_qubits)
                inner[site] = replace(inner[site], coupling=mhz(ov["g_inner_MHz"]))
                lattice = replace(lattice, inner_qubits=inner)
    for a, b in lattice.edges():
        if lattice.resonators[a].frequency == lattice.resonators[b].frequency:
            raise DeviceFileError(f"{source}: adjacent sites {a} and {b} share a frequency")
    return lattice


def load_device(path) -> LatticeSpec:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return lattice_from_document(parse_device_text(text, str(path)), str(path))


SWEEPABLE_TOP_LEVEL = ("w_GHz", "w_prime_GHz")


def set_document_value(doc: Mapping[str, Any], path: str, value: float) -> dict:
    """Copy of ``doc`` with ``path`` set; paths are ``w_GHz``, ``w_prime_GHz`` or ``defaults.<field>``."""
    out = copy.deepcopy(dict(doc))
    parts = path.split(".")
    if len(parts) == 1 and parts[0] in SWEEPABLE_TOP_LEVEL:
        out[parts[0]] = value
    elif len(parts) == 2 and parts[0] == "defaults" and parts[1] in _DEFAULT_FIELDS:
        out.setdefault("defaults", {})[parts[1]] = value
    else:
        raise KeyError(path)
    return out


def perturb_junction(j: JunctionSpec, left: ResonatorSpec, right: ResonatorSpec,
                     rng, relative: float = 0.02) -> tuple[JunctionSpec, ResonatorSpec, ResonatorSpec]:
    """Scale epsilon, both couplings and both resonator frequencies by independent uniform factors in 1 +- relative."""
    f = 1 + rng.uniform(-relative, relative, size=5)
    return (
        replace(j, epsilon=j.epsilon * f[0], g_left=j.g_left * f[1], g_right=j.g_right * f[2]),
        replace(left, frequency=left.frequency * f[3]),
        replace(right, frequency=right.frequency * f[4]),
    )
