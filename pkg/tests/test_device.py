import json
import math
import warnings
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resonator_mbqc.device import (
    DeviceDefaults,
    DeviceError,
    DeviceFileError,
    DispersiveValidityWarning,
    InvalidFrequencyError,
    JunctionSpec,
    ResonantConfigurationError,
    build_lattice,
    ghz,
    hopping_rate,
    lattice_from_document,
    mhz,
    parse_device_text,
    selectivity_gap,
    set_document_value,
    stark_shifted_frequency,
    to_mhz,
)

import oracles as o

W, WP = ghz(6.6), ghz(7.0)


class TestLattice:
    def test_1d_checkerboard(self):
        lat = build_lattice(1, (3,), W, WP)
        assert [lat.resonators[(p,)].frequency for p in (1, 2, 3)] == [W, WP, W]

    def test_2x2(self):
        lat = build_lattice(2, (2, 2), W, WP)
        assert lat.resonators[(1, 1)].frequency == W
        assert lat.resonators[(2, 2)].frequency == W
        assert lat.resonators[(1, 2)].frequency == WP
        assert lat.resonators[(2, 1)].frequency == WP
        assert len(lat.junctions) == 4

    def test_3x3_junction_count(self):
        assert len(build_lattice(2, (3, 3), W, WP).junctions) == 12

    def test_equal_frequencies_rejected(self):
        with pytest.raises(InvalidFrequencyError):
            build_lattice(1, (3,), W, W)

    def test_non_adjacent_junction(self):
        with pytest.raises(DeviceError):
            JunctionSpec(((1, 1), (2, 2)), ghz(8.6), mhz(200), mhz(200), 1e-6)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 6), st.integers(1, 6))
    def test_junction_counts(self, n, m):
        assert len(build_lattice(1, (n,), W, WP).junctions) == n - 1
        lat = build_lattice(2, (n, n), W, WP)
        assert len(lat.junctions) == 2 * n * (n - 1)
        assert len(build_lattice(2, (n, m), W, WP).junctions) == n * (m - 1) + m * (n - 1)
        for a, b in lat.edges():
            assert lat.resonators[a].frequency != lat.resonators[b].frequency

    def test_junction_lookup_either_order(self, ref_lattice):
        assert ref_lattice.junction((1, 2), (1, 1)) is ref_lattice.junction((1, 1), (1, 2))

    def test_heterogeneous_override(self, ref_lattice):
        j = ref_lattice.junction((1, 1), (1, 2))
        lat = ref_lattice.with_junction(replace(j, epsilon=ghz(8.7)))
        assert lat.junction((1, 1), (1, 2)).epsilon == ghz(8.7)
        assert lat.junction((2, 2), (1, 2)).epsilon == ghz(8.6)


class TestDispersive:
    def test_stark_values(self, ref_junction):
        j, left, right = ref_junction
        assert to_mhz(stark_shifted_frequency(j, left, right, 1, 1)) == pytest.approx(o.STARK_11_MHZ, rel=1e-9)
        assert to_mhz(stark_shifted_frequency(j, left, right, 0, 0)) == pytest.approx(o.STARK_00_MHZ, rel=1e-9)

    def test_zero_coupling(self, ref_junction):
        j, left, right = ref_junction
        j0 = replace(j, g_left=0.0, g_right=0.0)
        assert stark_shifted_frequency(j0, left, right, 1, 1) == j.epsilon

    def test_affine_slopes(self, ref_junction):
        j, left, right = ref_junction
        f = [stark_shifted_frequency(j, left, right, n, 0) for n in range(5)]
        slope = 2 * j.g_left ** 2 / (j.epsilon - left.frequency)
        assert all(b - a == pytest.approx(slope, rel=1e-9) for a, b in zip(f, f[1:]))
        f = [stark_shifted_frequency(j, left, right, 0, n) for n in range(5)]
        slope = 2 * j.g_right ** 2 / (j.epsilon - right.frequency)
        assert all(b - a == pytest.approx(slope, rel=1e-9) for a, b in zip(f, f[1:]))

    def test_gap(self, ref_junction):
        assert to_mhz(selectivity_gap(*ref_junction)) == pytest.approx(o.GAP_MHZ, rel=1e-9)

    def test_gap_symmetric_and_scaling(self, ref_junction):
        j, left, right = ref_junction
        same = replace(right, frequency=left.frequency)
        gap = selectivity_gap(j, left, same)
        assert gap == pytest.approx(2 * j.g_left ** 2 / (j.epsilon - left.frequency), rel=1e-12)
        doubled = replace(j, g_left=2 * j.g_left, g_right=2 * j.g_right)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DispersiveValidityWarning)
            assert selectivity_gap(doubled, left, right) == pytest.approx(4 * selectivity_gap(j, left, right))

    def test_resonant_error(self, ref_junction):
        j, left, right = ref_junction
        with pytest.raises(ZeroDivisionError):
            stark_shifted_frequency(replace(j, epsilon=left.frequency), left, right, 1, 1)
        with pytest.raises(ResonantConfigurationError):
            hopping_rate(replace(j, epsilon=right.frequency), left, right)

    def test_dispersive_warning(self, ref_junction):
        j, left, right = ref_junction
        with pytest.warns(DispersiveValidityWarning):
            stark_shifted_frequency(replace(j, epsilon=left.frequency + mhz(500)), left, right, 1, 1)

    def test_hopping(self, ref_junction):
        j, left, right = ref_junction
        k = hopping_rate(j, left, right)
        assert to_mhz(k) == pytest.approx(o.HOP_MHZ, rel=1e-9)
        assert abs(left.frequency - right.frequency) / k == pytest.approx(o.RATIO15, rel=1e-9)
        assert hopping_rate(replace(j, g_left=0.0, g_right=0.0), left, right) == 0
        assert to_mhz(hopping_rate(j, left, right, "symmetric")) == pytest.approx(22.5, rel=1e-9)


DOC = {
    "schema": "device-v1",
    "dimension": 2,
    "extents": [3, 3],
    "w_GHz": 6.6,
    "w_prime_GHz": 7.0,
    "defaults": {"epsilon_GHz": 8.6, "g_MHz": 200, "tau_cha_us": 1, "tau_pho_us": 5},
    "overrides": [
        {"junction": [[1, 1], [1, 2]], "epsilon_GHz": 8.65, "g_right_MHz": 190},
        {"site": [2, 2], "frequency_GHz": 6.62, "tau_pho_us": 4.5},
    ],
}


class TestDeviceFile:
    def test_roundtrip(self):
        lat = lattice_from_document(parse_device_text(json.dumps(DOC)))
        j = lat.junction((1, 1), (1, 2))
        assert j.epsilon == pytest.approx(ghz(8.65))
        assert j.g_right == pytest.approx(mhz(190))
        assert j.g_left == pytest.approx(mhz(200))
        assert lat.resonators[(2, 2)].photon_lifetime == pytest.approx(4.5e-6)

    def test_schema_optional(self):
        doc = {k: v for k, v in DOC.items() if k != "schema"}
        parse_device_text(json.dumps(doc))

    def test_truncated_json_has_line(self):
        with pytest.raises(DeviceFileError, match="line"):
            parse_device_text(json.dumps(DOC)[:40])

    def test_bad_field_has_path(self):
        doc = dict(DOC, defaults={"g_MHz": -3})
        with pytest.raises(DeviceFileError, match=r"\$\.defaults\.g_MHz"):
            parse_device_text(json.dumps(doc))

    def test_wrong_schema_version(self):
        with pytest.raises(DeviceFileError, match="schema"):
            parse_device_text(json.dumps(dict(DOC, schema="device-v2")))

    def test_unknown_junction(self):
        doc = dict(DOC, overrides=[{"junction": [[1, 1], [3, 3]]}])
        with pytest.raises(DeviceFileError, match="no junction"):
            lattice_from_document(parse_device_text(json.dumps(doc)))

    def test_override_breaking_checkerboard(self):
        doc = dict(DOC, overrides=[{"site": [1, 2], "frequency_GHz": 6.6}])
        with pytest.raises(DeviceFileError, match="share a frequency"):
            lattice_from_document(parse_device_text(json.dumps(doc)))

    def test_set_document_value(self):
        out = set_document_value(DOC, "defaults.omega_MHz", 2.0)
        assert out["defaults"]["omega_MHz"] == 2.0
        assert "omega_MHz" not in DOC["defaults"]
        assert set_document_value(DOC, "w_GHz", 6.5)["w_GHz"] == 6.5
        with pytest.raises(KeyError):
            set_document_value(DOC, "defaults.nope", 1.0)

    def test_inner_coupling_default(self):
        assert DeviceDefaults().inner_coupling == DeviceDefaults().g
        assert DeviceDefaults(g_inner=mhz(150)).inner_coupling == mhz(150)
        assert math.isclose(build_lattice(1, (2,), W, WP).inner_qubits[(1,)].coupling, mhz(200))
