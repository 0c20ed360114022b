import json
import math

import pytest
from hypothesis import given, strategies as st

from mimcool import presets
from mimcool.errors import ConfigError
from mimcool.params import CONSTANTS, SystemConfig, derive, lamb_dicke, thermal_occupancy

WM = 2 * math.pi * 1e5


def test_cavity_frequency_by_hand(section5):
    # pi c / (2 L) with L = 6.7 cm
    assert derive(section5).omega0 == pytest.approx(7.029e9, rel=1e-3)


def test_mechanical_damping_from_q(section5):
    assert derive(section5).gamma == pytest.approx(5.236e-2, rel=1e-3)


def test_drive_amplitude_by_hand(section5):
    # sqrt(2 P kappa / hbar w_l) with P = 50 uW, kappa = 0.047 w_m, 1064 nm
    assert derive(section5).E == pytest.approx(3.98e9, rel=2e-3)


def test_thermal_occupancy_zero_temperature():
    assert thermal_occupancy(WM, 0.0) == 0.0
    assert thermal_occupancy(1e3, 0.0) == 0.0


def test_thermal_occupancy_cantilever_bath():
    assert thermal_occupancy(WM, 0.4) == pytest.approx(83306, rel=1e-3)


def test_thermal_occupancy_doubles_with_temperature():
    # high-temperature limit n ~ k_B T / hbar w - 1/2
    ratio = thermal_occupancy(WM, 0.8) / thermal_occupancy(WM, 0.4)
    assert ratio == pytest.approx(2.0, rel=1e-4)


@given(st.floats(1e3, 1e9), st.floats(1e-6, 1e3))
def test_thermal_occupancy_matches_bose_einstein(w, T):
    x = CONSTANTS.hbar * w / (CONSTANTS.k_B * T)
    expected = 1.0 / (math.exp(x) - 1.0) if x < 700 else 0.0
    got = thermal_occupancy(w, T)
    assert got >= 0
    if x > 1e-6:  # away from the cancellation regime of the naive form
        assert got == pytest.approx(expected, rel=1e-9, abs=1e-300)


def test_thermal_occupancy_small_argument_is_stable():
    # x ~ 1e-12: naive exp(x) - 1 loses every digit, expm1 does not
    T = CONSTANTS.hbar * WM / (CONSTANTS.k_B * 1e-12)
    assert thermal_occupancy(WM, T) == pytest.approx(1e12 - 0.5, rel=1e-9)


def test_lamb_dicke_by_hand():
    zpf = math.sqrt(CONSTANTS.hbar / (2 * 50e-15 * WM))
    assert lamb_dicke(1064e-9, 50e-15, WM) == pytest.approx(4 * math.pi / 1064e-9 * zpf)


def test_ldp_override_and_scale_apply_to_coupling(section5):
    base = derive(section5)
    scaled = derive(section5.replace(ldp_scale=0.5))
    assert scaled.eta0 == pytest.approx(0.5 * base.eta0)
    assert scaled.g == pytest.approx(0.5 * base.g)
    assert base.eta0 == presets.SECTION5_ETA0
    assert base.g == pytest.approx(CONSTANTS.c_light / (2 * section5.cavity_length) * base.eta0)


def test_ldp_without_override_uses_zero_point_motion(section5):
    cfg = section5.replace(ldp_override=None)
    assert derive(cfg).eta0 == pytest.approx(lamb_dicke(1064e-9, 50e-15, WM))


def test_derive_is_deterministic(section5):
    assert derive(section5) == derive(section5)


@pytest.mark.parametrize("field,value", [
    ("cavity_length", -1.0),
    ("wavelength", 0.0),
    ("motional_mass", float("nan")),
    ("mech_freq", float("inf")),
    ("reflectivity", 1.0),
    ("reflectivity", -0.1),
    ("input_power", -1e-6),
    ("bath_temperature", -0.1),
    ("cavity_thermal", -1.0),
    ("ldp_scale", 0.0),
    ("ldp_override", -1e-5),
    ("quality_factor", "many"),
])
def test_config_rejects_bad_field_by_name(section5, field, value):
    with pytest.raises(ConfigError) as info:
        section5.replace(**{field: value})
    assert info.value.field == field


def test_config_requires_exactly_one_damping_spec(section5):
    with pytest.raises(ConfigError) as info:
        section5.replace(mech_damping=0.1)
    assert info.value.field == "quality_factor"
    with pytest.raises(ConfigError):
        section5.replace(quality_factor=None)


def test_config_requires_exactly_one_cavity_decay_spec(section5):
    with pytest.raises(ConfigError) as info:
        section5.replace(cavity_decay=1e4)
    assert info.value.field == "cavity_decay"


def test_kappa_and_gamma_from_alternatives(section5):
    cfg = section5.replace(kappa_over_wm=None, cavity_decay=123.0,
                           quality_factor=None, mech_damping=0.5)
    assert cfg.kappa == 123.0
    assert cfg.gamma == 0.5


def test_json_roundtrip(section5, tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(section5.to_dict()))
    assert SystemConfig.from_json(path) == section5
    assert SystemConfig.from_json(json.dumps(section5.to_dict())) == section5


def test_json_unknown_and_missing_fields(section5):
    data = section5.to_dict()
    with pytest.raises(ConfigError) as info:
        SystemConfig.from_dict({**data, "colour": 3})
    assert info.value.field == "colour"
    data.pop("wavelength")
    with pytest.raises(ConfigError) as info:
        SystemConfig.from_dict(data)
    assert info.value.field == "wavelength"


def test_json_malformed():
    with pytest.raises(ConfigError):
        SystemConfig.from_json("{not json")
    with pytest.raises(ConfigError):
        SystemConfig.from_json("[1, 2]")
