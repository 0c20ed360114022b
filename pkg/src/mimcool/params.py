"""Physical constants, validated system configuration and derived scalars.

All quantities are SI. Angular frequencies are in rad/s and rates in 1/s.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import ConfigError


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = 1.054571817e-34  # J s
    k_B: float = 1.380649e-23  # J/K
    c_light: float = 2.99792458e8  # m/s


CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class SystemConfig:
    """Physical inputs of the membrane-in-the-middle cavity.

    Exactly one of ``quality_factor`` / ``mech_damping`` and exactly one of
    ``cavity_decay`` / ``kappa_over_wm`` must be given. ``ldp_override``
    replaces the computed Lamb-Dicke parameter; ``ldp_scale`` multiplies
    whichever value is in effect.
    """

    cavity_length: float
    wavelength: float
    motional_mass: float
    mech_freq: float
    reflectivity: float
    input_power: float
    bath_temperature: float
    quality_factor: Optional[float] = None
    mech_damping: Optional[float] = None
    cavity_decay: Optional[float] = None
    kappa_over_wm: Optional[float] = None
    cavity_thermal: float = 0.0
    bare_detuning: float = 0.0
    ldp_override: Optional[float] = None
    ldp_scale: float = 1.0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f.name, f"expected a number, got {value!r}")
            if not math.isfinite(value):
                raise ConfigError(f.name, "must be finite")
        for name in ("cavity_length", "wavelength", "motional_mass", "mech_freq",
                     "ldp_scale"):
            if getattr(self, name) <= 0:
                raise ConfigError(name, "must be > 0")
        if self.input_power < 0:
            raise ConfigError("input_power", "must be >= 0")
        if not 0 <= self.reflectivity < 1:
            raise ConfigError("reflectivity", "must satisfy 0 <= r_c < 1")
        if self.bath_temperature < 0:
            raise ConfigError("bath_temperature", "must be >= 0")
        if self.cavity_thermal < 0:
            raise ConfigError("cavity_thermal", "must be >= 0")
        if (self.quality_factor is None) == (self.mech_damping is None):
            raise ConfigError("quality_factor",
                              "give exactly one of quality_factor, mech_damping")
        for name in ("quality_factor", "mech_damping", "cavity_decay", "kappa_over_wm"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise ConfigError(name, "must be > 0")
        if (self.cavity_decay is None) == (self.kappa_over_wm is None):
            raise ConfigError("cavity_decay",
                              "give exactly one of cavity_decay, kappa_over_wm")
        if self.ldp_override is not None and self.ldp_override < 0:
            raise ConfigError("ldp_override", "must be >= 0")

    @property
    def kappa(self) -> float:
        if self.cavity_decay is not None:
            return float(self.cavity_decay)
        return float(self.kappa_over_wm) * self.mech_freq

    @property
    def gamma(self) -> float:
        if self.mech_damping is not None:
            return float(self.mech_damping)
        return self.mech_freq / self.quality_factor

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {k: v for k, v in dataclasses.asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, data: dict) -> "SystemConfig":
        if not isinstance(data, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(unknown[0], "unknown field")
        missing = [f.name for f in dataclasses.fields(cls)
                   if f.default is dataclasses.MISSING and f.name not in data]
        if missing:
            raise ConfigError(missing[0], "required field missing")
        return cls(**data)

    @classmethod
    def from_json(cls, source) -> "SystemConfig":
        """Build a config from a JSON string or a path to a JSON file."""
        if isinstance(source, Path) or (isinstance(source, str)
                                        and not source.lstrip().startswith(("{", "["))):
            text = Path(source).read_text()
        else:
            text = source
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<root>", f"invalid JSON: {exc}") from None
        return cls.from_dict(data)


@dataclass(frozen=True)
class DerivedParams:
    omega0: float  # bare cavity frequency
    omega_l: float  # laser frequency
    omega_m: float
    kappa: float
    gamma: float
    eta0: float  # Lamb-Dicke parameter actually used (override/scale applied)
    g: float  # real single-photon coupling magnitude
    E: float  # drive amplitude
    nbar: float  # thermal phonon occupancy of the bath
    n_th: float  # thermal photon occupancy of the cavity input

    def with_drive(self, E: float) -> "DerivedParams":
        return dataclasses.replace(self, E=E)


def thermal_occupancy(omega_m: float, T: float, constants: PhysicalConstants = CONSTANTS) -> float:
    """Bose-Einstein occupancy 1/(exp(hbar w / k_B T) - 1); zero at T = 0."""
    if omega_m <= 0:
        raise ConfigError("mech_freq", "must be > 0")
    if T < 0:
        raise ConfigError("bath_temperature", "must be >= 0")
    if T == 0:
        return 0.0
    x = constants.hbar * omega_m / (constants.k_B * T)
    if x > 700:
        # expm1 overflows; e^-x / (1 - e^-x) underflows gracefully instead
        return math.exp(-x)
    return 1.0 / math.expm1(x)


def lamb_dicke(wavelength: float, mass: float, omega_m: float,
               constants: PhysicalConstants = CONSTANTS) -> float:
    return 4 * math.pi / wavelength * math.sqrt(constants.hbar / (2 * mass * omega_m))


def derive(config: SystemConfig, constants: PhysicalConstants = CONSTANTS) -> DerivedParams:
    c = constants.c_light
    hbar = constants.hbar
    omega_l = 2 * math.pi * c / config.wavelength
    kappa = config.kappa
    zpf = math.sqrt(hbar / (2 * config.motional_mass * config.mech_freq))
    if config.ldp_override is not None:
        eta0 = config.ldp_override
    else:
        eta0 = 4 * math.pi / config.wavelength * zpf
    eta0 *= config.ldp_scale
    # g = (c / 2L) * eta0 follows the effective eta0, so overrides and scalings
    # move the coupling too; the phase i is absorbed into b -> -b
    g = c / (2 * config.cavity_length) * eta0
    E = math.sqrt(2 * config.input_power * kappa / (hbar * omega_l))
    return DerivedParams(
        omega0=math.pi * c / (2 * config.cavity_length),
        omega_l=omega_l,
        omega_m=float(config.mech_freq),
        kappa=kappa,
        gamma=config.gamma,
        eta0=eta0,
        g=g,
        E=E,
        nbar=thermal_occupancy(config.mech_freq, config.bath_temperature, constants),
        n_th=float(config.cavity_thermal),
    )
