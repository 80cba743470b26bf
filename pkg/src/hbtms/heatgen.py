"""Battery heat source and field-test correction utilities."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .materials import DomainError

KELVIN = 273.15


@dataclass(frozen=True)
class BatterySpec:
    """One cylindrical cell. ``internal_resistance`` has no catalog value
    and is a required input; ``entropy_coefficient`` is dE/dT in V/K."""

    internal_resistance: float
    entropy_coefficient: float = 0.0
    rho_b: float = 2500.0
    c_b: float = 1108.0
    k_b: float = 28.0
    capacity: float = 2.6  # A h
    rated_voltage: float = 3.65
    cell_height: float = 0.068
    cell_diameter: float = 0.018

    def __post_init__(self):
        for name in ("internal_resistance", "rho_b", "c_b", "k_b", "capacity",
                     "rated_voltage", "cell_height", "cell_diameter"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"BatterySpec.{name} must be positive, got {value!r}")
        if not math.isfinite(self.entropy_coefficient):
            raise DomainError("entropy_coefficient must be finite")

    @property
    def volume(self) -> float:
        return math.pi * (0.5 * self.cell_diameter) ** 2 * self.cell_height

    @property
    def heat_capacity(self) -> float:
        """J/K of one cell."""
        return self.rho_b * self.c_b * self.volume


@dataclass(frozen=True)
class DischargeSpec:
    c_rate: float
    duration: float  # s
    initial_T: float = 25.0

    def __post_init__(self):
        if not (math.isfinite(self.c_rate) and self.c_rate >= 0):
            raise DomainError(f"c_rate must be >= 0, got {self.c_rate!r}")
        if not (math.isfinite(self.duration) and self.duration >= 0):
            raise DomainError(f"duration must be >= 0, got {self.duration!r}")


@dataclass(frozen=True)
class HeatRate:
    """Volumetric heat generation, W/m3, split into its two sources."""

    irreversible: float
    reversible: float

    @property
    def total(self) -> float:
        return self.irreversible + self.reversible


def cell_current(c_rate: float, capacity: float) -> float:
    if c_rate < 0:
        raise DomainError("c_rate must be >= 0")
    return c_rate * capacity


def heat_generation(I: float, T: float, spec: BatterySpec) -> HeatRate:
    """Joule plus entropic heat per unit cell volume. ``T`` is absolute (K)."""
    if I < 0:
        raise DomainError("current must be >= 0 (discharge)")
    if not T > 0:
        raise DomainError(f"temperature must be absolute and positive, got {T!r}")
    V = spec.volume
    return HeatRate(
        irreversible=I * I * spec.internal_resistance / V,
        reversible=-I * T * spec.entropy_coefficient / V,
    )


def speed_to_c_rate(v: float, v_rated: float, alpha: float) -> float:
    """Discharge rate implied by a steady vehicle speed (km/h)."""
    if v < 0 or v_rated <= 0 or not (0 < alpha <= 1):
        raise DomainError("need v >= 0, v_rated > 0 and 0 < alpha <= 1")
    return v / (alpha * v_rated)


def corrected_temperature(T_measured: float, eta: float = 0.8) -> float:
    if not (0 < eta <= 1):
        raise DomainError(f"thermal efficiency must lie in (0, 1], got {eta!r}")
    return T_measured / eta


def calibrate_resistance(target_rise: float, c_rate: float, duration: float, spec: BatterySpec) -> float:
    """Internal resistance giving an adiabatic lumped-cell temperature rise
    of ``target_rise`` kelvin over ``duration`` seconds at ``c_rate``.

    The entropic term is assumed zero, which makes the adiabatic rise exactly
    I^2 R t / (rho c V).
    """
    I = cell_current(c_rate, spec.capacity)
    if I == 0 or duration <= 0:
        raise DomainError("calibration needs a non-zero current and duration")
    if target_rise <= 0:
        raise DomainError("target rise must be positive")
    return target_rise * spec.heat_capacity / (I * I * duration)
