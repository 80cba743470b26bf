"""Thermophysical property models.

Coolant catalog, nanofluid mixing rules (volume-weighted density and heat
capacity, Maxwell conductivity), the PCM enthalpy / melt-fraction relations
and the PCM/aluminum-foam effective conductivity.

All properties are constant in temperature. Temperatures are in degC.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    """An argument lies outside the domain of a property model."""


class DegeneracyError(ArithmeticError):
    """A property model hit a non-positive denominator."""


class CatalogError(LookupError):
    pass


def _positive_finite(obj, *names):
    for name in names:
        value = getattr(obj, name)
        if not (math.isfinite(value) and value > 0):
            raise DomainError(f"{type(obj).__name__}.{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class CoolantProps:
    rho: float  # kg/m3
    c: float  # J/(kg K)
    k: float  # W/(m K)
    mu: float  # Pa s

    def __post_init__(self):
        _positive_finite(self, "rho", "c", "k", "mu")


@dataclass(frozen=True)
class NanoparticleProps:
    rho_np: float
    c_np: float
    k_np: float

    def __post_init__(self):
        _positive_finite(self, "rho_np", "c_np", "k_np")


@dataclass(frozen=True)
class NanofluidSpec:
    phi: float
    base: CoolantProps
    particle: NanoparticleProps
    mu: float | None = None  # mixture viscosity; base viscosity when None

    def __post_init__(self):
        if not (0.0 <= self.phi < 1.0):
            raise DomainError(f"nanoparticle volume fraction must lie in [0, 1), got {self.phi!r}")


@dataclass(frozen=True)
class SolidProps:
    rho: float
    c: float
    k: float

    def __post_init__(self):
        _positive_finite(self, "rho", "c", "k")


@dataclass(frozen=True)
class PcmProps:
    """Paraffin properties. ``latent_heat`` and ``T_ini`` have no catalog
    value and must be supplied by the caller."""

    rho: float
    c: float
    k_solid: float
    k_liquid: float
    T_S: float
    T_L: float
    latent_heat: float
    T_ini: float = 25.0

    def __post_init__(self):
        _positive_finite(self, "rho", "c", "k_solid", "k_liquid", "latent_heat")
        if not (math.isfinite(self.T_S) and math.isfinite(self.T_L) and self.T_S < self.T_L):
            raise DomainError(f"need T_S < T_L, got T_S={self.T_S!r}, T_L={self.T_L!r}")
        if not math.isfinite(self.T_ini):
            raise DomainError("T_ini must be finite")


@dataclass(frozen=True)
class FoamProps:
    porosity: float
    k: float
    rule: str = "parallel"

    def __post_init__(self):
        if not (0.0 < self.porosity <= 1.0):
            raise DomainError(f"foam porosity must lie in (0, 1], got {self.porosity!r}")
        if not (math.isfinite(self.k) and self.k > 0):
            raise DomainError("foam conductivity must be positive")
        if self.rule not in CONDUCTIVITY_RULES:
            raise DomainError(f"unknown conductivity rule {self.rule!r}; choose from {sorted(CONDUCTIVITY_RULES)}")


@dataclass(frozen=True)
class PcmState:
    H: float  # J/kg
    T: float  # degC
    xi: float


# Coolant table: name -> (rho, c, k, mu). Names are case-sensitive.
COOLANT_TABLE: dict[str, tuple[float, float, float, float]] = {
    "Nf(Cu)": (1008.3, 4135.7, 0.6098, 0.00131),
    "Nf(Ti)": (1003.3, 4154.9, 0.6090, 0.0009),
    "Nf(Al)": (1002.91, 4157.79, 0.6099, 0.0009),
    "Kerosene": (785.7, 2100.0, 0.15, 2.21),
    "Glycol": (1071.1, 3300.0, 0.38, 3.39),
    "Water": (998.2, 4182.0, 0.6, 0.001),
}

NANOFLUIDS = ("Nf(Cu)", "Nf(Ti)", "Nf(Al)")
NANOFLUID_PHI = 0.002
NANOFLUID_BASE = "Water"

# Solid / PCM table: name -> (rho, c, k). Paraffin conductivity is listed
# for the solid and liquid state.
SOLID_TABLE: dict[str, tuple[float, float, float]] = {
    "Battery": (2500.0, 1108.0, 28.0),
    "Aluminum": (2719.0, 871.0, 202.4),
}
PARAFFIN_RT35 = {"rho": 770.0, "c": 2460.0, "k_solid": 5.622, "k_liquid": 0.1505}
FOAM_POROSITY = 0.95
FOAM_K = 202.4

# RT35 melting onset and interval.
RT35_T_S = 35.0
RT35_T_L = 37.0
# Test/default fixture for the latent heat (manufacturer-typical value for
# RT35-grade paraffin); not a catalog quantity.
RT35_LATENT_HEAT_FIXTURE = 160e3


def coolant_catalog(name: str) -> CoolantProps:
    try:
        rho, c, k, mu = COOLANT_TABLE[name]
    except KeyError:
        valid = ", ".join(COOLANT_TABLE)
        raise CatalogError(f"unknown coolant {name!r}; valid names: {valid}") from None
    return CoolantProps(rho=rho, c=c, k=k, mu=mu)


def solid_catalog(name: str) -> SolidProps:
    try:
        rho, c, k = SOLID_TABLE[name]
    except KeyError:
        raise CatalogError(f"unknown solid {name!r}; valid names: {', '.join(SOLID_TABLE)}") from None
    return SolidProps(rho=rho, c=c, k=k)


def rt35(latent_heat: float = RT35_LATENT_HEAT_FIXTURE, T_ini: float = 25.0) -> PcmProps:
    return PcmProps(T_S=RT35_T_S, T_L=RT35_T_L, latent_heat=latent_heat, T_ini=T_ini, **PARAFFIN_RT35)


# --- nanofluid mixing rules -------------------------------------------------

def nanofluid_density(spec: NanofluidSpec) -> float:
    phi = spec.phi
    if not (0.0 <= phi < 1.0):
        raise DomainError(f"volume fraction outside [0, 1): {phi!r}")
    return phi * spec.particle.rho_np + (1.0 - phi) * spec.base.rho


def nanofluid_heat_capacity(spec: NanofluidSpec, rho_nf: float | None = None) -> float:
    if rho_nf is None:
        rho_nf = nanofluid_density(spec)
    if not rho_nf > 0:
        raise DomainError(f"mixture density must be positive, got {rho_nf!r}")
    phi = spec.phi
    p, b = spec.particle, spec.base
    return (phi * p.rho_np * p.c_np + (1.0 - phi) * b.rho * b.c) / rho_nf


def nanofluid_conductivity(spec: NanofluidSpec) -> float:
    """Maxwell effective conductivity of a dilute suspension."""
    phi = spec.phi
    kb, kp = spec.base.k, spec.particle.k_np
    den = kp + 2.0 * kb + phi * (kb - kp)
    if not den > 0:
        raise DegeneracyError(f"Maxwell denominator is non-positive ({den!r})")
    return kb * (kp + 2.0 * kb - 2.0 * phi * (kb - kp)) / den


def maxwell_upper_bound(k_base: float, phi: float) -> float:
    """Conductivity reached as particle conductivity tends to infinity."""
    return k_base * (1.0 + 2.0 * phi) / (1.0 - phi)


def nanofluid_props(spec: NanofluidSpec) -> CoolantProps:
    rho = nanofluid_density(spec)
    return CoolantProps(
        rho=rho,
        c=nanofluid_heat_capacity(spec, rho),
        k=nanofluid_conductivity(spec),
        mu=spec.base.mu if spec.mu is None else spec.mu,
    )


def backsolve_particle_density(rho_nf: float, base: CoolantProps, phi: float) -> float:
    return (rho_nf - (1.0 - phi) * base.rho) / phi


def backsolve_particle_heat_capacity(rho_nf: float, c_nf: float, base: CoolantProps, phi: float) -> float:
    rho_np = backsolve_particle_density(rho_nf, base, phi)
    return (rho_nf * c_nf - (1.0 - phi) * base.rho * base.c) / (phi * rho_np)


def backsolve_particle_conductivity(k_nf: float, base: CoolantProps, phi: float) -> float:
    """Invert the Maxwell rule for the particle conductivity.

    The result is negative (unphysical) when ``k_nf`` exceeds
    :func:`maxwell_upper_bound`.
    """
    kb = base.k
    q = k_nf / kb
    den = 1.0 + 2.0 * phi - q + q * phi
    if den == 0.0:
        raise DegeneracyError("target conductivity equals the Maxwell asymptote")
    return kb * (2.0 * q + q * phi - 2.0 + 2.0 * phi) / den


# --- PCM enthalpy-porosity relations ----------------------------------------

def melt_fraction(T: float, props: PcmProps) -> float:
    if T <= props.T_S:
        return 0.0
    if T <= props.T_L:
        return (T - props.T_S) / (props.T_L - props.T_S)
    return 1.0


def pcm_enthalpy(T: float, props: PcmProps) -> float:
    """Specific enthalpy relative to ``T_ini``: sensible part plus the latent
    share ``xi * latent_heat``. Continuous and non-decreasing in T."""
    return props.c * (T - props.T_ini) + melt_fraction(T, props) * props.latent_heat


def pcm_heat_capacity(T: float, props: PcmProps) -> float:
    """dH/dT, using the mushy-zone slope on the closed interval (T_S, T_L]."""
    if props.T_S < T <= props.T_L:
        return props.c + props.latent_heat / (props.T_L - props.T_S)
    return props.c


def temperature_from_enthalpy(H: float, props: PcmProps) -> float:
    c, dH = props.c, props.latent_heat
    H_S = c * (props.T_S - props.T_ini)
    if H <= H_S:
        return props.T_ini + H / c
    H_L = c * (props.T_L - props.T_ini) + dH
    if H <= H_L:
        slope = c + dH / (props.T_L - props.T_S)
        return props.T_S + (H - H_S) / slope
    return props.T_ini + (H - dH) / c


def pcm_state(T: float, props: PcmProps) -> PcmState:
    return PcmState(H=pcm_enthalpy(T, props), T=T, xi=melt_fraction(T, props))


def pcm_state_from_enthalpy(H: float, props: PcmProps) -> PcmState:
    T = temperature_from_enthalpy(H, props)
    return PcmState(H=H, T=T, xi=melt_fraction(T, props))


# --- PCM/foam composite conductivity ----------------------------------------

def pcm_conductivity(props: PcmProps, xi: float) -> float:
    return props.k_solid + xi * (props.k_liquid - props.k_solid)


def _parallel(k_pcm: float, foam: FoamProps) -> float:
    return foam.porosity * k_pcm + (1.0 - foam.porosity) * foam.k


def _as_given(k_pcm: float, foam: FoamProps) -> float:
    # Tabulated paraffin values are read as already-effective composite values.
    return k_pcm


CONDUCTIVITY_RULES = {"parallel": _parallel, "as_given": _as_given}


def effective_pcm_foam_conductivity(pcm_k: float, foam: FoamProps, xi: float | None = None) -> float:
    """Composite conductivity of PCM-filled foam.

    ``pcm_k`` is either a plain conductivity or a :class:`PcmProps`, in which
    case it is interpolated between solid and liquid with the melt fraction.
    """
    if isinstance(pcm_k, PcmProps):
        if xi is None or not (0.0 <= xi <= 1.0):
            raise DomainError(f"melt fraction must lie in [0, 1], got {xi!r}")
        pcm_k = pcm_conductivity(pcm_k, xi)
    return CONDUCTIVITY_RULES[foam.rule](pcm_k, foam)


def default_foam(rule: str = "parallel") -> FoamProps:
    return FoamProps(porosity=FOAM_POROSITY, k=FOAM_K, rule=rule)


# --- consistency checks -----------------------------------------------------

@dataclass(frozen=True)
class PropertyCheck:
    name: str
    passed: bool
    detail: str


def nanofluid_consistency_checks(rel_tol: float = 1e-6) -> list[PropertyCheck]:
    """Back-solve particle properties for each nanofluid row and push them
    through the mixing rules again."""
    base = coolant_catalog(NANOFLUID_BASE)
    phi = NANOFLUID_PHI
    checks = []
    for name in NANOFLUIDS:
        row = coolant_catalog(name)
        rho_np = backsolve_particle_density(row.rho, base, phi)
        c_np = backsolve_particle_heat_capacity(row.rho, row.c, base, phi)
        k_np = backsolve_particle_conductivity(row.k, base, phi)

        rho = phi * rho_np + (1 - phi) * base.rho
        ok = math.isclose(rho, row.rho, rel_tol=rel_tol) and rho_np > 0
        checks.append(PropertyCheck(f"{name} density", ok, f"rho_np={rho_np:.6g}, rho_nf={rho:.8g} vs {row.rho}"))

        ok = c_np > 0
        if ok:
            c = nanofluid_heat_capacity(
                NanofluidSpec(phi, base, NanoparticleProps(rho_np, c_np, 1.0)), rho)
            ok = math.isclose(c, row.c, rel_tol=rel_tol)
            detail = f"c_np={c_np:.6g}, c_nf={c:.8g} vs {row.c}"
        else:
            detail = f"c_np={c_np:.6g} is not positive"
        checks.append(PropertyCheck(f"{name} heat capacity", ok, detail))

        bound = maxwell_upper_bound(base.k, phi)
        if k_np > 0:
            k = nanofluid_conductivity(NanofluidSpec(phi, base, NanoparticleProps(rho_np, c_np, k_np)))
            ok = math.isclose(k, row.k, rel_tol=rel_tol)
            detail = f"k_np={k_np:.6g}, k_nf={k:.8g} vs {row.k}"
        else:
            ok = False
            detail = (f"no positive particle conductivity reproduces k={row.k}: "
                      f"Maxwell bound at phi={phi} is {bound:.6f} (inverted k_np={k_np:.4g})")
        checks.append(PropertyCheck(f"{name} conductivity", ok, detail))
    return checks


# --- vectorised forms used by the solvers -----------------------------------

def melt_fraction_array(T, props: PcmProps):
    T = np.asarray(T, dtype=float)
    return np.clip((T - props.T_S) / (props.T_L - props.T_S), 0.0, 1.0)


def pcm_enthalpy_array(T, props: PcmProps):
    T = np.asarray(T, dtype=float)
    return props.c * (T - props.T_ini) + melt_fraction_array(T, props) * props.latent_heat


def pcm_heat_capacity_array(T, props: PcmProps):
    T = np.asarray(T, dtype=float)
    mushy = (T > props.T_S) & (T <= props.T_L)
    return np.where(mushy, props.c + props.latent_heat / (props.T_L - props.T_S), props.c)


def temperature_from_enthalpy_array(H, props: PcmProps):
    H = np.asarray(H, dtype=float)
    c, dH = props.c, props.latent_heat
    H_S = c * (props.T_S - props.T_ini)
    H_L = c * (props.T_L - props.T_ini) + dH
    slope = c + dH / (props.T_L - props.T_S)
    return np.where(H <= H_S, props.T_ini + H / c,
                    np.where(H <= H_L, props.T_S + (H - H_S) / slope, props.T_ini + (H - dH) / c))


def effective_conductivity_array(props: PcmProps, foam: FoamProps, xi):
    k_pcm = props.k_solid + np.asarray(xi, dtype=float) * (props.k_liquid - props.k_solid)
    return CONDUCTIVITY_RULES[foam.rule](k_pcm, foam)
