"""Coolant flow scheduling.

Two modes: ``constant`` (baseline mass flow forever) and ``enhanced``, a
three-stage law: baseline flow, then an intensive stage where a Gaussian
pulse train rides on top of the baseline, then a permanent plateau back at
baseline once the average battery temperature has come down to ``T_E``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .materials import DomainError

MODES = ("constant", "enhanced")
TRIGGERS = ("time", "melt_onset")
PLATEAU_RULES = ("crossing", "first_below")


@dataclass(frozen=True)
class FlowSchedule:
    mode: str = "constant"
    v_m: float = 0.6e-3  # kg/s
    t_E: float = 250.0  # s
    T_E: float = 40.0  # degC
    pulse_period: float = 6.0  # s
    pulse_peak: float = 0.1e-3  # kg/s
    pulse_sigma: float | None = None  # s; period/6 when None
    step_tau: float = 0.0  # s; 0 gives a sharp unit step at stage onset
    trigger: str = "time"
    plateau_rule: str = "crossing"

    def __post_init__(self):
        if self.mode not in MODES:
            raise DomainError(f"unknown schedule mode {self.mode!r}; choose from {MODES}")
        if self.trigger not in TRIGGERS:
            raise DomainError(f"unknown trigger {self.trigger!r}; choose from {TRIGGERS}")
        if self.plateau_rule not in PLATEAU_RULES:
            raise DomainError(f"unknown plateau rule {self.plateau_rule!r}; choose from {PLATEAU_RULES}")
        if not self.v_m > 0:
            raise DomainError("v_m must be positive")
        if self.pulse_peak < 0 or self.t_E < 0 or self.step_tau < 0:
            raise DomainError("pulse_peak, t_E and step_tau must be non-negative")
        if not self.pulse_period > 0:
            raise DomainError("pulse_period must be positive")
        if self.pulse_sigma is not None and not self.pulse_sigma > 0:
            raise DomainError("pulse_sigma must be positive")

    @property
    def sigma(self) -> float:
        return self.pulse_period / 6.0 if self.pulse_sigma is None else self.pulse_sigma

    @property
    def mean_pulse_excess(self) -> float:
        """Period-averaged flow added by the pulse train (kg/s)."""
        half = 0.5 * self.pulse_period
        s = self.sigma
        return self.pulse_peak * s * math.sqrt(2 * math.pi) * math.erf(half / (s * math.sqrt(2))) / self.pulse_period


@dataclass(frozen=True)
class Latch:
    """Controller memory owned by the simulation loop.

    ``stage_start`` is the onset of the intensive stage (None until known),
    ``armed`` records that T_avg has been above T_E, and ``plateau`` is the
    one-way switch back to baseline flow.
    """

    stage_start: float | None = None
    armed: bool = False
    plateau: bool = False


def gaussian_train(t: float, schedule: FlowSchedule, start: float | None = None) -> float:
    """Pulse train centred on ``start + k * period`` (k >= 0).

    Each instant sees only its nearest pulse, so a crest equals
    ``pulse_peak`` exactly.
    """
    if start is None:
        start = schedule.t_E
    if t < start or schedule.pulse_peak == 0.0:
        return 0.0
    P = schedule.pulse_period
    offset = math.fmod(t - start, P)
    if offset > 0.5 * P:
        offset -= P
    return schedule.pulse_peak * math.exp(-0.5 * (offset / schedule.sigma) ** 2)


def step_response(t: float, start: float, tau: float) -> float:
    if t < start:
        return 0.0
    if tau == 0.0:
        return 1.0
    return 1.0 - math.exp(-(t - start) / tau)


def flow_rate(t: float, T_avg: float, schedule: FlowSchedule, latch: Latch | None = None,
              xi_mean: float | None = None) -> tuple[float, Latch]:
    """Mass flow at time ``t`` and the updated latch."""
    if t < 0:
        raise DomainError("t must be >= 0")
    if latch is None:
        latch = Latch()
    v_m = schedule.v_m
    if schedule.mode == "constant":
        return v_m, latch
    if latch.plateau:
        return v_m, latch

    if schedule.T_E < T_avg and not latch.armed:
        latch = replace(latch, armed=True)

    start = latch.stage_start
    if start is None:
        if schedule.trigger == "time":
            start = schedule.t_E
        elif xi_mean is not None and xi_mean > 0.0:
            start = t
        if start is not None:
            latch = replace(latch, stage_start=start)
    if start is None or t < start:
        return v_m, latch

    if T_avg <= schedule.T_E and (latch.armed or schedule.plateau_rule == "first_below"):
        return v_m, replace(latch, plateau=True)

    pulse = step_response(t, start, schedule.step_tau) * gaussian_train(t, schedule, start)
    return v_m + pulse, latch
