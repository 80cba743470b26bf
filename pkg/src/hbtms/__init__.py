"""Reduced-order simulator for a hybrid liquid/PCM battery thermal management module."""
from .control import FlowSchedule, Latch, flow_rate, gaussian_train
from .heatgen import BatterySpec, DischargeSpec, heat_generation
from .materials import CoolantProps, FoamProps, NanofluidSpec, PcmProps, coolant_catalog, rt35
from .network import ModuleGeometry, build_network
from .solver import DivergenceError, Scenario, SimResult, simulate, step, time_step_convergence

__version__ = "0.1.0"

__all__ = [
    "BatterySpec", "CoolantProps", "DischargeSpec", "DivergenceError", "FlowSchedule", "FoamProps", "Latch",
    "ModuleGeometry", "NanofluidSpec", "PcmProps", "Scenario", "SimResult", "build_network", "coolant_catalog",
    "flow_rate", "gaussian_train", "heat_generation", "rt35", "simulate", "step", "time_step_convergence",
]
