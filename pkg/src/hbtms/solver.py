"""Transient integration of the thermal network.

One step of size ``dt``:

1. the flow schedule sets the mass flow from the state at the start of the
   step, which fixes the wall heat-transfer coefficient and the pressure drop;
2. coolant is advected along each circuit with explicit upwind sub-steps
   (Courant number <= 1 on every segment);
3. conduction/convection between all nodes, the battery heat source and the
   PCM enthalpy update are solved together, backward Euler, with the ambient
   node held fixed.

PCM nodes are advanced in enthalpy. The linear system uses dH/dT at the
current iterate; after each solve the enthalpy is updated from the net heat
flow computed on the solved temperatures, which keeps the step exactly
conservative, and the iteration stops once T(H) agrees with the solved
temperature.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve as dense_solve
from scipy.optimize import brentq

from .control import FlowSchedule, Latch, flow_rate
from .heatgen import KELVIN, BatterySpec, DischargeSpec, cell_current
from .materials import (CoolantProps, FoamProps, NanofluidSpec, PcmProps, PcmState, SolidProps,
                        coolant_catalog, default_foam, effective_conductivity_array, nanofluid_props,
                        pcm_enthalpy_array, pcm_heat_capacity_array, solid_catalog,
                        temperature_from_enthalpy_array)
from .network import (Conductance, ModuleGeometry, Node, ThermalNetwork, build_network,
                      convection_coefficient, pressure_drop)

log = logging.getLogger(__name__)

PCM_TOL = 1e-10  # K, agreement between T(H) and the solved temperature
PCM_MAX_ITER = 50
T_LIMIT = 1e4  # degC; anything beyond is treated as a blow-up
ADVECTION_SCHEMES = ("implicit", "explicit")


class DivergenceError(RuntimeError):
    def __init__(self, message: str, node: int | None = None, t: float | None = None):
        super().__init__(message)
        self.node = node
        self.t = t
        self.partial: SimResult | None = None  # series up to the last good step


@dataclass(frozen=True)
class Scenario:
    battery: BatterySpec
    discharge: DischargeSpec
    pcm: PcmProps
    name: str = "scenario"
    geometry: ModuleGeometry = ModuleGeometry()
    direction: int = 4
    coolant: str | CoolantProps | NanofluidSpec = "Nf(Al)"
    schedule: FlowSchedule = FlowSchedule()
    foam: FoamProps = field(default_factory=default_foam)
    housing: SolidProps = field(default_factory=lambda: solid_catalog("Aluminum"))
    pcm_enabled: bool = True
    ambient_h: float = 5.0
    ambient_T: float = 25.0
    inlet_T: float | None = None  # ambient when None
    outlet_pressure: float = 0.0
    dt: float = 1.0
    advection: str = "implicit"

    def __post_init__(self):
        if self.advection not in ADVECTION_SCHEMES:
            raise ValueError(f"advection must be one of {ADVECTION_SCHEMES}, got {self.advection!r}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if self.ambient_h < 0:
            raise ValueError("ambient_h must be >= 0")

    @property
    def coolant_props(self) -> CoolantProps:
        return resolve_coolant(self.coolant)

    @property
    def coolant_inlet_T(self) -> float:
        return self.ambient_T if self.inlet_T is None else self.inlet_T

    def network(self) -> ThermalNetwork:
        return build_network(self.geometry, self.direction, self.battery, self.housing, self.coolant_props,
                             self.pcm if self.pcm_enabled else None, self.foam, self.ambient_h)


def resolve_coolant(coolant) -> CoolantProps:
    if isinstance(coolant, CoolantProps):
        return coolant
    if isinstance(coolant, NanofluidSpec):
        return nanofluid_props(coolant)
    return coolant_catalog(coolant)


@dataclass(frozen=True, eq=False)
class SimState:
    """Network state at time ``t``. ``T`` holds every node (PCM nodes carry
    T(H)); ``H`` and ``xi`` are per PCM node. The last three fields are
    running integrals used by the energy audit, in J."""

    t: float
    T: np.ndarray
    H: np.ndarray
    xi: np.ndarray
    mass_flow: float = 0.0
    dp: float = 0.0
    latch: Latch = Latch()
    generated: float = 0.0
    advected: float = 0.0
    ambient_loss: float = 0.0

    def node_T(self, net: ThermalNetwork) -> np.ndarray:
        return self.T[np.flatnonzero(~np.isin(net.arrays["kind"], ("pcm", "ambient")))]

    def channel_T(self, net: ThermalNetwork) -> np.ndarray:
        return self.T[net.indices("channel")]

    def pcm_states(self, net: ThermalNetwork) -> tuple[PcmState, ...]:
        T = self.T[net.indices("pcm")]
        return tuple(PcmState(float(h), float(t), float(x)) for h, t, x in zip(self.H, T, self.xi))


def battery_stats(state: SimState, net: ThermalNetwork) -> tuple[float, float]:
    """(T_max, volume-weighted T_avg) over battery nodes."""
    idx = net.indices("battery")
    T = state.T[idx]
    vol = net.arrays["volume"][idx]
    return float(T.max()), float(np.dot(T, vol) / vol.sum())


def mean_melt_fraction(state: SimState, net: ThermalNetwork) -> float:
    if state.xi.size == 0:
        return 0.0
    vol = net.arrays["volume"][net.indices("pcm")]
    return float(np.dot(state.xi, vol) / vol.sum())


def initial_state(scenario: Scenario, net: ThermalNetwork) -> SimState:
    T = np.full(len(net.nodes), float(scenario.discharge.initial_T))
    T[net.indices("ambient")] = scenario.ambient_T
    Tp = T[net.indices("pcm")]
    pcm = scenario.pcm
    return SimState(0.0, T, pcm_enthalpy_array(Tp, pcm), _xi(Tp, pcm))


def _xi(T, pcm: PcmProps) -> np.ndarray:
    return np.clip((np.asarray(T, dtype=float) - pcm.T_S) / (pcm.T_L - pcm.T_S), 0.0, 1.0)


# --- kernels ----------------------------------------------------------------

def _laplacian(n: int, a: np.ndarray, b: np.ndarray, G: np.ndarray) -> np.ndarray:
    idx = np.concatenate([a * n + a, b * n + b, a * n + b, b * n + a])
    w = np.concatenate([G, G, -G, -G])
    return np.bincount(idx, weights=w, minlength=n * n).reshape(n, n)


def advect(T: np.ndarray, net: ThermalNetwork, flow: float, cp: float, T_in: float,
           dt: float) -> tuple[np.ndarray, float]:
    """Explicit upwind transport along every flow path; returns the new
    temperatures and the enthalpy carried out of the outlets (J, relative to
    the inlet temperature)."""
    T = T.copy()
    if flow <= 0 or not net.flow_paths:
        return T, 0.0
    mcp = flow / len(net.flow_paths) * cp
    cap = net.arrays["capacity"]
    paths = [np.asarray(p.nodes, dtype=int) for p in net.flow_paths]
    courant = max(mcp * dt / cap[p].min() for p in paths)
    n_sub = max(1, math.ceil(courant - 1e-12))
    tau = dt / n_sub
    out = 0.0
    for p in paths:
        gain = mcp * tau / cap[p]
        Tp = T[p]
        for _ in range(n_sub):
            upstream = np.concatenate(([T_in], Tp[:-1]))
            out += float(mcp * tau * (Tp[-1] - T_in))
            Tp = Tp + gain * (upstream - Tp)
        T[p] = Tp
    return T, out


def advection_operator(net: ThermalNetwork, flow: float, cp: float, T_in: float) -> tuple[np.ndarray, np.ndarray]:
    """Upwind transport as a linear operator: heat into node i is
    ``-(M @ T)[i] + q[i]``."""
    n = len(net.nodes)
    M = np.zeros((n, n))
    q = np.zeros(n)
    if flow <= 0 or not net.flow_paths:
        return M, q
    mcp = flow / len(net.flow_paths) * cp
    for p in net.flow_paths:
        nodes = p.nodes
        M[nodes, nodes] += mcp
        M[nodes[1:], nodes[:-1]] -= mcp
        q[nodes[0]] += mcp * T_in
    return M, q


def outlet_enthalpy(net: ThermalNetwork, T: np.ndarray, flow: float, cp: float, T_in: float, dt: float) -> float:
    if flow <= 0 or not net.flow_paths:
        return 0.0
    mcp = flow / len(net.flow_paths) * cp
    return float(dt * mcp * sum(T[p.nodes[-1]] - T_in for p in net.flow_paths))


def implicit_update(net: ThermalNetwork, G: np.ndarray, T: np.ndarray, H: np.ndarray, pcm: PcmProps | None,
                    source: np.ndarray, dt: float,
                    transport: tuple[np.ndarray, np.ndarray] | None = None) -> tuple[np.ndarray, np.ndarray, float]:
    """Backward-Euler step of the linear exchange network with PCM enthalpy
    iteration.

    ``T`` covers all nodes (fixed nodes keep their value). ``transport`` is an
    optional (M, q) pair from :func:`advection_operator` solved implicitly
    with the rest. Returns the new temperatures, the new PCM enthalpies and
    the heat delivered to fixed nodes over the step (J).
    """
    arr = net.arrays
    n = len(net.nodes)
    fixed = arr["ambient"]
    free_mask = np.ones(n, dtype=bool)
    free_mask[fixed] = False
    free = np.flatnonzero(free_mask)
    pcm_idx = arr["pcm"]
    K = _laplacian(n, arr["a"], arr["b"], G)
    Kff = K[np.ix_(free, free)]
    rhs_fixed = -K[np.ix_(free, fixed)] @ T[fixed] if fixed.size else np.zeros(free.size)
    if transport is not None:
        M, q = transport
        Kff = Kff + M[np.ix_(free, free)]
        rhs_fixed = rhs_fixed + q[free]

    cap = arr["capacity"].copy()
    cap[fixed] = 0.0
    base = cap / dt * T + source
    mass = pcm.rho * arr["volume"][pcm_idx] if pcm_idx.size else np.zeros(0)

    Tstar = T[pcm_idx].copy()
    H_new = H.copy()
    T_sol = T.copy()
    for _ in range(PCM_MAX_ITER):
        diag = cap.copy()
        b = base.copy()
        if pcm_idx.size:
            slope = pcm_heat_capacity_array(Tstar, pcm)
            diag[pcm_idx] = mass * slope
            b[pcm_idx] = mass / dt * (H - pcm_enthalpy_array(Tstar, pcm) + slope * Tstar) + source[pcm_idx]
        A = Kff.copy()
        A[np.diag_indices_from(A)] += (diag / dt)[free]
        T_sol = T.copy()
        T_sol[free] = dense_solve(A, b[free] + rhs_fixed, assume_a="gen", check_finite=False)
        if not pcm_idx.size:
            break
        inflow = -(K[pcm_idx] @ T_sol) + source[pcm_idx]
        H_new = H + dt * inflow / mass
        T_back = temperature_from_enthalpy_array(H_new, pcm)
        done = np.max(np.abs(T_back - T_sol[pcm_idx])) < PCM_TOL
        Tstar = T_back
        if done:
            break
    else:
        log.debug("PCM iteration hit %d iterations; enthalpy update kept", PCM_MAX_ITER)
    # heat into the fixed nodes, on the same temperatures as the PCM fluxes
    to_fixed = -dt * float(np.sum(K[fixed] @ T_sol)) if fixed.size else 0.0
    if pcm_idx.size:
        T_sol[pcm_idx] = temperature_from_enthalpy_array(H_new, pcm)
    return T_sol, H_new, to_fixed


def battery_source(T: np.ndarray, net: ThermalNetwork, battery: BatterySpec, current: float) -> np.ndarray:
    """Heat generation per node, W, with the entropic term taken at ``T``."""
    S = np.zeros(len(net.nodes))
    idx = net.indices("battery")
    if current == 0 or not idx.size:
        return S
    vol = net.arrays["volume"][idx]
    irr = current**2 * battery.internal_resistance
    rev = -current * (T[idx] + KELVIN) * battery.entropy_coefficient
    S[idx] = (irr + rev) * vol / battery.volume
    return S


# --- stepping ---------------------------------------------------------------

def step(state: SimState, scenario: Scenario, network: ThermalNetwork, dt: float | None = None) -> SimState:
    dt = scenario.dt if dt is None else dt
    net = network
    coolant = scenario.coolant_props
    pcm = scenario.pcm if net.indices("pcm").size else None

    T_max, T_avg = battery_stats(state, net) if net.indices("battery").size else (0.0, 0.0)
    flow, latch = flow_rate(state.t, T_avg, scenario.schedule, state.latch, mean_melt_fraction(state, net))
    if net.flow_paths:
        h = convection_coefficient(flow, scenario.geometry, coolant)
        dp = pressure_drop(flow, scenario.geometry, coolant, scenario.direction, scenario.battery)
    else:
        h, dp = 0.0, 0.0

    k_node = np.zeros(len(net.nodes))
    if pcm is not None:
        k_node[net.indices("pcm")] = effective_conductivity_array(pcm, scenario.foam, state.xi)
    G = net.conductance_values(h, k_node)

    T_in = scenario.coolant_inlet_T
    current = cell_current(scenario.discharge.c_rate, scenario.battery.capacity)
    S = battery_source(state.T, net, scenario.battery, current)
    if scenario.advection == "implicit":
        transport = advection_operator(net, flow, coolant.c, T_in)
        T_new, H_new, lost = implicit_update(net, G, state.T, state.H, pcm, S, dt, transport)
        advected = outlet_enthalpy(net, T_new, flow, coolant.c, T_in, dt)
    else:
        T, advected = advect(state.T, net, flow, coolant.c, T_in, dt)
        T_new, H_new, lost = implicit_update(net, G, T, state.H, pcm, S, dt)

    t_new = state.t + dt
    _check_finite(T_new, net, t_new)
    xi = _xi(T_new[net.indices("pcm")], pcm) if pcm is not None else state.xi
    return SimState(t_new, T_new, H_new, xi, flow, dp, latch,
                    state.generated + float(S.sum()) * dt,
                    state.advected + advected,
                    state.ambient_loss + lost)


def _check_finite(T: np.ndarray, net: ThermalNetwork, t: float) -> None:
    bad = np.flatnonzero(~np.isfinite(T) | (np.abs(T) > T_LIMIT))
    if bad.size:
        node = int(bad[0])
        kind = net.nodes[node].kind
        raise DivergenceError(f"non-finite or runaway temperature at node {node} ({kind}), t={t:g} s", node, t)


# --- audit and results ------------------------------------------------------

AUDIT_TERMS = ("battery_sensible", "housing_sensible", "coolant_sensible", "pcm_sensible", "pcm_latent",
               "advection_out", "ambient_loss")


@dataclass(frozen=True)
class EnergyAudit:
    generated: float = 0.0
    battery_sensible: float = 0.0
    housing_sensible: float = 0.0
    coolant_sensible: float = 0.0
    pcm_sensible: float = 0.0
    pcm_latent: float = 0.0
    advection_out: float = 0.0
    ambient_loss: float = 0.0

    @property
    def absorbed(self) -> float:
        return math.fsum(getattr(self, k) for k in AUDIT_TERMS)

    @property
    def residual(self) -> float:
        return self.generated - self.absorbed

    @property
    def relative_closure(self) -> float:
        """|residual| / generated; the absolute residual when nothing was generated."""
        if self.generated == 0:
            return abs(self.residual)
        return abs(self.residual) / abs(self.generated)

    def to_text(self) -> str:
        lines = [f"generated_J={self.generated!r}"]
        lines += [f"{k}_J={getattr(self, k)!r}" for k in AUDIT_TERMS]
        lines += [f"residual_J={self.residual!r}", f"relative_closure={self.relative_closure!r}"]
        return "\n".join(lines) + "\n"


def energy_audit(first: SimState, last: SimState, net: ThermalNetwork, pcm: PcmProps | None) -> EnergyAudit:
    cap = net.arrays["capacity"]
    dT = last.T - first.T

    def sensible(kind):
        idx = net.indices(kind)
        return float(np.dot(cap[idx], dT[idx]))

    pcm_sensible = pcm_latent = 0.0
    pidx = net.indices("pcm")
    if pidx.size and pcm is not None:
        mass = pcm.rho * net.arrays["volume"][pidx]
        dH = last.H - first.H
        latent = pcm.latent_heat * (last.xi - first.xi)
        pcm_latent = float(np.dot(mass, latent))
        pcm_sensible = float(np.dot(mass, dH - latent))
    return EnergyAudit(
        generated=last.generated - first.generated,
        battery_sensible=sensible("battery"),
        housing_sensible=sensible("wall"),
        coolant_sensible=sensible("channel"),
        pcm_sensible=pcm_sensible,
        pcm_latent=pcm_latent,
        advection_out=last.advected - first.advected,
        ambient_loss=last.ambient_loss - first.ambient_loss,
    )


SERIES_COLUMNS = ("t", "T_max", "T_avg", "xi_mean", "mass_flow", "dp", "pump_power_W")


@dataclass(frozen=True, eq=False)
class SimResult:
    scenario: Scenario
    series: dict  # column name -> np.ndarray, one entry per step
    final: SimState
    audit: EnergyAudit
    network: ThermalNetwork = field(repr=False)

    def __len__(self) -> int:
        return len(self.series["t"])

    def __getitem__(self, column: str) -> np.ndarray:
        return self.series[column]

    @property
    def dts(self) -> np.ndarray:
        t = self.series["t"]
        return np.diff(np.concatenate(([0.0], t)))

    def csv_text(self) -> str:
        rows = [",".join(SERIES_COLUMNS)]
        cols = [self.series[c] for c in SERIES_COLUMNS]
        for i in range(len(self)):
            rows.append(",".join(repr(float(c[i])) for c in cols))
        return "\n".join(rows) + "\n"

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.csv_text())

    def write_audit(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.audit.to_text())


def step_sizes(duration: float, dt: float) -> list[float]:
    """Uniform steps of ``dt`` with a shortened last step landing on ``duration``."""
    if duration <= 0:
        return []
    n = max(1, math.ceil(duration / dt - 1e-9))
    sizes = [dt] * n
    sizes[-1] = duration - dt * (n - 1)
    return sizes


def simulate(scenario: Scenario, network: ThermalNetwork | None = None) -> SimResult:
    net = scenario.network() if network is None else network
    pcm = scenario.pcm if net.indices("pcm").size else None
    rho = scenario.coolant_props.rho
    state = first = initial_state(scenario, net)
    has_batteries = net.indices("battery").size > 0
    rows = {c: [] for c in SERIES_COLUMNS}
    steps = step_sizes(scenario.discharge.duration, scenario.dt)
    t = 0.0
    for i, h in enumerate(steps):
        try:
            state = step(state, scenario, net, h)
        except DivergenceError as exc:
            series = {c: np.asarray(v, dtype=float) for c, v in rows.items()}
            exc.partial = SimResult(scenario, series, state, energy_audit(first, state, net, pcm), net)
            raise
        # time stamps from the step index, not a running sum
        t = scenario.dt * (i + 1) if i < len(steps) - 1 else scenario.discharge.duration
        state = replace(state, t=t)
        T_max, T_avg = battery_stats(state, net) if has_batteries else (math.nan, math.nan)
        rows["t"].append(t)
        rows["T_max"].append(T_max)
        rows["T_avg"].append(T_avg)
        rows["xi_mean"].append(mean_melt_fraction(state, net))
        rows["mass_flow"].append(state.mass_flow)
        rows["dp"].append(state.dp)
        rows["pump_power_W"].append(state.dp * state.mass_flow / rho)
    series = {c: np.asarray(v, dtype=float) for c, v in rows.items()}
    audit = energy_audit(first, state, net, pcm)
    log.info("%s: %d steps, closure %.3g", scenario.name, len(steps), audit.relative_closure)
    return SimResult(scenario, series, state, audit, net)


# --- time-step convergence --------------------------------------------------

@dataclass(frozen=True)
class ConvergenceReport:
    dts: tuple[float, ...]
    final_T_avg: tuple[float, ...]
    deltas: tuple[float, ...]  # |T_avg(dts[i]) - T_avg(dts[i+1])|
    ratios: tuple[float, ...]  # deltas[i] / deltas[i+1]
    monotone: bool

    def to_text(self) -> str:
        lines = ["dt_s,final_T_avg"]
        lines += [f"{d!r},{v!r}" for d, v in zip(self.dts, self.final_T_avg)]
        lines.append("deltas=" + ",".join(repr(d) for d in self.deltas))
        lines.append("ratios=" + ",".join(repr(r) for r in self.ratios))
        lines.append(f"monotone={self.monotone}")
        return "\n".join(lines) + "\n"


def time_step_convergence(scenario: Scenario, dts, network: ThermalNetwork | None = None) -> ConvergenceReport:
    dts = tuple(float(d) for d in dts)
    if len(dts) < 2:
        raise ValueError("need at least two time steps")
    if any(b > a for a, b in zip(dts, dts[1:])):
        raise ValueError("time steps must be given in descending order")
    finals = []
    for dt in dts:
        res = simulate(replace(scenario, dt=dt), network)
        finals.append(float(res.series["T_avg"][-1]) if len(res) else scenario.discharge.initial_T)
    deltas = tuple(abs(a - b) for a, b in zip(finals, finals[1:]))
    ratios = tuple(a / b if b > 0 else math.inf for a, b in zip(deltas, deltas[1:]))
    monotone = all(b <= a for a, b in zip(deltas, deltas[1:]))
    if not monotone:
        log.warning("time-step study is not monotonically convergent: %s", deltas)
    return ConvergenceReport(dts, tuple(finals), deltas, ratios, monotone)


# --- one-dimensional melting slab -------------------------------------------

@dataclass(frozen=True)
class SlabResult:
    x: np.ndarray  # cell centres, m
    T: np.ndarray
    xi: np.ndarray
    front: float  # melted thickness, sum(xi * dx), m
    t: float


def melt_slab(pcm: PcmProps, T_wall: float, length: float, n_cells: int, dt: float, t_end: float,
              T_init: float | None = None) -> SlabResult:
    """Melt a PCM slab from a wall held at ``T_wall``; the far face is
    adiabatic. Uses the same implicit enthalpy update as the module solver,
    with the liquid conductivity throughout."""
    if n_cells < 1 or length <= 0 or dt <= 0 or t_end < 0:
        raise ValueError("need n_cells >= 1, length > 0, dt > 0, t_end >= 0")
    dx = length / n_cells
    vol = dx  # per unit face area
    nodes = [Node(i, "pcm", pcm.rho * pcm.c * vol, vol, segment=i) for i in range(n_cells)]
    nodes.append(Node(n_cells, "ambient", math.inf, 0.0))
    k = pcm.k_liquid
    edges = [Conductance(i, i + 1, k / dx, "conduction") for i in range(n_cells - 1)]
    edges.append(Conductance(0, n_cells, 2 * k / dx, "conduction"))
    net = ThermalNetwork(tuple(nodes), tuple(edges), ())
    G = net.arrays["G"]

    T0 = pcm.T_S if T_init is None else T_init
    T = np.full(n_cells + 1, T0, dtype=float)
    T[n_cells] = T_wall
    H = pcm_enthalpy_array(T[:n_cells], pcm)
    S = np.zeros(n_cells + 1)
    t = 0.0
    for h in step_sizes(t_end, dt):
        T, H, _ = implicit_update(net, G, T, H, pcm, S, h)
        t += h
    xi = _xi(T[:n_cells], pcm)
    return SlabResult((np.arange(n_cells) + 0.5) * dx, T[:n_cells].copy(), xi, float(xi.sum() * dx), t_end)


def neumann_melt_front(pcm: PcmProps, T_wall: float, t: float, T_melt: float | None = None) -> float:
    """One-phase Stefan similarity solution: s(t) = 2 lambda sqrt(alpha t)
    with lambda exp(lambda^2) erf(lambda) = St / sqrt(pi)."""
    T_m = 0.5 * (pcm.T_S + pcm.T_L) if T_melt is None else T_melt
    St = pcm.c * (T_wall - T_m) / pcm.latent_heat
    if St <= 0:
        return 0.0
    f = lambda lam: lam * math.exp(lam * lam) * math.erf(lam) - St / math.sqrt(math.pi)  # noqa: E731
    lam = brentq(f, 1e-12, 5.0, xtol=1e-15)
    alpha = pcm.k_liquid / (pcm.rho * pcm.c)
    return 2 * lam * math.sqrt(alpha * t)
