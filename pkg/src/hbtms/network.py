"""Reduced-order thermal network of the battery module.

Layout. Cells sit in ``n_rows`` rows of ``n_cols`` inside an aluminum block
(pitch = cell diameter + 2 wall thicknesses). A thin layer of width
``channel_width`` runs between neighbouring rows; each layer stacks
``units_per_layer`` channel/PCM units (channel of height D, PCM/foam strip of
height D1) along the cell axis, the rest of the layer height is aluminum web.

Flow. The channels form two serpentine circuits (one per inlet/outlet pair),
each passing ``composite_number`` layers with a U-bend between passes. The two
circuits share the centre layer, half of its channel units each; with
``n_layers == composite_number`` there is a single circuit. A cooling
direction picks, per circuit, whether the inlet sits at its outer layer or at
the centre, and whether both inlets enter from the same end face.

Nodes. One battery node per cell (or core + shell), one housing node per
cell, one PCM node and one coolant node per layer segment and circuit leg,
plus a single ambient node.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .heatgen import BatterySpec
from .materials import (CoolantProps, FoamProps, PcmProps, SolidProps,
                        effective_pcm_foam_conductivity)


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class ModuleGeometry:
    n_rows: int = 6
    n_cols: int = 6
    channel_height: float = 0.007  # D
    pcm_height: float = 0.007  # D1
    channel_width: float = 0.002
    wall_thickness: float = 0.001
    n_layers: int = 5
    composite_number: int = 3
    units_per_layer: int = 4
    segments_per_cell: int = 1
    bend_loss: float = 0.0  # minor-loss coefficient per U-bend
    battery_nodes: int = 1  # 1: lumped cell, 2: core + shell

    def __post_init__(self):
        for name in ("channel_height", "pcm_height", "channel_width", "wall_thickness"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise GeometryError(f"{name} must be positive, got {value!r}")
        for name in ("n_rows", "n_cols", "n_layers", "composite_number", "units_per_layer", "segments_per_cell"):
            if getattr(self, name) < 1:
                raise GeometryError(f"{name} must be >= 1")
        if self.n_rows not in (self.n_layers, self.n_layers + 1):
            raise GeometryError("layers sit between rows: need n_rows == n_layers + 1 (or n_layers)")
        n, L = self.composite_number, self.n_layers
        if L != n and L != 2 * n - 1:
            raise GeometryError(f"n_layers={L} incompatible with composite_number={n} "
                                f"(need n_layers == n or 2n - 1)")
        if self.bend_loss < 0:
            raise GeometryError("bend_loss must be >= 0")
        if self.battery_nodes not in (1, 2):
            raise GeometryError("battery_nodes must be 1 or 2")

    @property
    def n_cells(self) -> int:
        return self.n_rows * self.n_cols

    @property
    def n_segments(self) -> int:
        return self.n_cols * self.segments_per_cell

    @property
    def hydraulic_diameter(self) -> float:
        w, D = self.channel_width, self.channel_height
        return 2.0 * w * D / (w + D)

    @property
    def aspect_ratio(self) -> float:
        w, D = self.channel_width, self.channel_height
        return min(w, D) / max(w, D)


# direction id -> (inlet of circuit A, inlet of circuit B, inlet faces)
DIRECTIONS = {
    1: ("outer", "inner", "same"),
    2: ("inner", "inner", "same"),
    3: ("outer", "inner", "opposite"),
    4: ("outer", "outer", "same"),
    5: ("inner", "inner", "opposite"),
    6: ("outer", "outer", "opposite"),
}


def describe_direction(direction: int) -> str:
    a, b, faces = DIRECTIONS[direction]
    return f"circuit A inlet {a}, circuit B inlet {b}, inlets on {faces} end face(s)"


# --- laminar rectangular duct closures --------------------------------------

def nusselt_rectangular(aspect: float) -> float:
    """Fully developed laminar Nu at constant wall temperature (short/long
    side ratio ``aspect`` in [0, 1]); polynomial fit to the tabulated values."""
    a = aspect
    return 7.541 * (1 - 2.610 * a + 4.970 * a**2 - 5.119 * a**3 + 2.702 * a**4 - 0.548 * a**5)


def friction_factor_re(aspect: float) -> float:
    """Darcy friction factor times Reynolds number for a rectangular duct."""
    a = aspect
    return 96.0 * (1 - 1.3553 * a + 1.9467 * a**2 - 1.7012 * a**3 + 0.9564 * a**4 - 0.2537 * a**5)


NU_CONDUCTION = 1.0


def convection_coefficient(flow: float, geom: ModuleGeometry, coolant: CoolantProps) -> float:
    """Wall heat-transfer coefficient in the channels, W/(m2 K).

    Laminar fully developed flow has a flow-independent Nusselt number; a
    stagnant channel falls back to ``k / D_h``.
    """
    if flow < 0:
        raise ValueError("mass flow must be >= 0")
    nu = nusselt_rectangular(geom.aspect_ratio) if flow > 0 else NU_CONDUCTION
    return nu * coolant.k / geom.hydraulic_diameter


# --- flow topology ----------------------------------------------------------

@dataclass(frozen=True)
class Leg:
    layer: int
    share: float  # fraction of the layer's channel units carried by this leg
    sign: int  # +1 flows toward +x, -1 toward -x


def circuit_layouts(geom: ModuleGeometry, direction: int) -> list[tuple[str, list[Leg]]]:
    if direction not in DIRECTIONS:
        raise GeometryError(f"cooling direction must be one of 1..6, got {direction!r}")
    inlet_a, inlet_b, faces = DIRECTIONS[direction]
    n, L = geom.composite_number, geom.n_layers

    def serpentine(layers, share_of, first_sign):
        return [Leg(layer, share_of(layer), first_sign * (-1) ** i) for i, layer in enumerate(layers)]

    if L == n:
        layers = list(range(L))
        if inlet_a == "inner":
            layers.reverse()
        return [("A", serpentine(layers, lambda j: 1.0, +1))]

    centre = n - 1
    share = lambda j: 0.5 if j == centre else 1.0  # noqa: E731
    layers_a = list(range(0, n))
    layers_b = list(range(L - 1, L - n - 1, -1))
    if inlet_a == "inner":
        layers_a.reverse()
    if inlet_b == "inner":
        layers_b.reverse()
    sign_b = +1 if faces == "same" else -1
    return [("A", serpentine(layers_a, share, +1)), ("B", serpentine(layers_b, share, sign_b))]


def module_length(geom: ModuleGeometry, battery: BatterySpec) -> float:
    return geom.n_cols * (battery.cell_diameter + 2 * geom.wall_thickness)


def pressure_drop(flow: float, geom: ModuleGeometry, coolant: CoolantProps, direction: int = 4,
                  battery: BatterySpec | None = None) -> float:
    """Inlet-to-outlet pressure drop, Pa, for total mass flow ``flow``.

    Fully developed laminar friction in every pass plus ``bend_loss`` dynamic
    heads per U-bend. Circuits are hydraulically identical and share the flow
    equally.
    """
    if flow < 0:
        raise ValueError("mass flow must be >= 0")
    if flow == 0:
        return 0.0
    length = module_length(geom, battery or _reference_cell())
    circuits = circuit_layouts(geom, direction)
    per_circuit = flow / len(circuits)
    w, D = geom.channel_width, geom.channel_height
    Dh = geom.hydraulic_diameter
    fre = friction_factor_re(geom.aspect_ratio)
    drops = []
    for _, legs in circuits:
        dp = 0.0
        for i, leg in enumerate(legs):
            area = geom.units_per_layer * leg.share * w * D
            u = per_circuit / (coolant.rho * area)
            dp += fre * coolant.mu * length * u / (2.0 * Dh**2)
            if i < len(legs) - 1:
                dp += geom.bend_loss * 0.5 * coolant.rho * u * u
        drops.append(dp)
    return max(drops)


def _reference_cell() -> BatterySpec:
    return BatterySpec(internal_resistance=1.0)


# --- closed-form volumes ----------------------------------------------------

def closed_form_volumes(geom: ModuleGeometry, battery: BatterySpec, foam: FoamProps | None,
                        pcm_enabled: bool = True) -> dict[str, float]:
    """Volume of every material region, m3."""
    pitch = battery.cell_diameter + 2 * geom.wall_thickness
    Lx = geom.n_cols * pitch
    Ly = geom.n_rows * pitch + geom.n_layers * geom.channel_width
    h = battery.cell_height
    u, w = geom.units_per_layer, geom.channel_width
    cells = geom.n_cells * battery.volume
    channels = geom.n_layers * u * w * geom.channel_height * Lx
    gaps = geom.n_layers * u * w * geom.pcm_height * Lx
    block = Lx * Ly * h
    porosity = foam.porosity if foam is not None else 1.0
    return {
        "block": block,
        "battery": cells,
        "channel": channels,
        "gap": gaps,
        "pcm": gaps * porosity if pcm_enabled else 0.0,
        "foam_solid": gaps * (1 - porosity) if pcm_enabled else 0.0,
        "wall": block - cells - channels - gaps,
    }


# --- network ----------------------------------------------------------------

@dataclass(frozen=True)
class Node:
    id: int
    kind: str  # battery, wall, pcm, channel, ambient
    capacity: float  # J/K (PCM: sensible, solid; ambient: inf)
    volume: float
    row: int = -1
    col: int = -1
    layer: int = -1
    segment: int = -1
    circuit: str = ""


# how a conductance is evaluated at run time
FIXED, COOLANT_WALL, PCM_WALL, PCM_PCM, COOLANT_PCM = range(5)
RULE_NAMES = ("fixed", "coolant_wall", "pcm_wall", "pcm_pcm", "coolant_pcm")


@dataclass(frozen=True)
class Conductance:
    a: int
    b: int
    G: float  # W/K at the reference state (solid PCM, flowing coolant)
    kind: str  # conduction, convection-to-coolant, convection-to-ambient
    rule: int = FIXED
    area: float = 0.0
    geo: float = 0.0  # conduction shape factor A/L, m


@dataclass(frozen=True)
class FlowPath:
    circuit: str
    nodes: tuple[int, ...]  # upstream to downstream
    legs: tuple[Leg, ...]


@dataclass(frozen=True)
class ThermalNetwork:
    nodes: tuple[Node, ...]
    conductances: tuple[Conductance, ...]
    flow_paths: tuple[FlowPath, ...]
    geometry: ModuleGeometry | None = None
    direction: int | None = None
    pcm: PcmProps | None = None
    foam: FoamProps | None = None
    coolant: CoolantProps | None = None
    # index arrays derived in __post_init__
    arrays: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        kinds = np.array([n.kind for n in self.nodes])
        arr = {
            "kind": kinds,
            "capacity": np.array([n.capacity for n in self.nodes]),
            "volume": np.array([n.volume for n in self.nodes]),
            "a": np.array([c.a for c in self.conductances], dtype=int),
            "b": np.array([c.b for c in self.conductances], dtype=int),
            "G": np.array([c.G for c in self.conductances]),
            "rule": np.array([c.rule for c in self.conductances], dtype=int),
            "area": np.array([c.area for c in self.conductances]),
            "geo": np.array([c.geo for c in self.conductances]),
        }
        for kind in ("battery", "wall", "pcm", "channel", "ambient"):
            arr[kind] = np.flatnonzero(kinds == kind)
        object.__setattr__(self, "arrays", arr)

    def indices(self, kind: str) -> np.ndarray:
        return self.arrays[kind]

    @property
    def ambient(self) -> int:
        amb = self.arrays["ambient"]
        if len(amb) != 1:
            raise GeometryError("network needs exactly one ambient node")
        return int(amb[0])

    def volume_by_kind(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for n in self.nodes:
            if n.kind != "ambient":
                out[n.kind] = out.get(n.kind, 0.0) + n.volume
        return out

    def total_heat_capacity(self) -> float:
        cap = self.arrays["capacity"]
        return float(cap[np.isfinite(cap)].sum())

    def is_connected(self) -> bool:
        n = len(self.nodes)
        ones = np.ones(len(self.conductances))
        adj = coo_matrix((ones, (self.arrays["a"], self.arrays["b"])), shape=(n, n))
        ncomp, _ = connected_components(adj, directed=False)
        return ncomp == 1

    def conductance_values(self, h: float, k_node: np.ndarray) -> np.ndarray:
        """Conductances for wall heat-transfer coefficient ``h`` and per-node
        PCM/foam conductivity ``k_node`` (only PCM entries are read)."""
        arr = self.arrays
        rule, a, b = arr["rule"], arr["a"], arr["b"]
        G = arr["G"].copy()
        m = rule == COOLANT_WALL
        G[m] = h * arr["area"][m]
        m = rule == PCM_WALL
        G[m] = k_node[a[m]] * arr["geo"][m]
        m = rule == PCM_PCM
        ka, kb = k_node[a[m]], k_node[b[m]]
        G[m] = 2 * ka * kb / (ka + kb) * arr["geo"][m]
        m = rule == COOLANT_PCM
        if m.any():
            G[m] = 1.0 / (1.0 / (h * arr["area"][m]) + 1.0 / (k_node[b[m]] * arr["geo"][m]))
        return G

    def write_csv(self, nodes_path, edges_path) -> None:
        with open(nodes_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", "kind", "capacity_J_per_K", "volume_m3", "row", "col", "layer", "segment", "circuit"])
            for n in self.nodes:
                w.writerow([n.id, n.kind, repr(n.capacity), repr(n.volume),
                            n.row, n.col, n.layer, n.segment, n.circuit])
        with open(edges_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["node_a", "node_b", "G_W_per_K", "kind", "rule"])
            for c in self.conductances:
                w.writerow([c.a, c.b, repr(c.G), c.kind, RULE_NAMES[c.rule]])


def build_network(geom: ModuleGeometry, direction: int, battery: BatterySpec, housing: SolidProps,
                  coolant: CoolantProps, pcm: PcmProps | None, foam: FoamProps,
                  ambient_h: float = 5.0) -> ThermalNetwork:
    """Assemble the network. ``pcm=None`` leaves the PCM gaps empty."""
    vols = closed_form_volumes(geom, battery, foam, pcm is not None)
    if vols["wall"] <= 0:
        raise GeometryError("channel/PCM layers do not fit inside the housing block")
    stack = geom.units_per_layer * (geom.channel_height + geom.pcm_height)
    web = battery.cell_height - stack
    if web < 0:
        raise GeometryError(f"layer stack ({stack * 1e3:.1f} mm) exceeds the cell height")

    nodes: list[Node] = []
    edges: list[Conductance] = []

    def add(kind, capacity, volume, **meta):
        nodes.append(Node(len(nodes), kind, capacity, volume, **meta))
        return len(nodes) - 1

    R, Cn = geom.n_rows, geom.n_cols
    t, w = geom.wall_thickness, geom.channel_width
    d, hc = battery.cell_diameter, battery.cell_height
    pitch = d + 2 * t
    Lx = Cn * pitch
    Ly = R * pitch + geom.n_layers * w
    nseg, spc = geom.n_segments, geom.segments_per_cell
    Lseg = Lx / nseg
    U = geom.units_per_layer
    D, D1 = geom.channel_height, geom.pcm_height
    rho_c_b = battery.rho_b * battery.c_b
    rho_c_al = housing.rho * housing.c

    # batteries and housing
    wall_id = np.zeros((R, Cn), dtype=int)
    wall_vol = vols["wall"] / geom.n_cells
    kb = battery.k_b
    for r in range(R):
        for c in range(Cn):
            if geom.battery_nodes == 1:
                b = add("battery", rho_c_b * battery.volume, battery.volume, row=r, col=c)
                g_bw = 8 * math.pi * kb * hc  # volume-mean to surface, uniform generation
            else:
                rc = 0.5 * d / math.sqrt(2)  # equal-volume core and shell
                ro = 0.5 * d
                half = 0.5 * battery.volume
                core = add("battery", rho_c_b * half, half, row=r, col=c, segment=0)
                b = add("battery", rho_c_b * half, half, row=r, col=c, segment=1)
                r1 = rc / math.sqrt(2)
                r2 = math.sqrt(0.5 * (ro**2 + rc**2))
                edges.append(Conductance(core, b, 2 * math.pi * kb * hc / math.log(r2 / r1), "conduction"))
                g_bw = 2 * math.pi * kb * hc / math.log(ro / r2)
            wid = add("wall", rho_c_al * wall_vol, wall_vol, row=r, col=c)
            wall_id[r, c] = wid
            edges.append(Conductance(b, wid, g_bw, "conduction"))

    amb = None  # added last so that indices of solid nodes stay compact

    # housing conduction
    k_al = housing.k
    g_row = k_al * (2 * t * hc) / pitch
    g_cross = k_al * web * pitch / (w + 2 * t) if web > 0 else 0.0
    for r in range(R):
        for c in range(Cn - 1):
            edges.append(Conductance(wall_id[r, c], wall_id[r, c + 1], g_row, "conduction"))
    for r in range(R - 1):
        if g_cross > 0:
            for c in range(Cn):
                edges.append(Conductance(wall_id[r, c], wall_id[r + 1, c], g_cross, "conduction"))

    def rows_of_layer(j):
        return [r for r in (j, j + 1) if r < R]

    # PCM strips
    pcm_id = {}
    if pcm is not None:
        k_ref = effective_pcm_foam_conductivity(pcm, foam, 0.0)
        gap_vol = U * w * D1 * Lseg
        v_pcm = gap_vol * foam.porosity
        cap = pcm.rho * pcm.c * v_pcm
        for j in range(geom.n_layers):
            for s in range(nseg):
                pid = add("pcm", cap, v_pcm, layer=j, segment=s, col=s // spc)
                pcm_id[j, s] = pid
                geo = U * D1 * Lseg / (0.5 * w)
                for r in rows_of_layer(j):
                    edges.append(Conductance(pid, wall_id[r, s // spc], k_ref * geo, "conduction",
                                             PCM_WALL, U * D1 * Lseg, geo))
            for s in range(nseg - 1):
                geo = U * w * D1 / Lseg
                edges.append(Conductance(pcm_id[j, s], pcm_id[j, s + 1], k_ref * geo, "conduction",
                                         PCM_PCM, U * w * D1, geo))

    # coolant
    h_ref = convection_coefficient(1.0, geom, coolant)
    paths = []
    for name, legs in circuit_layouts(geom, direction):
        order = []
        for leg in legs:
            n_sub = U * leg.share
            v = n_sub * w * D * Lseg
            cap = coolant.rho * coolant.c * v
            segs = range(nseg) if leg.sign > 0 else range(nseg - 1, -1, -1)
            for s in segs:
                cid = add("channel", cap, v, layer=leg.layer, segment=s, col=s // spc, circuit=name)
                order.append(cid)
                area = n_sub * D * Lseg
                for r in rows_of_layer(leg.layer):
                    edges.append(Conductance(cid, wall_id[r, s // spc], h_ref * area, "convection-to-coolant",
                                             COOLANT_WALL, area))
                if pcm is not None:
                    area = 2 * n_sub * w * Lseg
                    geo = area / (0.5 * D1)
                    G = 1.0 / (1.0 / (h_ref * area) + 1.0 / (k_ref * geo))
                    edges.append(Conductance(cid, pcm_id[leg.layer, s], G, "convection-to-coolant",
                                             COOLANT_PCM, area, geo))
        paths.append(FlowPath(name, tuple(order), tuple(legs)))

    # ambient: top/bottom faces everywhere, side faces on the perimeter
    amb = add("ambient", math.inf, 0.0)
    a_top = 2 * Lx * Ly / geom.n_cells
    for r in range(R):
        for c in range(Cn):
            area = a_top
            if c == 0:
                area += Ly * hc / R
            if c == Cn - 1:
                area += Ly * hc / R
            if r == 0:
                area += Lx * hc / Cn
            if r == R - 1:
                area += Lx * hc / Cn
            edges.append(Conductance(wall_id[r, c], amb, ambient_h * area, "convection-to-ambient", FIXED, area))

    return ThermalNetwork(tuple(nodes), tuple(edges), tuple(paths), geom, direction, pcm, foam, coolant)


def lumped_cell_network(battery: BatterySpec, ambient_h: float = 0.0, area: float | None = None) -> ThermalNetwork:
    """A single lumped cell exchanging heat with the ambient node only.

    ``area`` defaults to the full cell surface (mantle plus both ends).
    """
    if area is None:
        r = 0.5 * battery.cell_diameter
        area = 2 * math.pi * r * battery.cell_height + 2 * math.pi * r * r
    cell = Node(0, "battery", battery.heat_capacity, battery.volume, row=0, col=0)
    amb = Node(1, "ambient", math.inf, 0.0)
    edges = (Conductance(0, 1, ambient_h * area, "convection-to-ambient", FIXED, area),) if ambient_h > 0 else ()
    return ThermalNetwork((cell, amb), edges, ())
