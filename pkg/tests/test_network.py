import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hbtms.heatgen import BatterySpec
from hbtms.materials import coolant_catalog, default_foam, rt35, solid_catalog
from hbtms.network import (DIRECTIONS, GeometryError, ModuleGeometry, build_network, closed_form_volumes,
                           convection_coefficient, friction_factor_re, lumped_cell_network, nusselt_rectangular,
                           pressure_drop)

CELL = BatterySpec(internal_resistance=0.1)
AL = coolant_catalog("Nf(Al)")
MINIMAL = ModuleGeometry(n_rows=1, n_cols=1, n_layers=1, composite_number=1)


def network(geom=ModuleGeometry(), direction=4, pcm=True, coolant=AL):
    return build_network(geom, direction, CELL, solid_catalog("Aluminum"), coolant,
                         rt35() if pcm else None, default_foam())


def test_duct_closures_hit_tabulated_limits():
    # square duct and parallel plates, constant wall temperature
    assert nusselt_rectangular(1.0) == pytest.approx(2.98, abs=0.01)
    assert nusselt_rectangular(0.0) == pytest.approx(7.541)
    assert friction_factor_re(1.0) == pytest.approx(56.91, abs=0.05)
    assert friction_factor_re(0.0) == 96.0


def test_convection_coefficient_flow_independent_when_laminar():
    g = ModuleGeometry()
    h = convection_coefficient(1e-4, g, AL)
    assert h == convection_coefficient(1e-2, g, AL)
    assert h == pytest.approx(nusselt_rectangular(2 / 7) * AL.k / g.hydraulic_diameter)
    assert convection_coefficient(0.0, g, AL) < h


def test_minimal_network_volumes_by_hand():
    net = network(MINIMAL)
    assert [n.kind for n in net.nodes] == ["battery", "wall", "pcm", "channel", "ambient"]
    assert net.is_connected()
    # 20 mm pitch, one 2 mm channel strip, 68 mm tall
    vols = closed_form_volumes(MINIMAL, CELL, default_foam())
    assert vols["block"] == pytest.approx(0.020 * 0.022 * 0.068)
    assert vols["channel"] == pytest.approx(4 * 0.002 * 0.007 * 0.020)
    assert vols["pcm"] == pytest.approx(0.95 * 4 * 0.002 * 0.007 * 0.020)


@pytest.mark.parametrize("direction", sorted(DIRECTIONS))
def test_default_network_structure(direction):
    net = network(direction=direction)
    assert net.is_connected()
    assert len(net.indices("battery")) == 36
    vols = closed_form_volumes(net.geometry, CELL, default_foam())
    for kind, v in net.volume_by_kind().items():
        assert v == pytest.approx(vols[kind], rel=1e-12), kind
    channel = set(net.indices("channel").tolist())
    on_paths = [i for p in net.flow_paths for i in p.nodes]
    assert sorted(on_paths) == sorted(channel)
    assert all(c.G > 0 and c.a != c.b for c in net.conductances)


def test_pcm_disabled_removes_pcm_nodes():
    net = network(pcm=False)
    assert len(net.indices("pcm")) == 0
    assert net.is_connected()


def test_bad_direction_and_geometry():
    with pytest.raises(GeometryError):
        network(direction=7)
    with pytest.raises(GeometryError):
        ModuleGeometry(n_layers=4)
    with pytest.raises(GeometryError):
        ModuleGeometry(channel_height=-1e-3)
    with pytest.raises(GeometryError, match="exceeds the cell height"):
        network(ModuleGeometry(channel_height=0.01, pcm_height=0.01))


@given(flow=st.floats(1e-5, 1e-1), scale=st.floats(0.1, 10))
def test_pressure_drop_is_linear_in_flow(flow, scale):
    g = ModuleGeometry()
    assert pressure_drop(scale * flow, g, AL) == pytest.approx(scale * pressure_drop(flow, g, AL), rel=1e-12)


def test_pressure_drop_scales_with_kinematic_viscosity():
    g = ModuleGeometry()
    ker, water = coolant_catalog("Kerosene"), coolant_catalog("Water")
    ratio = pressure_drop(6e-3, g, ker) / pressure_drop(6e-3, g, water)
    assert ratio == pytest.approx((ker.mu / ker.rho) / (water.mu / water.rho), rel=1e-12)


def test_pressure_drop_by_hand_single_pass():
    # one layer, one circuit, four parallel 2 x 7 mm channels, 20 mm long
    g = MINIMAL
    flow = 1e-3
    u = flow / (AL.rho * 4 * 0.002 * 0.007)
    Dh = 2 * 0.002 * 0.007 / 0.009
    expected = friction_factor_re(2 / 7) * AL.mu * 0.020 * u / (2 * Dh**2)
    assert pressure_drop(flow, g, AL) == pytest.approx(expected, rel=1e-12)
    assert pressure_drop(0.0, g, AL) == 0.0


def test_pressure_drop_same_for_all_directions():
    g = ModuleGeometry()
    dps = {d: pressure_drop(6e-3, g, AL, d) for d in DIRECTIONS}
    assert max(dps.values()) == pytest.approx(min(dps.values()), rel=1e-12)


@given(D=st.floats(0.003, 0.012))
def test_pressure_drop_decreases_with_channel_height(D):
    lo = pressure_drop(6e-3, ModuleGeometry(channel_height=D), AL)
    hi = pressure_drop(6e-3, ModuleGeometry(channel_height=D * 1.05), AL)
    assert hi < lo


def test_conductance_values_respond_to_h_and_melt():
    net = network()
    k = np.full(len(net.nodes), 1.0)
    G1 = net.conductance_values(1000.0, k)
    G2 = net.conductance_values(2000.0, k)
    assert np.all(G2 >= G1) and np.any(G2 > G1)
    assert np.all(net.conductance_values(1000.0, 2 * k) >= G1)


def test_lumped_cell_network():
    net = lumped_cell_network(CELL, ambient_h=5.0)
    assert len(net.nodes) == 2 and len(net.conductances) == 1
    area = 2 * math.pi * 0.009 * 0.068 + 2 * math.pi * 0.009**2
    assert net.conductances[0].G == pytest.approx(5.0 * area)
    assert lumped_cell_network(CELL).conductances == ()


def test_csv_export(tmp_path):
    net = network(MINIMAL)
    net.write_csv(tmp_path / "n.csv", tmp_path / "e.csv")
    nodes = list(csv.DictReader(open(tmp_path / "n.csv")))
    edges = list(csv.DictReader(open(tmp_path / "e.csv")))
    assert len(nodes) == 5 and len(edges) == len(net.conductances)
    assert nodes[-1]["capacity_J_per_K"] == "inf"
