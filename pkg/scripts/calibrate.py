"""Pick the internal-resistance fixture.

Solves for R such that the reference module run (3C for 900 s, Nf(Al) at
6 g/s, direction 4, D = 7 mm) ends at a target maximum cell temperature,
then prints the adiabatic lumped-cell rise implied by that R for context.

    python3 scripts/calibrate.py [--target 40.32]
"""
import argparse
from dataclasses import replace

from scipy.optimize import brentq

from hbtms.config import STUDY_FLOW, preset
from hbtms.control import FlowSchedule
from hbtms.heatgen import cell_current
from hbtms.solver import simulate


def final_tmax(scenario, R):
    s = replace(scenario, battery=replace(scenario.battery, internal_resistance=R))
    return float(simulate(s)["T_max"][-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--target", type=float, default=40.32, help="final T_max, degC")
    args = ap.parse_args()
    ref = replace(preset("default-3c").base, schedule=FlowSchedule(v_m=STUDY_FLOW))
    R = brentq(lambda r: final_tmax(ref, r) - args.target, 0.01, 0.5, xtol=1e-6)
    b = ref.battery
    I = cell_current(ref.discharge.c_rate, b.capacity)
    rise = I * I * R * ref.discharge.duration / b.heat_capacity
    print(f"R = {R:.6f} ohm gives final T_max = {final_tmax(ref, R):.4f} degC")
    print(f"adiabatic lumped-cell rise at that R: {rise:.1f} K")


if __name__ == "__main__":
    main()
