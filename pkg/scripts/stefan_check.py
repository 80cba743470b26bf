"""Melt a 1D PCM slab from a hot wall and compare the front with the
Neumann similarity solution under grid/time refinement."""
import argparse

from hbtms.materials import PcmProps
from hbtms.solver import melt_slab, neumann_melt_front

# narrow mushy zone so the sharp-front solution applies
PCM = PcmProps(rho=770.0, c=2460.0, k_solid=0.1505, k_liquid=0.1505, T_S=35.0, T_L=35.01, latent_heat=160e3)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--wall", type=float, default=60.0, help="wall temperature, degC")
    ap.add_argument("--length", type=float, default=0.03, help="slab length, m")
    args = ap.parse_args()
    # run until the exact front reaches mid-slab
    t_end = (0.5 * args.length / neumann_melt_front(PCM, args.wall, 1.0)) ** 2
    exact = neumann_melt_front(PCM, args.wall, t_end)
    print(f"t_end = {t_end:.1f} s, exact front = {exact * 1e3:.4f} mm")
    for n, dt in ((25, 60.0), (50, 30.0), (100, 15.0), (200, 7.5)):
        res = melt_slab(PCM, args.wall, args.length, n, dt, t_end)
        err = res.front / exact - 1
        print(f"n={n:4d} dt={dt:5.1f}  front={res.front * 1e3:.4f} mm  error={err:+.3%}")


if __name__ == "__main__":
    main()
