"""Quadrature vs Monte Carlo vs grid oracle for all four coefficients.

    python3 scripts/compare_coefficients.py --cutoff sharp --samples 100000 --grid 8 6 6
"""
import argparse
import math

from pflab.coefficients import COEFFICIENTS, mc_coefficients, quadrature_coefficients
from pflab.field import CutoffProfile, FormFactor, GridSpec, build_grid
from pflab.fock import tensor_coefficients


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cutoff", choices=["smoothstep", "sharp"], default="smoothstep")
    ap.add_argument("--samples", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=20240601)
    ap.add_argument("--grid", type=int, nargs=3, default=[6, 4, 4])
    args = ap.parse_args()

    profile = CutoffProfile() if args.cutoff == "smoothstep" else CutoffProfile.sharp(1.0)
    ff = FormFactor(profile)
    quad = quadrature_coefficients(ff)
    mc = mc_coefficients(ff, args.samples, args.seed)
    grid = tensor_coefficients(build_grid(GridSpec(*args.grid, profile)))
    print(f"commutator constant {quad.meta['commutator_constant']:.12f}")
    print(f"{'':4} {'quadrature':>14} {'err':>9} {'monte carlo':>14} {'sigma':>9} {'grid':>14} {'z(mc-quad)':>10}")
    for c in COEFFICIENTS:
        sig = math.hypot(mc.errors[c], quad.errors[c])
        z = (mc.value(c) - quad.value(c)) / sig if sig else float("nan")
        print(f"{c:4} {quad.value(c):14.8e} {quad.errors[c]:9.1e} {mc.value(c):14.8e} {mc.errors[c]:9.1e} "
              f"{grid.value(c):14.8e} {z:10.2f}")
    print(f"third-order coefficient 2c_a - 4c3 - 4c1: quadrature {quad.third_order:.6e}, grid {grid.third_order:.6e}")


if __name__ == "__main__":
    main()
