"""Grid refinement of the coefficients against the continuum values.

Uses the mode-tensor grid path, so no Fock space is built.

    python3 scripts/convergence_study.py --cutoff smoothstep --out convergence.csv
"""
import argparse
import csv
import time

from pflab.coefficients import COEFFICIENTS, quadrature_coefficients
from pflab.field import CutoffProfile, FormFactor, GridSpec, build_grid
from pflab.fock import tensor_coefficients

GRIDS = [(3, 2, 2), (4, 3, 2), (5, 3, 2), (6, 4, 4), (8, 6, 6)]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cutoff", choices=["smoothstep", "sharp"], default="smoothstep")
    ap.add_argument("--grids", nargs="*", default=None, help="e.g. 4x3x2 6x4x4")
    ap.add_argument("--out", default="convergence.csv")
    args = ap.parse_args()

    profile = CutoffProfile() if args.cutoff == "smoothstep" else CutoffProfile.sharp(1.0)
    grids = [tuple(int(x) for x in g.split("x")) for g in args.grids] if args.grids else GRIDS
    cont = quadrature_coefficients(FormFactor(profile))
    print("continuum", " ".join(f"{c}={cont.value(c):.6e}" for c in COEFFICIENTS))
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n_radial", "n_polar", "n_azimuthal", "n_modes", *COEFFICIENTS,
                    *(f"rel_gap_{c}" for c in COEFFICIENTS if c != "c1"), "seconds"])
        for shape in grids:
            t0 = time.perf_counter()
            grid = build_grid(GridSpec(*shape, profile))
            cs = tensor_coefficients(grid)
            dt = time.perf_counter() - t0
            gaps = [abs(cs.value(c) - cont.value(c)) / cont.value(c) for c in COEFFICIENTS if c != "c1"]
            w.writerow([*shape, grid.n_modes, *(repr(cs.value(c)) for c in COEFFICIENTS),
                        *(repr(g) for g in gaps), f"{dt:.2f}"])
            print(f"{shape}: " + " ".join(f"{c}={cs.value(c):.6e}" for c in COEFFICIENTS)
                  + f"  c2 gap {gaps[0]:.2e}  ({dt:.1f}s)")


if __name__ == "__main__":
    main()
