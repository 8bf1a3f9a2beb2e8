"""alpha sweep on one grid: energies, residual fit, photon ratios, eta/R orders.

    python3 scripts/run_sweep.py --grid 5 3 2 --alphas 0.02 0.04 0.08 0.16 --out sweep_out
"""
import argparse
import json
from pathlib import Path

from pflab.analysis import Model, alpha_sweep, eta_scaling_check, find_pair, photon_bound_check, residual_slope
from pflab.eigen import SolverConfig
from pflab.field import CutoffProfile, GridSpec, build_grid
from pflab.fock import build_fock_basis


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--grid", type=int, nargs=3, default=[5, 3, 2])
    ap.add_argument("--n-max", type=int, default=3)
    ap.add_argument("--cutoff", choices=["smoothstep", "sharp"], default="smoothstep")
    ap.add_argument("--alphas", type=float, nargs="+", default=[0.02, 0.04, 0.08, 0.16])
    ap.add_argument("--out", default="sweep_out")
    args = ap.parse_args()

    profile = CutoffProfile() if args.cutoff == "smoothstep" else CutoffProfile.sharp(1.0)
    basis = build_fock_basis(build_grid(GridSpec(*args.grid, profile)), args.n_max)
    print(f"grid {tuple(args.grid)} n_max {args.n_max}: dimension {basis.dimension}")
    model = Model.build(basis)
    sweep = alpha_sweep(basis, args.alphas, SolverConfig(), model=model)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sweep.write_csv(out / "sweep.csv")
    print(f"{'alpha':>6} {'E_num':>16} {'E_pert':>16} {'diff':>10} {'N_f/a^2':>8} {'eta2':>8} {'|R|_*':>9}")
    for r in sweep.rows:
        print(f"{r.alpha:6.3f} {r.e_num:16.10e} {r.e_pert:16.10e} {r.e_num - r.e_pert:10.2e} "
              f"{r.nf_expect / r.alpha**2:8.4f} {r.eta2:8.5f} {r.r_star_norm:9.2e}")

    summary = sweep.summary()
    if len(sweep.good_rows) >= 3:
        fit = residual_slope(sweep)
        summary["residual_fit"] = fit.to_record()
        summary["photon_spread"] = photon_bound_check(sweep).spread
        print(f"residual slope {fit.slope:.4f} (r2 {fit.r_squared:.5f})")
    pair = find_pair(sweep, 4.0)
    if pair:
        summary["eta_scaling"] = eta_scaling_check(*pair)
        print("orders:", {k: round(v, 3) for k, v in summary["eta_scaling"].items() if k.endswith("order")})
    (out / "summary.json").write_text(json.dumps(summary, indent=2, default=float))


if __name__ == "__main__":
    main()
