"""Batch front end: ``pflab {coeffs,spectrum,sweep,validate} [-c config.yaml] [--set key=value ...]``.

Exit codes: 0 success, 1 validation failure, 2 config error, 3 numerical
failure, 4 solver non-convergence.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from .config import COMMANDS, ConfigError, RunConfig, load_config

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_CONVERGENCE = 0, 1, 2, 3, 4


class NumericalFailure(RuntimeError):
    pass


def _set_threads(n):
    if n is None:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # env vars still apply to fresh processes
        return
    threadpool_limits(n)


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.dump(out / "config.resolved.yaml")
    return out


def _write_json(path, payload, cfg):
    with open(path, "w") as fh:
        json.dump({"config_hash": cfg.hash(), **payload}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _basis(cfg: RunConfig):
    from .field import build_grid
    from .fock import build_fock_basis
    from .validation import break_transversality
    grid = build_grid(cfg.grid.to_spec())
    if cfg.fault_injection == "non_transverse_eps":
        grid = break_transversality(grid)
    return build_fock_basis(grid, cfg.n_max, max_dimension=cfg.max_dimension)


def _rel(a, b):
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


def cmd_coeffs(cfg: RunConfig, log=print) -> int:
    from .coefficients import COEFFICIENTS, mc_coefficients, quadrature_coefficients
    from .field import FormFactor, build_grid
    from .fock import tensor_coefficients
    out = _out(cfg)
    spec = cfg.grid.to_spec()
    ff = FormFactor(spec.profile)
    records = {}
    for path, fn in (
        ("quadrature", lambda: quadrature_coefficients(ff, cfg.quadrature.resolution, cfg.quadrature.c3_resolution)),
        ("monte_carlo", lambda: mc_coefficients(ff, cfg.mc.n_samples, cfg.mc.seed, cfg.mc.n_streams)),
        ("grid_oracle", lambda: tensor_coefficients(build_grid(spec))),
    ):
        try:
            records[path] = fn()
        except Exception as exc:
            raise NumericalFailure(f"{path} path failed: {exc}") from exc
        log(f"{path:<12} " + " ".join(f"{c}={records[path].value(c):.6e}" for c in COEFFICIENTS))
    names = list(records)
    deltas = {}
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            deltas[f"{a}_vs_{b}"] = {c: _rel(records[a].value(c), records[b].value(c)) for c in COEFFICIENTS}
    for path, rec in records.items():
        _write_json(out / f"coeffs_{path}.json", {"record": rec.to_record()}, cfg)
    _write_json(out / "coeffs_deltas.json", {"deltas": deltas}, cfg)
    return EXIT_OK


def cmd_spectrum(cfg: RunConfig, log=print) -> int:
    from .analysis import Model
    from .eigen import ground_state, observables
    if len(cfg.alphas) != 1:
        raise ConfigError("spectrum needs exactly one alpha")
    alpha = float(cfg.alphas[0])
    out = _out(cfg)
    model = Model.build(_basis(cfg))
    e, v, res = ground_state(model.parts.at(alpha), cfg.solver.to_solver())
    rep = observables(v, model.basis, model.phi, alpha, e, res)
    rec = rep.to_record()
    rec.update(dimension=model.basis.dimension, n_max=cfg.n_max, grid=list(cfg.grid.to_spec().shape))
    _write_json(out / "spectrum.json", {"record": rec}, cfg)
    if cfg.write_vector:
        rep.write_vector_csv(out / "ground_state_vector.csv")
    log(f"alpha={alpha} E={e:.12e} <N_f>={rep.photon_expectation:.6e} residual={res:.2e}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, log=print) -> int:
    from .analysis import (
        InsufficientDataError, alpha_sweep, eta_scaling_check, find_pair, photon_bound_check, residual_slope,
    )
    if len(cfg.alphas) < 3:
        raise ConfigError(f"sweep needs >= 3 alphas, got {len(cfg.alphas)} (insufficient data)")
    out = _out(cfg)
    sweep = alpha_sweep(_basis(cfg), cfg.alphas, cfg.solver.to_solver())
    with open(out / "sweep.csv", "w") as fh:
        fh.write(f"# config_hash: {cfg.hash()}\n")
    tmp = out / "sweep.csv.body"
    sweep.write_csv(tmp)
    with open(out / "sweep.csv", "a") as fh:
        fh.write(tmp.read_text())
    tmp.unlink()
    for r in sweep.rows:
        log(f"alpha={r.alpha:<6} E={r.e_num:.10e} E_pert={r.e_pert:.10e} |diff|={r.residual:.3e} {r.status}")
    summary = sweep.summary()
    if len(sweep.good_rows) < 3:
        _write_json(out / "sweep_summary.json", {"summary": summary}, cfg)
        raise NumericalFailure(f"only {len(sweep.good_rows)} of {len(sweep.rows)} sweep points succeeded")
    try:
        summary["residual_fit"] = residual_slope(sweep).to_record()
    except InsufficientDataError as exc:
        summary["residual_fit"] = {"error": str(exc)}
    pb = photon_bound_check(sweep)
    summary["photon_bound"] = {"alphas": pb.alphas, "ratios": pb.ratios, "spread": pb.spread}
    pair = find_pair(sweep, 4.0)
    summary["eta_scaling"] = eta_scaling_check(*pair) if pair else None
    _write_json(out / "sweep_summary.json", {"summary": summary}, cfg)
    fit = summary["residual_fit"]
    if "slope" in fit:
        log(f"residual slope={fit['slope']:.4f} r2={fit['r_squared']:.5f}  N_f/alpha^2 spread={pb.spread:.4f}")
    return EXIT_OK


def cmd_validate(cfg: RunConfig, log=print) -> int:
    from .validation import format_table, structural_suite
    out = _out(cfg)
    alphas = sorted({0.0, *map(float, cfg.alphas)}) if cfg.alphas else [0.0]
    results = structural_suite(_basis(cfg), alphas=alphas, solver_config=cfg.solver.to_solver())
    log(format_table(results))
    _write_json(out / "validate.json",
                {"results": [{"name": r.name, "status": r.status, "detail": r.detail} for r in results]}, cfg)
    return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION


COMMAND_FUNCS = {"coeffs": cmd_coeffs, "spectrum": cmd_spectrum, "sweep": cmd_sweep, "validate": cmd_validate}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pflab", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("-c", "--config", help="YAML or JSON config file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key by dotted path, e.g. grid.n_radial=6")
    p.add_argument("-o", "--output-dir", help="shorthand for --set output_dir=...")
    return p


def run(cfg: RunConfig, log=print) -> int:
    from .eigen import ConvergenceError
    _set_threads(cfg.threads)
    t0 = time.perf_counter()
    try:
        code = COMMAND_FUNCS[cfg.command](cfg, log)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (NumericalFailure, ArithmeticError, ValueError, MemoryError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    log(f"[{cfg.command}] done in {time.perf_counter() - t0:.1f}s, config hash {cfg.hash()}")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.overrides)
    if args.output_dir:
        overrides.append(f"output_dir={args.output_dir}")
    try:
        cfg = load_config(args.config, overrides, command=args.command, env=os.environ)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
