import json
import math

import pytest
import yaml
from hypothesis import given, strategies as st

from pflab.cli import main
from pflab.config import THREADS_ENV, ConfigError, RunConfig, apply_override, load_config

SMALL = ["--set", "grid.n_radial=3", "--set", "grid.n_polar=2", "--set", "grid.n_azimuthal=2"]


def run(tmp_path, name, *args):
    out = tmp_path / name
    code = main([*args, "-o", str(out), *SMALL])
    return code, out


def read(path):
    return json.loads(path.read_text())


def test_defaults_and_hash():
    a = load_config()
    assert a.command == "validate" and a.grid.n_radial == 5 and a.n_max == 3
    b = load_config(overrides=["output_dir=elsewhere"])
    assert a.hash() == b.hash()
    assert load_config(overrides=["n_max=2"]).hash() != a.hash()


def test_file_and_overrides(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"command": "sweep", "grid": {"n_radial": 4, "cutoff_kind": "sharp"}, "alphas": [0.1]}))
    cfg = load_config(p, ["grid.n_polar=5", "mc.seed=9", "solver.residual_tolerance=1e-9"])
    assert (cfg.command, cfg.grid.n_radial, cfg.grid.n_polar, cfg.mc.seed) == ("sweep", 4, 5, 9)
    assert cfg.grid.cutoff_kind == "sharp" and cfg.solver.residual_tolerance == 1e-9
    y = tmp_path / "c.yaml"
    y.write_text("grid:\n  n_azimuthal: 3\nalphas: [0.05, 0.1, 0.2]\n")
    assert load_config(y).grid.n_azimuthal == 3


@pytest.mark.parametrize("overrides", [["bogus=1"], ["grid.n_radial_x=3"], ["command=plot"], ["n_max=0"],
                                       ["grid.cutoff_kind=gauss"], ["alphas=0.1"], ["fault_injection=other"],
                                       ["write_vector=3"], ["novalue"]])
def test_rejects_bad_config(overrides):
    with pytest.raises(ConfigError):
        load_config(overrides=overrides)


def test_threads_from_environment():
    assert load_config(env={THREADS_ENV: "2"}).threads == 2
    assert load_config(overrides=["threads=1"], env={THREADS_ENV: "2"}).threads == 1
    with pytest.raises(ConfigError):
        load_config(env={THREADS_ENV: "many"})


@given(st.integers(1, 50), st.floats(1e-12, 1e-6))
def test_override_roundtrip(n, tol):
    d = {}
    apply_override(d, f"grid.n_radial={n}")
    apply_override(d, f"solver.residual_tolerance={tol!r}")
    assert d == {"grid": {"n_radial": n}, "solver": {"residual_tolerance": tol}}


def test_resolved_config_echoed(tmp_path):
    code, out = run(tmp_path, "v", "validate", "--set", "alphas=[0.1]")
    assert code == 0
    echoed = yaml.safe_load((out / "config.resolved.yaml").read_text())
    assert echoed["grid"]["n_radial"] == 3
    assert read(out / "validate.json")["config_hash"] == echoed["config_hash"]


def test_validate_fault_and_skip(tmp_path):
    code, out = run(tmp_path, "f", "validate", "--set", "alphas=[0.1]", "--set", "fault_injection=non_transverse_eps")
    assert code == 1
    res = {r["name"]: r["status"] for r in read(out / "validate.json")["results"]}
    assert res["polarization_transversality"] == "FAIL"
    code, out = run(tmp_path, "s", "validate", "--set", "alphas=[0.1]", "--set", "n_max=1")
    assert code == 0
    res = {r["name"]: r["status"] for r in read(out / "validate.json")["results"]}
    assert res["sector_orthogonality"] == "SKIPPED"


def test_config_error_exit_code(tmp_path):
    assert main(["validate", "--set", "nope=1"]) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("grid: [unclosed\n")
    assert main(["validate", "-c", str(bad)]) == 2
    assert main(["validate", "-c", str(tmp_path / "missing.yaml")]) == 2


def test_coeffs_sharp(tmp_path):
    args = ("coeffs", "--set", "grid.cutoff_kind=sharp", "--set", "mc.n_samples=10000",
            "--set", "quadrature.c3_resolution=4")
    code, out = run(tmp_path, "c", *args)
    assert code == 0
    quad = read(out / "coeffs_quadrature.json")["record"]
    assert abs(quad["commutator_constant"] - 1 / math.pi) <= 1e-10
    deltas = read(out / "coeffs_deltas.json")["deltas"]
    assert set(deltas) == {"quadrature_vs_monte_carlo", "quadrature_vs_grid_oracle", "monte_carlo_vs_grid_oracle"}
    code, out2 = run(tmp_path, "c2", *args)
    assert (out / "coeffs_monte_carlo.json").read_bytes() == (out2 / "coeffs_monte_carlo.json").read_bytes()


def test_spectrum(tmp_path):
    code, out = run(tmp_path, "z", "spectrum", "--set", "alphas=[0.0]")
    assert code == 0 and read(out / "spectrum.json")["record"]["energy"] == 0.0
    code, out = run(tmp_path, "a", "spectrum", "--set", "alphas=[0.1]", "--set", "write_vector=true")
    rec = read(out / "spectrum.json")["record"]
    assert code == 0 and rec["energy"] < 0 and rec["photon_expectation"] > 0 and rec["vacuum_component"] == 1.0
    assert (out / "ground_state_vector.csv").exists()
    assert run(tmp_path, "b", "spectrum", "--set", "alphas=[0.1,0.2]")[0] == 2


def test_spectrum_non_convergence(tmp_path):
    code, _ = run(tmp_path, "n", "spectrum", "--set", "alphas=[0.1]", "--set", "solver.max_iterations=1",
                  "--set", "solver.krylov_dimension=3", "--set", "solver.restarts=1")
    assert code == 4


def test_sweep(tmp_path):
    assert run(tmp_path, "one", "sweep", "--set", "alphas=[0.1]")[0] == 2
    code, out = run(tmp_path, "s1", "sweep")
    assert code == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("# config_hash:")
    assert lines[1].split(",")[:10] == ["alpha", "e_num", "e_pert", "residual", "nf_expect",
                                        "eta1", "eta2", "eta3", "r_norm", "r_star_norm"]
    assert len(lines) == 6
    summary = read(out / "sweep_summary.json")["summary"]
    assert {"residual_fit", "photon_bound", "eta_scaling"} <= set(summary)
    _, out2 = run(tmp_path, "s2", "sweep")
    assert (out / "sweep.csv").read_bytes() == (out2 / "sweep.csv").read_bytes()


def test_runconfig_dump(tmp_path):
    cfg = RunConfig()
    cfg.dump(tmp_path / "c.yaml")
    data = yaml.safe_load((tmp_path / "c.yaml").read_text())
    data.pop("config_hash")
    (tmp_path / "d.yaml").write_text(yaml.safe_dump(data))
    assert load_config(tmp_path / "d.yaml").hash() == cfg.hash()
