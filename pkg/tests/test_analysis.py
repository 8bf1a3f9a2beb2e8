import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pflab.analysis import (
    CSV_COLUMNS, InsufficientDataError, SweepResult, SweepRow, alpha_sweep, empirical_order,
    eta_scaling_check, find_pair, photon_bound_check, power_law_fit, quadratic_form_terms, residual_slope,
    trial_energy, trial_vector,
)
from pflab.coefficients import energy_expansion
from pflab.eigen import SolverConfig, ground_state, observables


def test_trial_energy_alpha_zero(small_model):
    assert trial_energy(small_model.basis, 0.0, small_model) == 0.0


@settings(max_examples=8)
@given(st.floats(0.001, 0.5))
def test_trial_energy_is_upper_bound(small_model, alpha):
    e, _, _ = ground_state(small_model.parts.at(alpha))
    assert e <= trial_energy(small_model.basis, alpha, small_model) + 1e-10


def test_trial_energy_expansion_order(small_model):
    alphas = [0.01, 0.02, 0.04, 0.08]
    diffs = [trial_energy(small_model.basis, a, small_model) - energy_expansion(small_model.coeffs, a) for a in alphas]
    assert residual_slope_of(alphas, diffs) >= 3.5


def residual_slope_of(x, y):
    return power_law_fit(x, y).slope


@settings(max_examples=10)
@given(st.floats(0.0, 0.5), st.integers(0, 2**31))
def test_quadratic_form_terms_sum(small_model, alpha, seed):
    psi = np.random.default_rng(seed).standard_normal(small_model.basis.dimension)
    terms = quadratic_form_terms(small_model, psi, alpha)
    direct = float(psi @ (small_model.parts.at(alpha) @ psi))
    assert terms["total"] == pytest.approx(direct, rel=1e-10, abs=1e-10)
    assert terms["free"] >= 0 and terms["number"] >= 0


def test_synthetic_slopes():
    a = np.array([0.02, 0.04, 0.08, 0.16])
    assert residual_slope(SweepResult([SweepRow(x, e_num=x**4, e_pert=0.0) for x in a], (1, 1, 1), 3)).slope \
        == pytest.approx(4.0, abs=1e-6)
    assert power_law_fit(a, a**3).slope == pytest.approx(3.0, abs=1e-12)
    with pytest.raises(InsufficientDataError):
        power_law_fit(a[:2], a[:2] ** 4)
    with pytest.raises(InsufficientDataError):
        power_law_fit(a, [1e-20, 1e-20, 1.0, 2.0])


def test_synthetic_eta_orders():
    lo = SweepRow(0.04, eta1=1 + 0.04, eta2=1 + 0.04**2, eta3=1 - 0.04, r_norm=0.04, r_star_norm=0.04**2)
    hi = SweepRow(0.16, eta1=1 + 0.16, eta2=1 + 0.16**2, eta3=1 - 0.16, r_norm=0.16, r_star_norm=0.16**2)
    out = eta_scaling_check(lo, hi)
    assert out["eta2_order"] == pytest.approx(2.0, abs=1e-12)
    assert out["eta1_order"] == pytest.approx(1.0, abs=1e-12)
    assert out["eta3_order"] == pytest.approx(1.0, abs=1e-12)
    assert out["r_star_order"] == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(ValueError):
        eta_scaling_check(hi, lo)
    assert math.isnan(empirical_order(0.1, 0.2, 0.0, 1.0))


def test_photon_bound_synthetic():
    rows = [SweepRow(a, nf_expect=0.1 * a * a * (1 + a)) for a in (0.02, 0.04, 0.08)]
    rep = photon_bound_check(SweepResult(rows, (1, 1, 1), 3))
    assert rep.spread == pytest.approx(1.08 / 1.02, rel=1e-12)
    with pytest.raises(InsufficientDataError):
        photon_bound_check(SweepResult([], (1, 1, 1), 3))


def test_sweep_preconditions(small_basis):
    with pytest.raises(ValueError):
        alpha_sweep(small_basis, [0.0, 0.1, 0.2])
    with pytest.raises(ValueError):
        alpha_sweep(small_basis, [0.1, 0.6])
    with pytest.raises(ValueError):
        SweepResult([SweepRow(0.2), SweepRow(0.1)], (1, 1, 1), 3)


def test_sweep_marks_failed_rows(small_model):
    cfg = SolverConfig(dense_threshold=100, max_iterations=1, krylov_dimension=3, restarts=1)
    res = alpha_sweep(small_model.basis, [0.1, 0.2], cfg, model=small_model)
    assert all(r.status.startswith("failed") for r in res.rows)
    assert res.good_rows == []


def test_sweep_energies_negative_decreasing(sweep532):
    e = [r.e_num for r in sweep532.rows]
    assert all(r.ok for r in sweep532.rows)
    assert all(x < 0 for x in e)
    assert all(b < a for a, b in zip(e, e[1:]))


def test_sweep_residual_ratio(sweep532):
    lo, hi = sweep532.rows[0], sweep532.rows[-1]
    assert lo.residual / hi.residual <= 2 * (lo.alpha / hi.alpha) ** 3


def test_sweep_variational(sweep532):
    for r in sweep532.rows:
        assert r.e_num <= r.e_trial + 1e-10


def test_eta2_close_to_one_at_alpha_005(model532, solve532):
    e, v, res = solve532(0.05)
    rep = observables(v, model532.basis, model532.phi, 0.05, e, res)
    assert abs(rep.eta[1] - 1.0) <= 1e-2


def test_find_pair(sweep532):
    lo, hi = find_pair(sweep532, 4.0)
    assert (lo.alpha, hi.alpha) == (0.02, 0.08)
    assert find_pair(sweep532, 3.0) is None


def test_sweep_csv(sweep532, tmp_path):
    sweep532.write_csv(tmp_path / "s.csv")
    with open(tmp_path / "s.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 5
    assert float(rows[1][1]) == sweep532.rows[0].e_num
    summary = sweep532.summary()
    assert summary["n_ok"] == 4 and summary["coefficients"]["provenance"] == "grid_oracle"
