import json

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from pflab.analysis import trial_energy
from pflab.eigen import (
    ConvergenceError, NormalizationError, SolverConfig, decompose, ground_state, observables,
)
from pflab.fock import star_inner


def test_diagonal_examples():
    e, v, res = ground_state(sp.diags([3.0, 1.0, 2.0]).tocsr())
    assert e == 1.0 and res == 0.0
    np.testing.assert_array_equal(v, [0, 1, 0])


def test_alpha_zero_large_basis(model532):
    e, v, _ = ground_state(model532.parts.at(0.0))
    assert e == 0.0
    np.testing.assert_array_equal(v, model532.basis.vacuum())


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(residual_tolerance=0.0)


@settings(max_examples=15)
@given(st.integers(2, 40), st.integers(0, 2**31))
def test_dense_path_matches_eigvalsh(n, seed):
    a = np.random.default_rng(seed).standard_normal((n, n))
    H = sp.csr_matrix(a + a.T)
    e, v, res = ground_state(H)
    assert e == pytest.approx(np.linalg.eigvalsh(a + a.T)[0], abs=1e-10)
    assert res <= 1e-10 and v[0] >= 0


def test_lanczos_path_matches_dense(small_model):
    H = small_model.parts.at(0.3)
    e_dense = np.linalg.eigvalsh(H.toarray())[0]
    e, v, res = ground_state(H, SolverConfig(dense_threshold=100))
    assert e == pytest.approx(e_dense, abs=1e-12)
    assert res <= 1e-10
    assert np.linalg.norm(H @ v - e * v) <= 1e-10 * np.linalg.norm(v)


def test_lanczos_deterministic(small_model):
    H = small_model.parts.at(0.2)
    cfg = SolverConfig(dense_threshold=100, seed=3)
    a, b = ground_state(H, cfg), ground_state(H, cfg)
    assert a[0] == b[0] and np.array_equal(a[1], b[1])


def test_non_convergence_raises(small_model):
    H = small_model.parts.at(0.2)
    cfg = SolverConfig(dense_threshold=100, max_iterations=1, krylov_dimension=3, restarts=1)
    with pytest.raises(ConvergenceError) as exc:
        ground_state(H, cfg)
    assert exc.value.residual > 1e-10


def test_ground_state_below_trial(model532, solve532):
    e, _, _ = solve532(0.1)
    assert e <= trial_energy(model532.basis, 0.1, model532) + 1e-10


def test_observables_vacuum(small_model):
    b = small_model.basis
    rep = observables(b.vacuum(), b, small_model.phi, 0.1)
    assert rep.eta == (0.0, 0.0, 0.0)
    assert rep.r_norm == 0.0 and rep.photon_expectation == 0.0


def test_projection_identity(small_model):
    b, phi = small_model.basis, small_model.phi
    alpha = 0.1
    rep = observables(b.vacuum() + alpha * phi.phi2, b, phi, alpha)
    assert rep.eta[1] == pytest.approx(1.0, abs=1e-12)
    assert abs(rep.eta[0]) <= 1e-12 and abs(rep.eta[2]) <= 1e-12
    assert rep.r_norm <= 1e-12


def test_observables_rescale_and_reject(small_model):
    b, phi = small_model.basis, small_model.phi
    rep = observables(-3.0 * b.vacuum(), b, phi, 0.1)
    assert rep.vector[0] == 1.0
    with pytest.raises(NormalizationError):
        observables(np.zeros(b.dimension), b, phi, 0.1)
    with pytest.raises(TypeError):
        observables(b.vacuum().astype(complex), b, phi, 0.1)


@settings(max_examples=20)
@given(st.floats(0.01, 0.5), st.integers(0, 2**31))
def test_decomposition_reconstructs(small_model, alpha, seed):
    b, phi = small_model.basis, small_model.phi
    psi = np.random.default_rng(seed).standard_normal(b.dimension) * 0.1
    psi[0] = 1.0
    eta, R = decompose(b, psi, phi, alpha)
    s = (2 * alpha**1.5, alpha, 2 * alpha**1.5)
    rebuilt = b.vacuum() + sum(e * c * p for e, c, p in zip(eta, s, phi.as_tuple())) + R
    np.testing.assert_allclose(rebuilt, psi, atol=1e-12)
    for p in phi.as_tuple():
        assert abs(star_inner(b, p, R)) <= 1e-10 * np.sqrt(star_inner(b, p, p) * max(star_inner(b, R, R), 1e-300))


def test_ground_state_decomposition(model532, solve532):
    b, phi = model532.basis, model532.phi
    e, v, res = solve532(0.1)
    rep = observables(v, b, phi, 0.1, e, res)
    s = (2 * 0.1**1.5, 0.1, 2 * 0.1**1.5)
    R = rep.vector - b.vacuum() - sum(x * c * p for x, c, p in zip(rep.eta, s, phi.as_tuple()))
    for p in phi.as_tuple():
        assert abs(star_inner(b, p, R)) <= 1e-10
    assert rep.r_norm == pytest.approx(np.linalg.norm(R), rel=1e-10)
    assert rep.energy < 0 and rep.photon_expectation > 0


def test_report_serialization(small_model, tmp_path):
    b, phi = small_model.basis, small_model.phi
    e, v, res = ground_state(small_model.parts.at(0.1))
    rep = observables(v, b, phi, 0.1, e, res)
    rec = json.loads(rep.to_json())
    assert rec["vacuum_component"] == 1.0 and "vector" not in rec
    assert set(rec) >= {"energy", "eta1", "eta2", "eta3", "r_norm", "r_star_norm", "residual"}
    rep.write_vector_csv(tmp_path / "v.csv")
    data = np.loadtxt(tmp_path / "v.csv", delimiter=",", skiprows=1)
    assert data[0, 0] == 0 and data[0, 1] == 1.0
    assert len(data) == np.count_nonzero(rep.vector)
