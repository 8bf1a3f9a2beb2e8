"""Ground state of the truncated fiber Hamiltonian and its decomposition observables."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .fock import DiscretePhi, FockBasis, star_inner


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (best residual {residual:.3e})")
        self.residual = residual


class NormalizationError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 5000
    krylov_dimension: int = 40
    residual_tolerance: float = 1e-10
    dense_threshold: int = 1500
    restarts: int = 3
    seed: int = 0
    perturbation: float = 1e-3

    def __post_init__(self):
        if self.residual_tolerance <= 0:
            raise ValueError("residual_tolerance must be positive")


def _residual(H, v, e) -> float:
    return float(np.linalg.norm(H @ v - e * v) / np.linalg.norm(v))


def _is_diagonal(H) -> bool:
    coo = H.tocoo()
    return bool(np.all(coo.row == coo.col))


def ground_state(H, config: SolverConfig = SolverConfig()):
    """Lowest eigenpair (energy, vector, residual) of a real symmetric operator.

    Small problems go to dense ``eigh``; larger ones to ARPACK's implicitly
    restarted Lanczos started from the vacuum plus a seeded perturbation.  The
    relative residual ||H v - E v|| / ||v|| is certified against the tolerance.
    """
    n = H.shape[0]
    if sp.issparse(H) and H.dtype.kind == "c":
        raise TypeError("complex matrices are not expected for the P = 0 fiber")
    if sp.issparse(H) and _is_diagonal(H):
        # Krylov spaces of a diagonal matrix are tiny and ARPACK can lose the minimum
        d = H.diagonal()
        i = int(np.argmin(d))
        e, v = float(d[i]), np.zeros(n)
        v[i] = 1.0
    elif n <= config.dense_threshold:
        dense = H.toarray() if sp.issparse(H) else np.asarray(H)
        w, V = np.linalg.eigh(dense)
        e, v = float(w[0]), V[:, 0]
    else:
        rng = np.random.default_rng(config.seed)
        v0 = config.perturbation * rng.standard_normal(n)
        v0[0] += 1.0
        rayleigh_v0 = float(v0 @ (H @ v0) / (v0 @ v0))
        best = np.inf
        e = v = None
        for attempt in range(config.restarts):
            try:
                w, V = eigsh(H, k=1, which="SA", v0=v0, ncv=min(config.krylov_dimension, n - 1),
                             maxiter=config.max_iterations, tol=0.0)
            except ArpackNoConvergence as exc:
                if len(exc.eigenvalues):
                    w, V = exc.eigenvalues, exc.eigenvectors
                else:
                    continue
            cand_e, cand_v = float(w[0]), V[:, 0]
            res = _residual(H, cand_v, cand_e)
            if cand_e > rayleigh_v0 + 1e-12 * max(1.0, abs(rayleigh_v0)):
                # an eigenpair, but above the start vector's Rayleigh quotient: not the minimum
                res = np.inf
            if res < best:
                best, e, v = res, cand_e, cand_v
            if best <= config.residual_tolerance:
                break
            v0 = cand_v
        if v is None:
            raise ConvergenceError("Lanczos produced no Ritz pair", np.inf)
    if v[0] < 0:
        v = -v
    res = _residual(H, v, e)
    if res > config.residual_tolerance:
        raise ConvergenceError("ground state not converged", res)
    return e, v, res


@dataclass
class GroundStateReport:
    energy: float
    vector: np.ndarray = field(repr=False)
    photon_expectation: float
    eta: tuple
    r_norm: float
    r_star_norm: float
    residual: float
    alpha: float = 0.0

    def to_record(self) -> dict:
        rec = {k: v for k, v in asdict(self).items() if k != "vector"}
        rec["eta1"], rec["eta2"], rec["eta3"] = (float(x) for x in self.eta)
        del rec["eta"]
        rec["vacuum_component"] = float(self.vector[0])
        return rec

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)

    def write_vector_csv(self, path) -> None:
        nz = np.flatnonzero(self.vector)
        with open(path, "w") as fh:
            fh.write("index,amplitude\n")
            for i in nz:
                fh.write(f"{i},{float(self.vector[i])!r}\n")


def decompose(basis: FockBasis, psi: np.ndarray, phi: DiscretePhi, alpha: float):
    """(eta, R) with psi = Omega + 2 eta1 a^1.5 Phi1 + eta2 a Phi2 + 2 eta3 a^1.5 Phi3 + R.

    ``psi`` must already carry vacuum component 1.  An eta whose Phi has zero
    *-norm (e.g. kappa == 0) or alpha == 0 is reported as 0.
    """
    scales = (2.0 * alpha**1.5, alpha, 2.0 * alpha**1.5)
    eta = []
    rem = psi - basis.vacuum()
    for p, s in zip(phi.as_tuple(), scales):
        norm2 = star_inner(basis, p, p)
        if norm2 == 0.0 or s == 0.0:
            eta.append(0.0)
            continue
        e = star_inner(basis, p, psi) / (s * norm2)
        eta.append(e)
        rem = rem - e * s * p
    return tuple(eta), rem


def observables(vector: np.ndarray, basis: FockBasis, phi: DiscretePhi, alpha: float,
                energy: float = 0.0, residual: float = 0.0) -> GroundStateReport:
    if not np.isrealobj(vector):
        raise TypeError("expected a real ground-state vector")
    if abs(vector[0]) < 1e-300:
        raise NormalizationError("ground state has no vacuum component")
    psi = vector / vector[0]
    psi[0] = 1.0
    nf = float(psi @ (basis.photon_number * psi) / (psi @ psi))
    eta, R = decompose(basis, psi, phi, alpha)
    return GroundStateReport(
        energy=energy,
        vector=psi,
        photon_expectation=nf,
        eta=eta,
        r_norm=float(np.linalg.norm(R)),
        r_star_norm=float(np.sqrt(max(star_inner(basis, R, R), 0.0))),
        residual=residual,
        alpha=alpha,
    )
