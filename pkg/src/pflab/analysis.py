"""Physics-level checks on the discrete model: trial energy, alpha sweeps and scaling fits."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .coefficients import CoefficientSet, energy_expansion
from .eigen import GroundStateReport, SolverConfig, ground_state, observables
from .fock import (
    DiscretePhi, FieldOperators, FockBasis, HamiltonianParts, assemble_A,
    assemble_hamiltonian_parts, grid_coefficients, phi_grid, star_inner,
)

FLOAT_FLOOR = 1e-13
CSV_COLUMNS = ("alpha", "e_num", "e_pert", "residual", "nf_expect",
               "eta1", "eta2", "eta3", "r_norm", "r_star_norm", "status")


class InsufficientDataError(ValueError):
    pass


@dataclass
class Model:
    """Everything assembled once per (grid, n_max): operators, Phi's, grid coefficients."""

    basis: FockBasis
    ops: FieldOperators
    parts: HamiltonianParts
    phi: DiscretePhi
    coeffs: CoefficientSet

    @classmethod
    def build(cls, basis: FockBasis) -> "Model":
        ops = assemble_A(basis)
        parts = assemble_hamiltonian_parts(basis, ops)
        phi = phi_grid(basis, ops)
        return cls(basis, ops, parts, phi, grid_coefficients(basis, ops))


def trial_vector(basis: FockBasis, phi: DiscretePhi, alpha: float) -> np.ndarray:
    a32 = 2.0 * alpha**1.5
    return basis.vacuum() + a32 * phi.phi1 + alpha * phi.phi2 + a32 * phi.phi3


def trial_energy(basis: FockBasis, alpha: float, model: Model | None = None) -> float:
    """Rayleigh quotient of H(alpha) at Omega + 2 a^1.5 Phi1 + a Phi2 + 2 a^1.5 Phi3."""
    model = model or Model.build(basis)
    psi = trial_vector(basis, model.phi, alpha)
    H = model.parts.at(alpha)
    return float(psi @ (H @ psi) / (psi @ psi))


def quadratic_form_terms(model: Model, psi: np.ndarray, alpha: float) -> dict:
    """<psi, H psi> split into the free, cross, pair-annihilation and A+A- parts."""
    b, ops = model.basis, model.ops
    pf = b.pf_diag
    lowered = [ops.a_minus[i] @ psi for i in range(3)]
    free = star_inner(b, psi, psi)
    cross = 4.0 * math.sqrt(alpha) * sum(float(psi @ (pf[:, i] * lowered[i])) for i in range(3))
    pair = 2.0 * alpha * sum(float(psi @ (ops.a_minus[i] @ lowered[i])) for i in range(3))
    number = 2.0 * alpha * sum(float(l @ l) for l in lowered)
    return {"free": free, "cross": cross, "pair": pair, "number": number,
            "total": free + cross + pair + number}


@dataclass
class SweepRow:
    alpha: float
    e_num: float = math.nan
    e_pert: float = math.nan
    residual: float = math.nan
    nf_expect: float = math.nan
    eta1: float = math.nan
    eta2: float = math.nan
    eta3: float = math.nan
    r_norm: float = math.nan
    r_star_norm: float = math.nan
    e_trial: float = math.nan
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def eta(self):
        return (self.eta1, self.eta2, self.eta3)


@dataclass
class SweepResult:
    rows: list
    grid: tuple
    n_max: int
    provenance: str = "grid_oracle"
    coeffs: CoefficientSet | None = None

    def __post_init__(self):
        alphas = [r.alpha for r in self.rows]
        if any(b <= a for a, b in zip(alphas, alphas[1:])):
            raise ValueError("sweep alphas must be strictly increasing")

    @property
    def good_rows(self):
        return [r for r in self.rows if r.ok]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for r in self.rows:
                vals = asdict(r)
                w.writerow([vals[c] if c == "status" else repr(float(vals[c])) for c in CSV_COLUMNS])

    def summary(self) -> dict:
        return {"grid": list(self.grid), "n_max": self.n_max, "provenance": self.provenance,
                "n_rows": len(self.rows), "n_ok": len(self.good_rows),
                "coefficients": self.coeffs.to_record() if self.coeffs else None}


def sweep_point(model: Model, alpha: float, solver_config: SolverConfig) -> tuple[SweepRow, GroundStateReport]:
    H = model.parts.at(alpha)
    e, v, res = ground_state(H, solver_config)
    rep = observables(v, model.basis, model.phi, alpha, e, res)
    e_pert = energy_expansion(model.coeffs, alpha)
    psi_t = trial_vector(model.basis, model.phi, alpha)
    row = SweepRow(
        alpha=alpha, e_num=e, e_pert=e_pert, residual=abs(e - e_pert),
        nf_expect=rep.photon_expectation, eta1=rep.eta[0], eta2=rep.eta[1], eta3=rep.eta[2],
        r_norm=rep.r_norm, r_star_norm=rep.r_star_norm,
        e_trial=float(psi_t @ (H @ psi_t) / (psi_t @ psi_t)),
    )
    return row, rep


def alpha_sweep(basis: FockBasis, alphas, solver_config: SolverConfig = SolverConfig(),
                model: Model | None = None) -> SweepResult:
    alphas = sorted(float(a) for a in alphas)
    if any(a <= 0 or a > 0.5 for a in alphas):
        raise ValueError("sweep alphas must lie in (0, 0.5]")
    model = model or Model.build(basis)
    rows = []
    for a in alphas:
        try:
            rows.append(sweep_point(model, a, solver_config)[0])
        except Exception as exc:  # per-point failures are recorded, the sweep continues
            rows.append(SweepRow(alpha=a, status=f"failed: {exc}"))
    return SweepResult(rows, basis.grid.spec.shape, basis.n_max, "grid_oracle", model.coeffs)


@dataclass
class FitReport:
    slope: float
    intercept: float
    r_squared: float
    points: list = field(default_factory=list)

    def to_record(self) -> dict:
        return asdict(self)


def power_law_fit(x, y) -> FitReport:
    """Least squares of log|y| against log x, dropping |y| below the float floor."""
    pts = [(float(a), float(b)) for a, b in zip(x, y) if math.isfinite(b) and abs(b) >= FLOAT_FLOOR]
    if len(pts) < 3:
        raise InsufficientDataError(f"need >= 3 usable points, have {len(pts)}")
    lx = np.log([p[0] for p in pts])
    ly = np.log([abs(p[1]) for p in pts])
    slope, intercept = np.polyfit(lx, ly, 1)
    fit = slope * lx + intercept
    ss_res = float(np.sum((ly - fit) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return FitReport(float(slope), float(intercept), r2, pts)


def residual_slope(sweep: SweepResult) -> FitReport:
    rows = sweep.good_rows
    return power_law_fit([r.alpha for r in rows], [r.e_num - r.e_pert for r in rows])


@dataclass
class PhotonBoundReport:
    alphas: list
    ratios: list
    max_ratio: float
    min_ratio: float

    @property
    def spread(self) -> float:
        return self.max_ratio / self.min_ratio if self.min_ratio > 0 else math.inf


def photon_bound_check(sweep: SweepResult) -> PhotonBoundReport:
    rows = sweep.good_rows
    if not rows:
        raise InsufficientDataError("empty sweep")
    ratios = [r.nf_expect / r.alpha**2 for r in rows]
    return PhotonBoundReport([r.alpha for r in rows], ratios, max(ratios), min(ratios))


def empirical_order(alpha_lo: float, alpha_hi: float, v_lo: float, v_hi: float) -> float:
    """log(|v_hi| / |v_lo|) / log(alpha_hi / alpha_lo); NaN below the float floor."""
    if abs(v_lo) < FLOAT_FLOOR or abs(v_hi) < FLOAT_FLOOR:
        return math.nan
    return math.log(abs(v_hi) / abs(v_lo)) / math.log(alpha_hi / alpha_lo)


def eta_scaling_check(lo: SweepRow, hi: SweepRow) -> dict:
    if not hi.alpha > lo.alpha:
        raise ValueError("second sweep point must have the larger alpha")
    out = {"alpha_lo": lo.alpha, "alpha_hi": hi.alpha}
    for name in ("eta1", "eta2", "eta3"):
        out[f"{name}_order"] = empirical_order(lo.alpha, hi.alpha, getattr(lo, name) - 1.0, getattr(hi, name) - 1.0)
    out["r_star_order"] = empirical_order(lo.alpha, hi.alpha, lo.r_star_norm, hi.r_star_norm)
    out["r_order"] = empirical_order(lo.alpha, hi.alpha, lo.r_norm, hi.r_norm)
    return out


def find_pair(sweep: SweepResult, ratio: float = 4.0):
    """First pair of successful rows whose alphas differ by ``ratio``."""
    rows = sweep.good_rows
    for i, lo in enumerate(rows):
        for hi in rows[i + 1:]:
            if abs(hi.alpha / lo.alpha - ratio) < 1e-9:
                return lo, hi
    return None


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=float)
