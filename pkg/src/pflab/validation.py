"""Named structural invariants of the discrete model, shared by the CLI and the tests."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .field import TRANSVERSE_TOL, MomentumGrid, random_polarization_rotation
from .fock import (
    FockBasis, assemble_A, assemble_hamiltonian_parts, estimate_two_body_nnz,
    hamiltonian_columns, phi_grid, star_inner, tensor_coefficients,
)

PASS, FAIL, SKIPPED = "PASS", "FAIL", "SKIPPED"
TWO_BODY_BUDGET = 30_000_000


@dataclass
class CheckResult:
    name: str
    status: str
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status != FAIL


def _result(name, ok, detail=""):
    return CheckResult(name, PASS if ok else FAIL, detail)


def check_polarizations(grid: MomentumGrid) -> CheckResult:
    kdot = np.abs(np.einsum("nli,ni->nl", grid.eps, grid.k)) / grid.radii[:, None]
    unit = np.abs(np.linalg.norm(grid.eps, axis=-1) - 1.0).max()
    ortho = np.abs(np.einsum("ni,ni->n", grid.eps[:, 0], grid.eps[:, 1])).max()
    ok = kdot.max() <= TRANSVERSE_TOL and unit <= TRANSVERSE_TOL and ortho <= TRANSVERSE_TOL
    return _result("polarization_transversality", ok,
                   f"max|eps.khat|={kdot.max():.2e} max||eps|-1|={unit:.2e} max|eps+.eps-|={ortho:.2e}")


def check_adjoint(ops) -> CheckResult:
    bad = 0
    for am, ap in zip(ops.a_minus, ops.a_plus):
        d = (am.T.tocsr() != ap)
        bad += d.nnz
    return _result("adjoint_exact", bad == 0, f"{bad} differing entries")


def check_grading(basis: FockBasis, ops) -> CheckResult:
    n = basis.photon_number.astype(int)
    worst = 0
    for am in ops.a_minus:
        m = am.tocoo()
        if m.nnz and np.any(n[m.col] - n[m.row] != 1):
            worst += 1
    return _result("grading", worst == 0, "A^- lowers photon number by exactly one")


def check_transversality_commutator(basis: FockBasis, ops) -> CheckResult:
    """sum_i [P_f,i, A^+_i] must vanish up to rounding of the momentum sums."""
    pf = basis.pf_diag
    comm = None
    scale = 0.0
    for i in range(3):
        ap = ops.a_plus[i]
        c = sp.diags(pf[:, i]) @ ap - ap @ sp.diags(pf[:, i])
        comm = c if comm is None else comm + c
        if ap.nnz:
            scale = max(scale, float(np.abs(ap.data).max()))
    scale *= max(float(np.abs(pf).max()), 1.0)
    worst = float(np.abs(comm.data).max()) if comm.nnz else 0.0
    return _result("transversality_commutator", worst <= TRANSVERSE_TOL * scale,
                   f"max|[P_f.,A+]|={worst:.2e} (tol {TRANSVERSE_TOL * scale:.2e})")


def check_hamiltonian(basis: FockBasis, ops, alpha: float, parts=None, n_sample: int = 8,
                      rows_per_col: int = 64, seed: int = 0) -> list:
    """Vacuum identity and hermiticity at one alpha.

    With assembled parts the whole matrix is compared with its transpose; in any
    case a sample of columns from every sector is extracted factor by factor and
    checked against the matching rows.
    """
    out = []
    if parts is not None:
        H = parts.at(alpha)
        out.append(_result(f"vacuum_identity[alpha={alpha}]", H[0, 0] == 0.0, f"<Omega,H Omega>={float(H[0, 0])!r}"))
        diff = (H != H.T.tocsr()).nnz
        out.append(_result(f"hermiticity[alpha={alpha}]", diff == 0, f"{diff} asymmetric entries (full)"))
        return out

    rng = np.random.default_rng(seed)
    cols = [0]
    for n in range(1, basis.n_max + 1):
        sl = basis.sector_slice(n)
        size = sl.stop - sl.start
        cols.extend(rng.choice(np.arange(sl.start, sl.stop), size=min(n_sample, size), replace=False).tolist())
    Hc = hamiltonian_columns(ops, alpha, cols)
    vac = Hc[0, 0]
    out.append(_result(f"vacuum_identity[alpha={alpha}]", vac == 0.0, f"<Omega,H Omega>={float(vac)!r}"))
    pairs = []
    for j, c in enumerate(cols):
        col = Hc[:, j]
        rows = col.indices
        if len(rows) > rows_per_col:
            rows = rng.choice(rows, size=rows_per_col, replace=False)
        pairs.extend((int(r), int(c), float(col[r, 0])) for r in rows)
    rows_needed = sorted({p[0] for p in pairs})
    Hr = hamiltonian_columns(ops, alpha, rows_needed)
    where = {r: j for j, r in enumerate(rows_needed)}
    bad = sum(1 for r, c, v in pairs if Hr[c, where[r]] != v)
    out.append(_result(f"hermiticity[alpha={alpha}]", bad == 0,
                       f"{bad} of {len(pairs)} sampled entries asymmetric (factor-wise columns)"))
    return out


def check_sector_orthogonality(basis: FockBasis, phi) -> CheckResult:
    vecs = phi.as_tuple()
    worst = 0.0
    for i in range(3):
        for j in range(3):
            if i == j:
                continue
            ni = star_inner(basis, vecs[i], vecs[i])
            nj = star_inner(basis, vecs[j], vecs[j])
            if ni == 0 or nj == 0:
                continue
            worst = max(worst, abs(star_inner(basis, vecs[i], vecs[j])) / np.sqrt(ni * nj),
                        abs(float(vecs[i] @ vecs[j])) / (np.linalg.norm(vecs[i]) * np.linalg.norm(vecs[j])))
    sectors_ok = all(
        np.all(v[np.arange(basis.dimension)[basis.photon_number != n]] == 0) for n, v in zip((1, 2, 3), vecs)
    )
    return _result("sector_orthogonality", worst <= 1e-12 and sectors_ok, f"max relative overlap {worst:.2e}")


def check_polarization_invariance(grid: MomentumGrid, seed: int = 0) -> CheckResult:
    ref = tensor_coefficients(grid)
    rot = tensor_coefficients(grid.with_polarizations(
        random_polarization_rotation(grid.eps, np.random.default_rng(seed))))
    worst = 0.0
    for name in ("c2", "c_a", "c3", "c1"):
        a, b = ref.value(name), rot.value(name)
        scale = max(abs(a), ref.c2 * 1e-6)
        worst = max(worst, abs(a - b) / scale)
    return _result("polarization_invariance", worst <= 1e-10, f"max relative change {worst:.2e}")


def check_variational(basis, parts, phi, alpha: float, solver_config=None) -> CheckResult:
    from .analysis import trial_vector
    from .eigen import SolverConfig, ground_state
    H = parts.at(alpha)
    e, _, _ = ground_state(H, solver_config or SolverConfig())
    psi = trial_vector(basis, phi, alpha)
    et = float(psi @ (H @ psi) / (psi @ psi))
    return _result(f"variational[alpha={alpha}]", e <= et + 1e-10, f"E={e:.12e} E_trial={et:.12e}")


def structural_suite(basis: FockBasis, alphas=(0.0, 0.1), solver_config=None,
                     two_body_budget: int = TWO_BODY_BUDGET, variational: bool = True) -> list:
    grid = basis.grid
    results = [check_polarizations(grid)]
    ops = assemble_A(basis)
    results += [check_adjoint(ops), check_grading(basis, ops), check_transversality_commutator(basis, ops)]
    parts = None
    if estimate_two_body_nnz(basis) <= two_body_budget:
        parts = assemble_hamiltonian_parts(basis, ops)
    for a in alphas:
        results += check_hamiltonian(basis, ops, a, parts)
    if basis.n_max < 3:
        for name in ("sector_orthogonality", "polarization_invariance", "variational"):
            results.append(CheckResult(name, SKIPPED, "needs n_max >= 3 (Phi_3)"))
        return results
    phi = phi_grid(basis, ops)
    results.append(check_sector_orthogonality(basis, phi))
    results.append(check_polarization_invariance(grid))
    if not variational:
        results.append(CheckResult("variational", SKIPPED, "disabled"))
    elif parts is None:
        results.append(CheckResult("variational", SKIPPED, "basis too large to assemble H"))
    else:
        for a in alphas:
            if a > 0:
                results.append(check_variational(basis, parts, phi, a, solver_config))
    return results


def format_table(results) -> str:
    width = max(len(r.name) for r in results)
    return "\n".join(f"{r.name:<{width}}  {r.status:<7}  {r.detail}" for r in results)


def break_transversality(grid: MomentumGrid, tilt: float = 0.1) -> MomentumGrid:
    """Fault-injection hook: tilt every eps_+ towards khat so that eps . k != 0."""
    khat = grid.k / grid.radii[:, None]
    eps = grid.eps.copy()
    bent = eps[:, 0] + tilt * khat
    eps[:, 0] = bent / np.linalg.norm(bent, axis=1, keepdims=True)
    return grid.with_polarizations(eps)
