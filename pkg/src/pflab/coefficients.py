"""Continuum values of the order alpha^2 and alpha^3 ground-state energy coefficients.

    E(alpha) = -alpha^2 c2 + alpha^3 (2 c_a - 4 c3 - 4 c1) + O(alpha^4)

with c2 = ||Phi_2||_*^2, c_a = ||A^- Phi_2||^2, c3 = ||Phi_3||_*^2, c1 = ||Phi_1||_*^2.

Writing Phi_2 = sum_{ab} Phi(a, b) a*_a a*_b Omega with the symmetric kernel

    Phi(k, l; k', m) = -f(k) f(k') (eps_l(k) . eps_m(k')) / D2(k, k'),
    D2(k, k') = |k| + |k'| + |k + k'|^2,

the bosonic norms give

    c2 = 2   int dk dk' f^2 f'^2 sum_pol (eps . eps')^2 / D2
    c_a = 4  sum_m int dk' | sum_l int dk f(k) eps_l(k) Phi(k, l; k', m) |^2
    c1 = 4   sum_m int dk' | sum_l int dk f(k) (eps_l(k) . k') Phi(k, l; k', m) |^2 / (|k'| + |k'|^2)
    c3 = 6   int dk1 dk2 dk3 sum_pol T_sym^2 / D3,

where T(xy, z) = f(k_z) (eps_z . (k_x + k_y)) Phi(x, y), T_sym is its average over
the three cyclic placements, and D3 = |k1| + |k2| + |k3| + |k1 + k2 + k3|^2.  The
inner integral in c1 is a vector field of the form a(|k'|) eps_m(k'), which is
transverse to k', so c1 vanishes in the continuum; on a grid it is a small
discretization artifact.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .field import CutoffProfile, FormFactor, kappa_eval, polarization_vectors, random_polarization_rotation

Provenance = Literal["quadrature", "monte_carlo", "grid_oracle"]
COEFFICIENTS = ("c2", "c_a", "c3", "c1")


class DegenerateMeasureError(ValueError):
    """Importance density has zero normalization (kappa == 0)."""


@dataclass
class CoefficientSet:
    c2: float
    c_a: float
    c3: float
    c1: float
    provenance: Provenance = "quadrature"
    errors: dict = field(default_factory=lambda: {name: 0.0 for name in COEFFICIENTS})
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in COEFFICIENTS:
            self.errors.setdefault(name, 0.0)
            if self.errors[name] < 0:
                raise ValueError("error estimates must be non-negative")

    def value(self, name: str) -> float:
        return float(getattr(self, name))

    @property
    def third_order(self) -> float:
        return 2.0 * self.c_a - 4.0 * self.c3 - 4.0 * self.c1

    def to_record(self) -> dict:
        rec = {name: self.value(name) for name in COEFFICIENTS}
        rec.update({f"err_{name}": float(self.errors[name]) for name in COEFFICIENTS})
        rec["provenance"] = self.provenance
        rec.update(self.meta)
        return rec

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)


def energy_expansion(coeffs: CoefficientSet, alpha: float) -> float:
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    return -alpha**2 * coeffs.c2 + alpha**3 * coeffs.third_order


@dataclass
class EnergyExpansion:
    coeffs: CoefficientSet

    def __call__(self, alpha):
        return energy_expansion(self.coeffs, alpha)


# ---------------------------------------------------------------- quadrature

def gauss_panel(a: float, b: float, n: int, graded: bool = False):
    """n-point Gauss-Legendre rule on [a, b]; ``graded`` maps r = a + (b-a) u^2."""
    x, w = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (x + 1.0)
    w = 0.5 * w
    if graded:
        return a + (b - a) * u * u, w * 2.0 * (b - a) * u
    return a + (b - a) * u, w * (b - a)


def radial_rule(profile: CutoffProfile, n: int):
    """Composite rule on (0, support] split where kappa is not smooth.

    The first panel is graded toward r = 0, where the integrands behave like
    homogeneous functions of the radii.
    """
    pts = profile.breakpoints
    nodes, weights = [], []
    for i, (a, b) in enumerate(zip(pts[:-1], pts[1:])):
        if b > a:
            x, w = gauss_panel(a, b, n, graded=(i == 0))
            nodes.append(x)
            weights.append(w)
    if not nodes:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(nodes), np.concatenate(weights)


def radial_moment(profile: CutoffProfile, n: int = 16) -> float:
    """int_0^inf r kappa(r)^2 dr (exact for the polynomial ramps)."""
    r, w = radial_rule(profile, n)
    if len(r) == 0:
        return 0.0
    return float(np.sum(w * r * kappa_eval(profile, r) ** 2))


def commutator_constant(ff: FormFactor) -> float:
    """sum_i [A^-_i, A^+_i] = 2 int f(k)^2 dk = (2/pi) int r kappa^2 dr."""
    return 2.0 / np.pi * radial_moment(ff.profile)


def _c2_integral(profile: CutoffProfile, n: int) -> float:
    r, wr = radial_rule(profile, n)
    if len(r) == 0:
        return 0.0
    c, wc = np.polynomial.legendre.leggauss(n)
    rad = wr * r * kappa_eval(profile, r) ** 2
    R1, R2, C = np.meshgrid(r, r, c, indexing="ij")
    D = R1 + R2 + R1**2 + R2**2 + 2.0 * R1 * R2 * C
    inner = np.einsum("ijk,k->ij", (1.0 + C**2) / D, wc)
    return float(rad @ inner @ rad) / np.pi**2


def _ca_integral(profile: CutoffProfile, n: int) -> float:
    r, wr = radial_rule(profile, n)
    if len(r) == 0:
        return 0.0
    c, wc = np.polynomial.legendre.leggauss(n)
    rad = wr * r * kappa_eval(profile, r) ** 2
    R1, R2, C = np.meshgrid(r, r, c, indexing="ij")
    D = R1 + R2 + R1**2 + R2**2 + 2.0 * R1 * R2 * C
    inner = np.einsum("ijk,k->ij", (1.0 + C**2) / D, wc)
    # a(r') = (1/4pi) int r kappa^2 dr int (1 + c^2)/D dc
    a = rad @ inner / (4.0 * np.pi)
    return 8.0 / np.pi * float(np.sum(rad * a * a))


def _c3_integral(profile: CutoffProfile, n: int, chunk: int = 200_000) -> float:
    """Six-dimensional reduction: k1 on the z axis, k2 in the xz plane."""
    r, wr = radial_rule(profile, n)
    if len(r) == 0:
        return 0.0
    rad = wr * r**2 * (kappa_eval(profile, r) / (2.0 * np.pi)) ** 2 / r  # f^2 r^2 dr
    ct, wct = np.polynomial.legendre.leggauss(n)
    nphi = 2 * n
    phi = 2.0 * np.pi * (np.arange(nphi) + 0.5) / nphi
    wphi = np.full(nphi, 2.0 * np.pi / nphi)

    grids = np.meshgrid(np.arange(len(r)), np.arange(len(r)), np.arange(len(r)),
                        np.arange(n), np.arange(n), np.arange(nphi), indexing="ij")
    idx = [g.ravel() for g in grids]
    total = 0.0
    for start in range(0, len(idx[0]), chunk):
        i1, i2, i3, j2, j3, jp = (g[start:start + chunk] for g in idx)
        r1, r2, r3 = r[i1], r[i2], r[i3]
        c2_, c3_ = ct[j2], ct[j3]
        s2, s3 = np.sqrt(1 - c2_**2), np.sqrt(1 - c3_**2)
        k1 = np.stack([np.zeros_like(r1), np.zeros_like(r1), r1], axis=-1)
        k2 = np.stack([r2 * s2, np.zeros_like(r2), r2 * c2_], axis=-1)
        k3 = np.stack([r3 * s3 * np.cos(phi[jp]), r3 * s3 * np.sin(phi[jp]), r3 * c3_], axis=-1)
        w = (rad[i1] * rad[i2] * rad[i3] * wct[j2] * wct[j3] * wphi[jp]) * (4.0 * np.pi * 2.0 * np.pi)
        total += float(np.sum(w * _c3_projector_integrand(k1, k2, k3)))
    return total


def _c3_projector_integrand(k1, k2, k3):
    """6 sum_pol t_sym^2 / D3 with the form factors stripped, via transverse projectors."""
    ks = (k1, k2, k3)
    rs = [np.linalg.norm(k, axis=-1) for k in ks]
    P = [np.eye(3) - (k / rr[:, None])[:, :, None] * (k / rr[:, None])[:, None, :] for k, rr in zip(ks, rs)]

    def d2(x, y):
        q = ks[x] + ks[y]
        return rs[x] + rs[y] + np.einsum("ij,ij->i", q, q)

    def q(x, y):
        return ks[x] + ks[y]

    def tr_pp(x, y):
        return np.einsum("nij,nji->n", P[x], P[y])

    def sq(x, y, z):  # sum_pol t(xy, z)^2
        qq = q(x, y)
        return np.einsum("ni,nij,nj->n", qq, P[z], qq) * tr_pp(x, y) / d2(x, y) ** 2

    def cross(x, y, z):  # sum_pol t(xy, z) t(yz, x)
        chain = np.einsum("nij,njk,nkl->nil", P[z], P[y], P[x])
        return np.einsum("ni,nij,nj->n", q(x, y), chain, q(y, z)) / (d2(x, y) * d2(y, z))

    tot = sq(0, 1, 2) + sq(1, 2, 0) + sq(2, 0, 1)
    tot = tot + 2.0 * (cross(0, 1, 2) + cross(1, 2, 0) + cross(2, 0, 1))
    s = k1 + k2 + k3
    D3 = rs[0] + rs[1] + rs[2] + np.einsum("ij,ij->i", s, s)
    return 6.0 * tot / 9.0 / D3


def _two_level(fn, profile, resolution, coarse=None):
    coarse = coarse or max(resolution // 2, 1)
    fine = fn(profile, resolution)
    rough = fn(profile, coarse)
    return fine, abs(fine - rough)


def c2_quadrature(ff: FormFactor, resolution: int = 16):
    """(value, error estimate) for c2; the error is the change from half resolution."""
    if resolution < 8:
        raise ValueError("resolution must be at least 8 nodes per axis")
    return _two_level(_c2_integral, ff.profile, resolution)


def c_a_quadrature(ff: FormFactor, resolution: int = 16):
    if resolution < 8:
        raise ValueError("resolution must be at least 8 nodes per axis")
    return _two_level(_ca_integral, ff.profile, resolution)


def c3_quadrature(ff: FormFactor, resolution: int = 6):
    return _two_level(_c3_integral, ff.profile, resolution, coarse=max(resolution - 2, 2))


def quadrature_coefficients(ff: FormFactor, resolution: int = 16, c3_resolution: int = 6) -> CoefficientSet:
    c2, e2 = c2_quadrature(ff, resolution)
    ca, ea = c_a_quadrature(ff, resolution)
    c3, e3 = c3_quadrature(ff, c3_resolution)
    return CoefficientSet(
        c2=c2, c_a=ca, c3=c3, c1=0.0, provenance="quadrature",
        errors={"c2": e2, "c_a": ea, "c3": e3, "c1": 0.0},
        meta={"resolution": resolution, "c3_resolution": c3_resolution,
              "cutoff_kind": ff.profile.kind, "commutator_constant": commutator_constant(ff)},
    )


# --------------------------------------------------------------- Monte Carlo

@dataclass(frozen=True)
class MCEstimate:
    mean: float
    std_error: float
    n_samples: int
    seed: int

    def to_record(self) -> dict:
        return {"mean": self.mean, "std_error": self.std_error, "n_samples": self.n_samples, "seed": self.seed}


class RadialSampler:
    """Draws |k| with density r kappa(r)^2 / Z by rejection from density ~ r."""

    def __init__(self, profile: CutoffProfile):
        self.profile = profile
        self.norm = radial_moment(profile)
        if self.norm <= 0:
            raise DegenerateMeasureError("importance density r kappa^2 has zero mass")
        self.R = profile.support_radius
        self.accept = self.norm / (0.5 * self.R**2)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        out = []
        have = 0
        while have < n:
            m = int((n - have) / self.accept * 1.1) + 16
            r = self.R * np.sqrt(rng.random(m))
            keep = rng.random(m) < kappa_eval(self.profile, r) ** 2
            out.append(r[keep])
            have += int(keep.sum())
        return np.concatenate(out)[:n]

    def vectors(self, rng: np.random.Generator, n: int) -> np.ndarray:
        r = self.sample(rng, n)
        ct = 2.0 * rng.random(n) - 1.0
        ph = 2.0 * np.pi * rng.random(n)
        st = np.sqrt(1.0 - ct**2)
        return r[:, None] * np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=-1)


def _dots(a, b):
    return np.einsum("...i,...i->...", a, b)


def _mc_c2(ks, eps):
    k1, k2 = ks
    e1, e2 = eps
    r1, r2 = np.linalg.norm(k1, axis=-1), np.linalg.norm(k2, axis=-1)
    q = k1 + k2
    D = r1 + r2 + _dots(q, q)
    pol = np.einsum("nli,nmi->nlm", e1, e2)
    return 2.0 * np.sum(pol**2, axis=(1, 2)) / D


def _inner_vectors(kp, ep, k, e):
    """sum_l eps_l(k) (eps_l(k) . eps_m(k')) / D2(k, k') for m = 0, 1; shape (n, 2, 3)."""
    r, rp = np.linalg.norm(k, axis=-1), np.linalg.norm(kp, axis=-1)
    q = k + kp
    D = r + rp + _dots(q, q)
    overlap = np.einsum("nli,nmi->nlm", e, ep)  # (n, l, m)
    return np.einsum("nlm,nli->nmi", overlap, e) / D[:, None, None]


def _mc_ca(ks, eps):
    kp, ka, kb = ks
    ep, ea, eb = eps
    Wa = _inner_vectors(kp, ep, ka, ea)
    Wb = _inner_vectors(kp, ep, kb, eb)
    return 4.0 * np.einsum("nmi,nmi->n", Wa, Wb)


def _mc_c1(ks, eps):
    kp, ka, kb = ks
    ep, ea, eb = eps
    Ua = np.einsum("nmi,ni->nm", _inner_vectors(kp, ep, ka, ea), kp)
    Ub = np.einsum("nmi,ni->nm", _inner_vectors(kp, ep, kb, eb), kp)
    rp = np.linalg.norm(kp, axis=-1)
    return 4.0 * np.sum(Ua * Ub, axis=1) / (rp + rp**2)


def _mc_c3(ks, eps):
    """Explicit sum over the 8 polarization triples of 6 t_sym^2 / D3."""
    rs = [np.linalg.norm(k, axis=-1) for k in ks]

    def t(x, y, z):  # (n, lx, ly, lz)
        q = ks[x] + ks[y]
        D = rs[x] + rs[y] + _dots(q, q)
        exy = np.einsum("nai,nbi->nab", eps[x], eps[y])
        ezq = np.einsum("nci,ni->nc", eps[z], q)
        return -exy[:, :, :, None] * ezq[:, None, None, :] / D[:, None, None, None]

    t_a = t(0, 1, 2)  # axes (l1, l2, l3)
    t_b = np.transpose(t(1, 2, 0), (0, 3, 1, 2))  # t(23,1): axes (l2, l3, l1) -> (l1, l2, l3)
    t_c = np.transpose(t(2, 0, 1), (0, 2, 3, 1))  # t(31,2): axes (l3, l1, l2) -> (l1, l2, l3)
    tsym = (t_a + t_b + t_c) / 3.0
    s = ks[0] + ks[1] + ks[2]
    D3 = rs[0] + rs[1] + rs[2] + _dots(s, s)
    return 6.0 * np.sum(tsym**2, axis=(1, 2, 3)) / D3


_MC_KERNELS = {"c2": (2, _mc_c2), "c_a": (3, _mc_ca), "c1": (3, _mc_c1), "c3": (3, _mc_c3)}


def _stream_samples(which, sampler, n, seed_seq, rotate, chunk):
    rng = np.random.default_rng(seed_seq)
    rot_rng = np.random.default_rng(rotate) if rotate is not None else None
    nvar, kernel = _MC_KERNELS[which]
    pieces = []
    for start in range(0, n, chunk):
        m = min(chunk, n - start)
        ks = [sampler.vectors(rng, m) for _ in range(nvar)]
        eps = [polarization_vectors(k) for k in ks]
        if rot_rng is not None:
            eps = [random_polarization_rotation(e, rot_rng) for e in eps]
        pieces.append(kernel(ks, eps))
    return np.concatenate(pieces)


def coefficient_mc(which: str, ff: FormFactor, n_samples: int, seed: int, n_streams: int = 4,
                   workers: int = 1, rotate_polarizations: int | None = None,
                   chunk: int = 20_000) -> MCEstimate:
    """Importance-sampled estimate of one coefficient.

    Every radial variable is drawn with density proportional to r kappa(r)^2,
    which cancels f(k)^2 r^2 exactly: each variable contributes the constant
    weight Z/pi.  Streams get disjoint ``SeedSequence.spawn`` children, so the
    result depends only on (seed, n_samples, n_streams).  ``rotate_polarizations``
    seeds a random in-plane rotation of every polarization pair (the estimate
    must not change).
    """
    if which not in _MC_KERNELS:
        raise ValueError(f"unknown coefficient {which!r}")
    if n_samples < 10**4:
        raise ValueError("n_samples must be at least 1e4")
    sampler = RadialSampler(ff.profile)
    nvar = _MC_KERNELS[which][0]
    weight = (sampler.norm / np.pi) ** nvar
    counts = [n_samples // n_streams + (1 if s < n_samples % n_streams else 0) for s in range(n_streams)]
    children = np.random.SeedSequence(seed).spawn(n_streams)
    rot = [None] * n_streams
    if rotate_polarizations is not None:
        rot = np.random.SeedSequence(rotate_polarizations).spawn(n_streams)
    args = [(which, sampler, counts[s], children[s], rot[s], chunk) for s in range(n_streams)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda a: _stream_samples(*a), args))
    else:
        parts = [_stream_samples(*a) for a in args]
    values = weight * np.concatenate(parts)
    return MCEstimate(float(values.mean()), float(values.std(ddof=1) / np.sqrt(len(values))), n_samples, seed)


def mc_coefficients(ff: FormFactor, n_samples: int, seed: int, n_streams: int = 4) -> CoefficientSet:
    ests = {name: coefficient_mc(name, ff, n_samples, seed + i, n_streams) for i, name in enumerate(COEFFICIENTS)}
    return CoefficientSet(
        **{name: e.mean for name, e in ests.items()},
        provenance="monte_carlo",
        errors={name: e.std_error for name, e in ests.items()},
        meta={"n_samples": n_samples, "seed": seed, "n_streams": n_streams, "cutoff_kind": ff.profile.kind},
    )
