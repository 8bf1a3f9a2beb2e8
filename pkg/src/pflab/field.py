"""Cutoff, form factor, transverse polarizations and momentum-space grids.

Units: hbar = c = 1, electron mass 1/2.  Wavenumbers are dimensionless with
the ultraviolet cutoff supported in |k| <= 2 by default.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np

CutoffKind = Literal["smoothstep", "sharp"]

TRANSVERSE_TOL = 1e-14


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


@dataclass(frozen=True)
class CutoffProfile:
    """Ultraviolet cutoff kappa(|k|).

    kappa is 1 up to ``plateau_radius`` and 0 from ``support_radius`` on.  The
    ``smoothstep`` kind ramps down with the cubic 1 - s^2 (3 - 2 s), which is C^1
    at both junctions; ``sharp`` is the indicator of |k| <= plateau_radius.
    """

    kind: CutoffKind = "smoothstep"
    support_radius: float = 2.0
    plateau_radius: float = 1.0

    def __post_init__(self):
        if self.kind not in ("smoothstep", "sharp"):
            raise ValueError(f"unknown cutoff kind {self.kind!r}")
        if self.plateau_radius < 0 or self.support_radius < self.plateau_radius:
            raise ValueError("need 0 <= plateau_radius <= support_radius")
        if self.kind == "smoothstep" and self.support_radius == self.plateau_radius:
            if self.support_radius > 0:
                raise ValueError("smoothstep ramp needs support_radius > plateau_radius")

    @classmethod
    def sharp(cls, radius: float = 1.0) -> "CutoffProfile":
        return cls("sharp", support_radius=radius, plateau_radius=radius)

    @property
    def is_trivial(self) -> bool:
        """True when kappa vanishes identically (up to a null set)."""
        return self.support_radius == 0.0

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """Radii where kappa is not smooth; quadrature panels split here."""
        pts = [0.0, self.plateau_radius, self.support_radius]
        return tuple(sorted(set(pts)))

    def __call__(self, r):
        return kappa_eval(self, r)


def kappa_eval(profile: CutoffProfile, r):
    """Evaluate kappa at radius ``r`` (scalar or array)."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0) or np.any(np.isnan(r_arr)):
        raise DomainError("kappa is defined for r >= 0 only")
    lo, hi = profile.plateau_radius, profile.support_radius
    if profile.kind == "sharp" or hi == lo:
        out = np.where(r_arr <= lo, 1.0, 0.0)
        if profile.is_trivial:
            out = np.zeros_like(r_arr)
    else:
        s = np.clip((r_arr - lo) / (hi - lo), 0.0, 1.0)
        out = 1.0 - s * s * (3.0 - 2.0 * s)
    if np.ndim(r) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class FormFactor:
    """Coupling function f(k) = kappa(|k|) / (2 pi |k|^(1/2))."""

    profile: CutoffProfile = field(default_factory=CutoffProfile)

    def radial(self, r):
        """f as a function of |k|; ``r`` must be strictly positive."""
        r_arr = np.asarray(r, dtype=float)
        if np.any(r_arr <= 0):
            raise DomainError("form factor is singular at k = 0")
        out = kappa_eval(self.profile, r_arr) / (2.0 * np.pi * np.sqrt(r_arr))
        return float(out) if np.ndim(r) == 0 else out

    def __call__(self, k):
        k = np.asarray(k, dtype=float)
        return self.radial(np.linalg.norm(k, axis=-1))


def form_factor(ff: FormFactor, k) -> float:
    return ff(k)


@dataclass(frozen=True)
class PolarizationPair:
    eps_plus: np.ndarray
    eps_minus: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.stack([self.eps_plus, self.eps_minus])


def polarization_vectors(k) -> np.ndarray:
    """Vectorized transverse basis for wave-vectors ``k`` of shape (..., 3).

    Returns an array of shape (..., 2, 3): eps_+ = (khat x z)/|khat x z| and
    eps_- = khat x eps_+, with (x, y) used when k is parallel to z.
    """
    k = np.asarray(k, dtype=float)
    norm = np.linalg.norm(k, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise DomainError("polarization basis undefined at k = 0")
    khat = k / norm
    zhat = np.array([0.0, 0.0, 1.0])
    cross = np.cross(khat, zhat)
    cnorm = np.linalg.norm(cross, axis=-1, keepdims=True)
    polar = cnorm < 1e-12
    safe = np.where(polar, 1.0, cnorm)
    ep = np.where(polar, np.array([1.0, 0.0, 0.0]), cross / safe)
    em = np.cross(khat, ep)
    em = np.where(polar, np.array([0.0, 1.0, 0.0]), em)
    return np.stack([ep, em], axis=-2)


def polarization_basis(k) -> PolarizationPair:
    k = np.asarray(k, dtype=float)
    if k.shape != (3,):
        raise DomainError("expected a single 3-vector")
    eps = polarization_vectors(k)
    return PolarizationPair(eps[0], eps[1])


def transverse_projector(khat) -> np.ndarray:
    khat = np.asarray(khat, dtype=float)
    return np.eye(3) - khat[..., :, None] * khat[..., None, :]


def polarization_sum(khat, khat2) -> float:
    """Sum over both polarizations of (eps(k) . eps(k'))^2 = 1 + (khat . khat')^2."""
    khat = np.asarray(khat, dtype=float)
    khat2 = np.asarray(khat2, dtype=float)
    for v in (khat, khat2):
        if abs(np.linalg.norm(v) - 1.0) > 1e-10:
            raise DomainError("polarization_sum expects unit vectors")
    c = float(khat @ khat2)
    return 1.0 + c * c


@dataclass(frozen=True)
class GridSpec:
    n_radial: int = 5
    n_polar: int = 3
    n_azimuthal: int = 2
    profile: CutoffProfile = field(default_factory=CutoffProfile)
    phi_offset: float = 0.0

    def __post_init__(self):
        if min(self.n_radial, self.n_polar, self.n_azimuthal) < 1:
            raise ValueError("grid needs at least one node per axis")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_radial, self.n_polar, self.n_azimuthal)

    def to_dict(self) -> dict:
        return {
            "n_radial": self.n_radial,
            "n_polar": self.n_polar,
            "n_azimuthal": self.n_azimuthal,
            "cutoff_kind": self.profile.kind,
        }


@dataclass(frozen=True, eq=False)
class MomentumGrid:
    """Discrete photon modes: wave-vector nodes with two polarizations each.

    Node arrays have one row per k-node; the single-particle mode index is
    ``2 * node + lam`` with lam = 0 for eps_+ and 1 for eps_-.
    """

    spec: GridSpec
    k: np.ndarray  # (n_nodes, 3)
    weights: np.ndarray  # (n_nodes,)
    eps: np.ndarray  # (n_nodes, 2, 3)

    @property
    def n_nodes(self) -> int:
        return len(self.weights)

    @property
    def n_modes(self) -> int:
        return 2 * self.n_nodes

    @cached_property
    def radii(self) -> np.ndarray:
        return np.linalg.norm(self.k, axis=1)

    @cached_property
    def mode_k(self) -> np.ndarray:
        return np.repeat(self.k, 2, axis=0)

    @cached_property
    def mode_eps(self) -> np.ndarray:
        return self.eps.reshape(-1, 3)

    @cached_property
    def mode_coupling(self) -> np.ndarray:
        """g_m * eps_m, shape (n_modes, 3), with g_m = f(k_m) sqrt(weight_m)."""
        ff = FormFactor(self.spec.profile)
        g = ff.radial(self.radii) * np.sqrt(self.weights)
        return np.repeat(g, 2)[:, None] * self.mode_eps

    def with_polarizations(self, eps: np.ndarray) -> "MomentumGrid":
        return MomentumGrid(self.spec, self.k, self.weights, np.asarray(eps, float))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kx", "ky", "kz", "weight"])
            for kk, ww in zip(self.k, self.weights):
                w.writerow([repr(float(x)) for x in (*kk, ww)])


def build_grid(spec: GridSpec) -> MomentumGrid:
    """Product rule: Gauss-Legendre in |k| on (0, R] and in cos(theta), uniform in phi."""
    # kappa == 0 still needs a nondegenerate node set
    R = spec.profile.support_radius or 1.0
    xr, wr = np.polynomial.legendre.leggauss(spec.n_radial)
    r = 0.5 * R * (xr + 1.0)
    wr = 0.5 * R * wr
    ct, wct = np.polynomial.legendre.leggauss(spec.n_polar)
    nphi = spec.n_azimuthal
    phi = spec.phi_offset + 2.0 * np.pi * np.arange(nphi) / nphi

    R_, C_, P_ = np.meshgrid(r, ct, phi, indexing="ij")
    WR, WC, _ = np.meshgrid(wr, wct, phi, indexing="ij")
    st = np.sqrt(1.0 - C_ ** 2)
    k = np.stack([R_ * st * np.cos(P_), R_ * st * np.sin(P_), R_ * C_], axis=-1).reshape(-1, 3)
    weights = (R_ ** 2 * WR * WC * (2.0 * np.pi / nphi)).ravel()
    return MomentumGrid(spec, k, weights, polarization_vectors(k))


def random_polarization_rotation(eps: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Rotate each transverse pair by an independent random angle in its plane."""
    theta = rng.uniform(0.0, 2.0 * np.pi, size=eps.shape[:-2])[..., None]
    ep, em = eps[..., 0, :], eps[..., 1, :]
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([c * ep + s * em, -s * ep + c * em], axis=-2)
