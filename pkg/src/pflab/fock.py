"""Brute-force Fock-space model on a momentum grid.

States are stored per photon-number sector as sorted tuples of mode indices
(a multiset is the same thing as an occupation vector).  Within a sector the
tuples are in lexicographic order, which is also the order of the integer key
sum_j m_j M^(n-1-j), so lookup is a ``searchsorted``.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from functools import cached_property
from math import comb

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from .field import MomentumGrid
from .coefficients import CoefficientSet

DEFAULT_MAX_DIMENSION = 10**6
ENTRY_FLOOR = 1e-300


class FockSizeError(ValueError):
    def __init__(self, dimension: int, cap: int):
        super().__init__(f"Fock basis dimension {dimension} exceeds cap {cap}")
        self.dimension = dimension
        self.cap = cap


class GridDegeneracyError(ArithmeticError):
    pass


def fock_dimension(n_modes: int, n_max: int) -> int:
    return sum(comb(n_modes + n - 1, n) for n in range(n_max + 1))


def _keys(rows: np.ndarray, n_modes: int) -> np.ndarray:
    key = np.zeros(len(rows), dtype=np.int64)
    for j in range(rows.shape[1]):
        key = key * n_modes + rows[:, j]
    return key


@dataclass(eq=False)
class FockBasis:
    grid: MomentumGrid
    n_max: int
    sectors: list  # sectors[n] has shape (count_n, n)
    offsets: np.ndarray  # offsets[n] = first global index of sector n
    _keys: list = field(repr=False)

    @property
    def n_modes(self) -> int:
        return self.grid.n_modes

    @property
    def dimension(self) -> int:
        return int(self.offsets[-1])

    def sector_slice(self, n: int) -> slice:
        return slice(int(self.offsets[n]), int(self.offsets[n + 1]))

    def lookup(self, n: int, rows: np.ndarray) -> np.ndarray:
        """Global indices of the sorted mode tuples ``rows`` in sector n."""
        rows = np.asarray(rows, dtype=np.int64)
        if n == 0:
            return np.zeros(len(rows), dtype=np.int64)
        rows = rows.reshape(-1, n)
        key = _keys(rows, self.n_modes)
        pos = np.searchsorted(self._keys[n], key)
        pos = np.minimum(pos, len(self._keys[n]) - 1)
        if np.any(self._keys[n][pos] != key):
            raise KeyError("state not in basis")
        return pos + self.offsets[n]

    def index(self, occupation) -> int:
        """Global index of an occupation vector (length n_modes)."""
        occ = np.asarray(occupation, dtype=np.int64)
        modes = np.repeat(np.arange(len(occ)), occ)
        n = len(modes)
        if n > self.n_max:
            raise KeyError("photon number above truncation")
        return int(self.lookup(n, modes[None, :])[0])

    def modes_of(self, index: int) -> tuple[int, ...]:
        n = int(np.searchsorted(self.offsets, index, side="right") - 1)
        return tuple(int(m) for m in self.sectors[n][index - self.offsets[n]])

    def occupation(self, index: int) -> np.ndarray:
        return np.bincount(np.array(self.modes_of(index), dtype=np.int64), minlength=self.n_modes)

    @cached_property
    def photon_number(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_max + 1), np.diff(self.offsets)).astype(float)

    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dimension)
        v[0] = 1.0
        return v

    def _mode_sum(self, values: np.ndarray) -> np.ndarray:
        out = np.zeros((self.dimension,) + values.shape[1:])
        for n in range(1, self.n_max + 1):
            out[self.sector_slice(n)] = values[self.sectors[n]].sum(axis=1)
        return out

    @cached_property
    def hf_diag(self) -> np.ndarray:
        return self._mode_sum(np.linalg.norm(self.grid.mode_k, axis=1))

    @cached_property
    def pf_diag(self) -> np.ndarray:
        """Total photon momentum per basis state, shape (dimension, 3)."""
        return self._mode_sum(self.grid.mode_k)

    @cached_property
    def free_diag(self) -> np.ndarray:
        """Diagonal of H_f + P_f^2."""
        return self.hf_diag + np.einsum("ij,ij->i", self.pf_diag, self.pf_diag)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index"] + [f"n{m}" for m in range(self.n_modes)])
            for i in range(self.dimension):
                w.writerow([i, *self.occupation(i).tolist()])


def build_fock_basis(grid: MomentumGrid, n_max: int, max_dimension: int = DEFAULT_MAX_DIMENSION) -> FockBasis:
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    M = grid.n_modes
    dim = fock_dimension(M, n_max)
    if dim > max_dimension:
        raise FockSizeError(dim, max_dimension)
    sectors = [np.zeros((1, 0), dtype=np.int64)]
    keys = [np.zeros(1, dtype=np.int64)]
    for n in range(1, n_max + 1):
        count = comb(M + n - 1, n)
        flat = np.fromiter(
            itertools.chain.from_iterable(itertools.combinations_with_replacement(range(M), n)),
            dtype=np.int64,
            count=count * n,
        )
        rows = flat.reshape(count, n)
        sectors.append(rows)
        keys.append(_keys(rows, M))
    offsets = np.concatenate([[0], np.cumsum([len(s) for s in sectors])]).astype(np.int64)
    return FockBasis(grid, n_max, sectors, offsets, keys)


@dataclass(frozen=True, eq=False)
class LadderPattern:
    """Matrix elements of the single-mode annihilators a_m, all modes at once.

    Entry t: <rows[t]| a_{modes[t]} |cols[t]> = amp[t].
    """

    dimension: int
    rows: np.ndarray
    cols: np.ndarray
    modes: np.ndarray
    amp: np.ndarray

    def operator(self, coeff: np.ndarray) -> sp.csr_matrix:
        """sum_m coeff[m] a_m as a CSR matrix."""
        vals = self.amp * coeff[self.modes]
        keep = np.abs(vals) >= ENTRY_FLOOR
        return sp.csr_matrix(
            (vals[keep], (self.rows[keep], self.cols[keep])), shape=(self.dimension, self.dimension)
        )


def ladder_pattern(basis: FockBasis) -> LadderPattern:
    rows, cols, modes, amp = [], [], [], []
    for n in range(1, basis.n_max + 1):
        states = basis.sectors[n]
        src = np.arange(len(states)) + basis.offsets[n]
        for j in range(n):
            first = np.ones(len(states), dtype=bool) if j == 0 else states[:, j] != states[:, j - 1]
            s = states[first]
            occ = (s == s[:, [j]]).sum(axis=1)
            target = basis.lookup(n - 1, np.delete(s, j, axis=1))
            rows.append(target)
            cols.append(src[first])
            modes.append(s[:, j])
            amp.append(np.sqrt(occ.astype(float)))
    if not rows:
        e = np.zeros(0, dtype=np.int64)
        return LadderPattern(basis.dimension, e, e, e, np.zeros(0))
    rows, cols, modes, amp = map(np.concatenate, (rows, cols, modes, amp))
    order = np.lexsort((cols, rows))
    return LadderPattern(basis.dimension, rows[order], cols[order], modes[order], amp[order])


def assemble_Hf(basis: FockBasis) -> sp.csr_matrix:
    return sp.diags(basis.hf_diag, format="csr")


def assemble_Nf(basis: FockBasis) -> sp.csr_matrix:
    return sp.diags(basis.photon_number, format="csr")


def assemble_Pf(basis: FockBasis) -> list:
    return [sp.diags(basis.pf_diag[:, i], format="csr") for i in range(3)]


@dataclass(frozen=True, eq=False)
class FieldOperators:
    """A^- and A^+ components on a basis; A^+_i is the exact transpose of A^-_i."""

    basis: FockBasis
    a_minus: tuple
    a_plus: tuple


def assemble_A(basis: FockBasis, pattern: LadderPattern | None = None) -> FieldOperators:
    pattern = ladder_pattern(basis) if pattern is None else pattern
    coupling = basis.grid.mode_coupling
    a_minus = tuple(pattern.operator(coupling[:, i]) for i in range(3))
    a_plus = tuple(m.T.tocsr() for m in a_minus)
    return FieldOperators(basis, a_minus, a_plus)


@dataclass(frozen=True, eq=False)
class HamiltonianParts:
    """H(alpha) = H0 + sign sqrt(alpha) H1 + alpha H2, with

    H0 = H_f + P_f^2, H1 = 2 (P_f.A^+ + h.c.), H2 = A^+.A^+ + A^-.A^- + 2 A^+.A^-.
    Every part is assembled as X + X^T so that symmetry holds bitwise.
    """

    basis: FockBasis
    h0: np.ndarray
    h1: sp.csr_matrix
    h2: sp.csr_matrix

    def at(self, alpha: float, sign: int = 1) -> sp.csr_matrix:
        if alpha < 0:
            raise ValueError("alpha must be non-negative")
        H = sp.diags(self.h0, format="csr")
        if alpha > 0:
            H = H + (sign * np.sqrt(alpha)) * self.h1 + alpha * self.h2
        H = H.tocsr()
        H.sum_duplicates()
        H.sort_indices()
        return H


def assemble_hamiltonian_parts(basis: FockBasis, ops: FieldOperators | None = None) -> HamiltonianParts:
    ops = assemble_A(basis) if ops is None else ops
    pf = basis.pf_diag
    X = sum(sp.diags(pf[:, i]) @ ops.a_plus[i] for i in range(3))
    Q = sum(ops.a_plus[i] @ ops.a_plus[i] for i in range(3))
    S = sum(ops.a_plus[i] @ ops.a_minus[i] for i in range(3))
    h1 = (2.0 * (X + X.T)).tocsr()
    h2 = (Q + Q.T + S + S.T).tocsr()
    return HamiltonianParts(basis, basis.free_diag.copy(), h1, h2)


def assemble_hamiltonian(basis: FockBasis, alpha: float, sign: int = 1) -> sp.csr_matrix:
    return assemble_hamiltonian_parts(basis).at(alpha, sign)


class HamiltonianOperator(LinearOperator):
    """Matrix-free H(alpha) for bases too large to hold the 2-body blocks."""

    def __init__(self, ops: FieldOperators, alpha: float, sign: int = 1):
        basis = ops.basis
        super().__init__(dtype=float, shape=(basis.dimension, basis.dimension))
        self.ops = ops
        self.alpha = alpha
        self.sign = sign
        self.h0 = basis.free_diag
        self.pf = basis.pf_diag

    def _matvec(self, v):
        v = np.ravel(v)
        out = self.h0 * v
        if self.alpha == 0:
            return out
        am, ap = self.ops.a_minus, self.ops.a_plus
        cross = np.zeros_like(v)
        quad = np.zeros_like(v)
        for i in range(3):
            cross += self.pf[:, i] * (ap[i] @ v) + am[i] @ (self.pf[:, i] * v)
            lowered = am[i] @ v
            quad += ap[i] @ (ap[i] @ v) + am[i] @ lowered + 2.0 * (ap[i] @ lowered)
        return out + 2.0 * self.sign * np.sqrt(self.alpha) * cross + self.alpha * quad

    def _rmatvec(self, v):
        return self._matvec(v)


@dataclass(frozen=True, eq=False)
class DiscretePhi:
    phi1: np.ndarray
    phi2: np.ndarray
    phi3: np.ndarray

    def as_tuple(self):
        return (self.phi1, self.phi2, self.phi3)


def resolvent(basis: FockBasis, v: np.ndarray) -> np.ndarray:
    """(H_f + P_f^2)^{-1} v on the complement of the vacuum."""
    d = basis.free_diag
    out = np.zeros_like(v)
    nz = v != 0
    if np.any(nz[1:] & (d[1:] <= 0)):
        raise GridDegeneracyError("H_f + P_f^2 vanishes on a non-vacuum state")
    if nz[0]:
        raise GridDegeneracyError("resolvent applied to a vector with a vacuum component")
    out[nz] = v[nz] / d[nz]
    return out


def phi_grid(basis: FockBasis, ops: FieldOperators | None = None) -> DiscretePhi:
    if basis.n_max < 3:
        raise ValueError("Phi_3 lives in the 3-photon sector; need n_max >= 3")
    ops = assemble_A(basis) if ops is None else ops
    omega = basis.vacuum()
    pf = basis.pf_diag
    pair = sum(ops.a_plus[i] @ (ops.a_plus[i] @ omega) for i in range(3))
    phi2 = -resolvent(basis, pair)
    up = sum(pf[:, i] * (ops.a_plus[i] @ phi2) for i in range(3))
    down = sum(pf[:, i] * (ops.a_minus[i] @ phi2) for i in range(3))
    return DiscretePhi(-resolvent(basis, down), phi2, -resolvent(basis, up))


def star_inner(basis: FockBasis, v: np.ndarray, w: np.ndarray) -> float:
    v = np.asarray(v)
    w = np.asarray(w)
    if v.shape != (basis.dimension,) or w.shape != (basis.dimension,):
        raise ValueError("vector dimension does not match basis")
    return float(v @ (basis.free_diag * w))


def grid_coefficients(basis: FockBasis, ops: FieldOperators | None = None) -> CoefficientSet:
    """Energy-expansion coefficients of the discrete model by operator composition."""
    ops = assemble_A(basis) if ops is None else ops
    phi = phi_grid(basis, ops)
    c_a = sum(float(np.sum((ops.a_minus[i] @ phi.phi2) ** 2)) for i in range(3))
    return CoefficientSet(
        c2=star_inner(basis, phi.phi2, phi.phi2),
        c_a=c_a,
        c3=star_inner(basis, phi.phi3, phi.phi3),
        c1=star_inner(basis, phi.phi1, phi.phi1),
        provenance="grid_oracle",
        meta={"grid": list(basis.grid.spec.shape), "n_max": basis.n_max, "path": "operator"},
    )


def tensor_coefficients(grid: MomentumGrid) -> CoefficientSet:
    """Same quantities as :func:`grid_coefficients` from mode-space tensors.

    Phi_2 is held as the symmetric matrix Phi[a, b] (state sum_ab Phi_ab a*_a a*_b Omega),
    and the 3-photon sector is swept one slab at a time, so grids whose Fock
    basis would be far too large (e.g. 576 modes) stay cheap.
    """
    C = grid.mode_coupling
    K = grid.mode_k
    r = np.linalg.norm(K, axis=1)
    ksq = np.einsum("ij,ij->i", K, K)
    F = C @ C.T
    D2 = r[:, None] + r[None, :] + ksq[:, None] + ksq[None, :] + 2.0 * (K @ K.T)
    Phi = -F / D2
    c2 = 2.0 * float(np.sum(F * F / D2))
    c_a = 4.0 * float(np.sum((C.T @ Phi) ** 2))
    G = C @ K.T  # G[z, x] = g_z eps_z . k_x
    u = np.einsum("pb,pb->b", G, Phi)
    c1 = 4.0 * float(np.sum(u * u / (r + ksq)))

    c3 = 0.0
    for c in range(len(r)):
        t_abc = (G[c][:, None] + G[c][None, :]) * Phi
        t_bca = (G + G[:, [c]]) * Phi[c][None, :]
        t_cab = (G[:, c][None, :] + G.T) * Phi[c][:, None]
        tsym = (t_abc + t_bca + t_cab) / 3.0
        S = K + K[c]
        ssq = np.einsum("ij,ij->i", S, S)
        D3 = r[:, None] + r[None, :] + r[c] + ssq[:, None] + ksq[None, :] + 2.0 * (S @ K.T)
        c3 += 6.0 * float(np.sum(tsym * tsym / D3))
    return CoefficientSet(
        c2=c2, c_a=c_a, c3=c3, c1=c1, provenance="grid_oracle",
        meta={"grid": list(grid.spec.shape), "path": "tensor"},
    )


def write_coo(matrix, path) -> None:
    """Coordinate text format: one 'row col value' line per stored entry."""
    m = sp.coo_matrix(matrix)
    order = np.lexsort((m.col, m.row))
    with open(path, "w") as fh:
        fh.write(f"% {m.shape[0]} {m.shape[1]} {m.nnz}\n")
        for i, j, v in zip(m.row[order], m.col[order], m.data[order]):
            fh.write(f"{i} {j} {float(v)!r}\n")


def hamiltonian_columns(ops: FieldOperators, alpha: float, cols, sign: int = 1) -> sp.csc_matrix:
    """Columns ``cols`` of H(alpha), computed factor by factor with sparse products.

    Works for bases whose assembled two-body blocks would not fit in memory.
    """
    basis = ops.basis
    cols = np.asarray(cols, dtype=np.int64)
    E = sp.csc_matrix((np.ones(len(cols)), (cols, np.arange(len(cols)))), shape=(basis.dimension, len(cols)))
    out = sp.diags(basis.free_diag) @ E
    if alpha == 0:
        return out.tocsc()
    pf = basis.pf_diag
    cross = None
    quad = None
    for i in range(3):
        ap, am = ops.a_plus[i], ops.a_minus[i]
        P = sp.diags(pf[:, i])
        c = P @ (ap @ E) + am @ (P @ E)
        lowered = am @ E
        q = ap @ (ap @ E) + am @ lowered + 2.0 * (ap @ lowered)
        cross = c if cross is None else cross + c
        quad = q if quad is None else quad + q
    return (out + (2.0 * sign * np.sqrt(alpha)) * cross + alpha * quad).tocsc()


def estimate_two_body_nnz(basis: FockBasis) -> int:
    """Upper bound on stored entries of the A+.A- block of H."""
    counts = np.diff(basis.offsets)
    return int(sum(counts[n] * n * basis.n_modes for n in range(1, basis.n_max + 1)))
