"""Truncated bosonic Fock spaces over finitely many modes.

The occupation-number basis keeps every state with total particle number
``<= n_max``.  States are ordered by total number first and lexicographically
inside each shell, so particle-number sectors are contiguous index ranges.

All elementary operators (ladder operators, field, second quantisation,
parity, displacements) are returned as :class:`AssembledOperator` objects
wrapping a scipy sparse matrix or, for displacements, a dense array.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dc_field
from functools import cached_property
from typing import Any, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy import stats
from scipy.special import gammaln

__all__ = [
    "DEFAULT_DIM_CAP",
    "FockError",
    "DimensionError",
    "UnitarityError",
    "TruncationWarning",
    "ModeGrid",
    "FockBasis",
    "AssembledOperator",
    "FockVector",
    "enumerate_basis",
    "annihilation",
    "creation",
    "field",
    "dGamma",
    "number_operator",
    "parity",
    "coherent_vector",
    "coherent_tail_mass",
    "displacement_table",
    "displacement_block",
    "displacement",
    "weyl_parity",
    "sector_norms",
]

DEFAULT_DIM_CAP = 2_000_000


class FockError(Exception):
    """Base class for errors raised by the Fock-space layer."""


class DimensionError(FockError):
    """Raised when a requested basis or dense operation exceeds its size cap."""


class UnitarityError(FockError):
    """Raised when a truncated displacement is too far from unitary."""


class TruncationWarning(UserWarning):
    """Emitted when truncation discards more weight than the configured tolerance."""


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ModeGrid:
    """Finite set of boson modes: frequencies ``omega`` and couplings ``v``.

    Quadrature weights are already folded into ``v``, so every norm of the
    coupling function is a plain sum over modes.
    """

    omega: np.ndarray
    v: np.ndarray
    weight: np.ndarray | None = None
    label: str = ""

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float).ravel()
        v = np.asarray(self.v).ravel()
        if not np.iscomplexobj(v):
            v = v.astype(float)
        if omega.size == 0:
            raise ValueError("a mode grid needs at least one mode")
        if v.shape != omega.shape:
            raise ValueError(f"omega has {omega.size} modes but v has {v.size}")
        if not np.all(np.isfinite(omega)) or np.any(omega <= 0):
            raise ValueError("mode frequencies must be finite and strictly positive")
        if not np.all(np.isfinite(v)):
            raise ValueError("couplings must be finite")
        weight = np.ones_like(omega) if self.weight is None else np.asarray(self.weight, dtype=float).ravel()
        if weight.shape != omega.shape or np.any(weight <= 0):
            raise ValueError("quadrature weights must be positive, one per mode")
        object.__setattr__(self, "omega", _readonly(omega))
        object.__setattr__(self, "v", _readonly(v))
        object.__setattr__(self, "weight", _readonly(weight))

    @property
    def M(self) -> int:
        return self.omega.size

    @property
    def min_omega(self) -> float:
        return float(self.omega.min())

    @property
    def v_norm_sq(self) -> float:
        """``||v||^2``."""
        return float(np.sum(np.abs(self.v) ** 2))

    @property
    def ir_norm_sq(self) -> float:
        """``||omega^{-1/2} v||^2``, the Van Hove energy shift."""
        return float(np.sum(np.abs(self.v) ** 2 / self.omega))

    @property
    def displacement_norm_sq(self) -> float:
        """``||omega^{-1} v||^2``, the mean boson number of the Van Hove ground state."""
        return float(np.sum(np.abs(self.v) ** 2 / self.omega**2))

    def scaled(self, g: float) -> "ModeGrid":
        return ModeGrid(self.omega, g * self.v, self.weight, self.label)

    def masked(self, keep: np.ndarray) -> "ModeGrid":
        """Grid with the couplings of modes outside ``keep`` set to zero."""
        keep = np.asarray(keep, dtype=bool)
        return ModeGrid(self.omega, np.where(keep, self.v, 0), self.weight, self.label)


def _compositions(M: int, n_max: int) -> np.ndarray:
    """All occupation vectors of length M with total <= n_max (unordered)."""
    if M == 1:
        return np.arange(n_max + 1, dtype=np.int64)[:, None]
    blocks = []
    for first in range(n_max + 1):
        rest = _compositions(M - 1, n_max - first)
        head = np.full((rest.shape[0], 1), first, dtype=np.int64)
        blocks.append(np.hstack([head, rest]))
    return np.vstack(blocks)


@dataclass(frozen=True, eq=False)
class FockBasis:
    """Occupation-number basis ``{n : sum(n) <= n_max}``, optionally tensored with a qubit.

    With ``with_qubit`` the full index is ``q * fock_dim + i`` where ``q = 0``
    is the ``e_1`` channel and ``q = 1`` the ``e_-1`` channel.
    """

    M: int
    n_max: int
    states: np.ndarray
    with_qubit: bool = False

    @property
    def fock_dim(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.fock_dim * (2 if self.with_qubit else 1)

    @cached_property
    def totals(self) -> np.ndarray:
        return _readonly(self.states.sum(axis=1))

    @cached_property
    def _radix(self) -> int | None:
        base = self.n_max + 1
        if self.M * math.log2(base) < 62:
            return base
        return None

    @cached_property
    def _keys(self) -> tuple[np.ndarray, np.ndarray] | dict:
        if self._radix is None:
            return {tuple(int(x) for x in s): i for i, s in enumerate(self.states)}
        keys = self._encode(self.states)
        order = np.argsort(keys)
        return keys[order], order

    def _encode(self, occ: np.ndarray) -> np.ndarray:
        base = self._radix
        powers = base ** np.arange(self.M - 1, -1, -1, dtype=np.int64)
        return occ.astype(np.int64) @ powers

    def lookup(self, occ: np.ndarray) -> np.ndarray:
        """Dense indices of occupation vectors (rows of ``occ``); -1 where absent."""
        occ = np.atleast_2d(np.asarray(occ, dtype=np.int64))
        out = np.full(occ.shape[0], -1, dtype=np.int64)
        valid = np.all(occ >= 0, axis=1) & (occ.sum(axis=1) <= self.n_max)
        if not np.any(valid):
            return out
        table = self._keys
        if isinstance(table, dict):
            out[valid] = [table.get(tuple(int(x) for x in row), -1) for row in occ[valid]]
            return out
        sorted_keys, order = table
        keys = self._encode(occ[valid])
        pos = np.searchsorted(sorted_keys, keys)
        pos = np.minimum(pos, sorted_keys.size - 1)
        hit = sorted_keys[pos] == keys
        out[np.flatnonzero(valid)[hit]] = order[pos[hit]]
        return out

    def index(self, occ: Sequence[int], qubit: int | None = None) -> int:
        """Index of one occupation vector; ``qubit`` is +1 or -1 on qubit bases."""
        i = int(self.lookup(np.asarray(occ)[None, :])[0])
        if i < 0:
            raise KeyError(f"occupation {tuple(occ)} is not in the truncated basis")
        if self.with_qubit:
            if qubit not in (1, -1):
                raise ValueError("qubit label (+1 or -1) required on a qubit basis")
            return i + (0 if qubit == 1 else self.fock_dim)
        return i

    def sector(self, n: int) -> np.ndarray:
        """Fock indices of the n-particle sector."""
        return np.flatnonzero(self.totals == n)

    def without_qubit(self) -> "FockBasis":
        if not self.with_qubit:
            return self
        return FockBasis(self.M, self.n_max, self.states, False)

    def with_qubit_factor(self) -> "FockBasis":
        if self.with_qubit:
            return self
        return FockBasis(self.M, self.n_max, self.states, True)

    def same_space(self, other: "FockBasis") -> bool:
        return (
            self is other
            or (self.M == other.M and self.n_max == other.n_max and self.with_qubit == other.with_qubit)
        )


def enumerate_basis(
    M: int, n_max: int, with_qubit: bool = False, dim_cap: int = DEFAULT_DIM_CAP
) -> FockBasis:
    """Enumerate the truncated occupation basis.

    Raises :class:`DimensionError` before allocating anything if the
    dimension ``C(M + n_max, M)`` (doubled with a qubit) exceeds ``dim_cap``.
    """
    if M < 1:
        raise ValueError("mode count must be at least 1")
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    dim = math.comb(M + n_max, M) * (2 if with_qubit else 1)
    if dim > dim_cap:
        raise DimensionError(
            f"basis with M={M}, n_max={n_max} has {dim} states, above the cap of {dim_cap}; "
            "lower n_max or the mode count"
        )
    states = _compositions(M, n_max)
    keys = [states[:, j] for j in range(M - 1, -1, -1)] + [states.sum(axis=1)]
    states = states[np.lexsort(keys)]
    return FockBasis(M, n_max, _readonly(states), with_qubit)


def _as_matrix(x):
    if sp.issparse(x):
        return sp.csr_array(x)
    return np.asarray(x)


def _combine_recipes(a: tuple, b: tuple, sign: float = 1.0) -> tuple:
    if sign == 1.0:
        return a + b
    return a + tuple({**t, "coef": -t.get("coef", 1.0)} for t in b)


@dataclass(frozen=True, eq=False)
class AssembledOperator:
    """A matrix over a :class:`FockBasis` plus the recipe it was built from."""

    basis: FockBasis
    matrix: Any
    recipe: tuple = ()

    def __post_init__(self):
        mat = _as_matrix(self.matrix)
        if mat.shape != (self.basis.dim, self.basis.dim):
            raise ValueError(f"matrix shape {mat.shape} does not match basis dimension {self.basis.dim}")
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else np.array(self.matrix)

    def tocsr(self):
        return self.matrix if self.is_sparse else sp.csr_array(self.matrix)

    def _check_other(self, other: "AssembledOperator"):
        if not self.basis.same_space(other.basis):
            raise ValueError("operators live on different bases")

    def _merge(self, other_mat, sign):
        a, b = self.matrix, other_mat
        if sp.issparse(a) and sp.issparse(b):
            return a + b if sign > 0 else a - b
        a = a.toarray() if sp.issparse(a) else a
        b = b.toarray() if sp.issparse(b) else b
        return a + b if sign > 0 else a - b

    def __add__(self, other):
        if isinstance(other, AssembledOperator):
            self._check_other(other)
            return AssembledOperator(self.basis, self._merge(other.matrix, +1), _combine_recipes(self.recipe, other.recipe))
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, AssembledOperator):
            self._check_other(other)
            return AssembledOperator(
                self.basis, self._merge(other.matrix, -1), _combine_recipes(self.recipe, other.recipe, -1.0)
            )
        return NotImplemented

    def __mul__(self, scalar):
        if np.isscalar(scalar):
            recipe = tuple({**t, "coef": scalar * t.get("coef", 1.0)} for t in self.recipe)
            return AssembledOperator(self.basis, self.matrix * scalar, recipe)
        return NotImplemented

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, AssembledOperator):
            self._check_other(other)
            a, b = self.matrix, other.matrix
            if sp.issparse(a) and not sp.issparse(b):
                prod = a @ b
            elif not sp.issparse(a) and sp.issparse(b):
                prod = (b.T @ a.T).T
            else:
                prod = a @ b
            return AssembledOperator(self.basis, prod, ({"op": "product", "factors": (self.recipe, other.recipe)},))
        if isinstance(other, FockVector):
            if not self.basis.same_space(other.basis):
                raise ValueError("vector lives on a different basis")
            return FockVector(self.basis, self.matrix @ other.coeffs)
        return self.matrix @ other

    def adjoint(self) -> "AssembledOperator":
        mat = self.matrix.conj().T
        return AssembledOperator(self.basis, mat, ({"op": "adjoint", "of": self.recipe},))

    def hermiticity_defect(self) -> float:
        """``max|A - A*| / max|A|`` (0 for the zero matrix)."""
        diff = self.matrix - self.matrix.conj().T
        if sp.issparse(diff):
            num = float(abs(diff).max()) if diff.nnz else 0.0
            scale = float(abs(self.matrix).max()) if self.matrix.nnz else 0.0
        else:
            num = float(np.max(np.abs(diff))) if diff.size else 0.0
            scale = float(np.max(np.abs(self.matrix))) if self.matrix.size else 0.0
        return num / scale if scale > 0 else num

    def is_hermitian(self, rtol: float = 1e-12) -> bool:
        return self.hermiticity_defect() <= rtol

    def expectation(self, vec: "FockVector | np.ndarray") -> complex:
        c = vec.coeffs if isinstance(vec, FockVector) else np.asarray(vec)
        return complex(np.vdot(c, self.matrix @ c))

    def norm_inf(self) -> float:
        """Max absolute row sum; an upper bound on the spectral norm of a Hermitian matrix."""
        if self.is_sparse:
            return float(abs(self.matrix).sum(axis=1).max()) if self.matrix.nnz else 0.0
        return float(np.abs(self.matrix).sum(axis=1).max())


@dataclass(frozen=True, eq=False)
class FockVector:
    """Coefficient vector over a :class:`FockBasis`."""

    basis: FockBasis
    coeffs: np.ndarray
    tail_mass: float | None = None

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if c.ndim != 1 or c.size != self.basis.dim:
            raise ValueError(f"coefficient length {c.size} does not match basis dimension {self.basis.dim}")
        object.__setattr__(self, "coeffs", _readonly(c))

    @cached_property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def normalized(self) -> "FockVector":
        return FockVector(self.basis, self.coeffs / self.norm, self.tail_mass)

    def vdot(self, other: "FockVector") -> complex:
        return complex(np.vdot(self.coeffs, other.coeffs))

    @classmethod
    def vacuum(cls, basis: FockBasis) -> "FockVector":
        c = np.zeros(basis.dim)
        c[0] = 1.0
        return cls(basis, c)


def sector_norms(vec: FockVector) -> np.ndarray:
    """Squared norms of the n-particle components, ``n = 0..n_max`` (qubit channels summed)."""
    basis = vec.basis
    w = np.abs(vec.coeffs) ** 2
    if basis.with_qubit:
        w = w[: basis.fock_dim] + w[basis.fock_dim :]
    return np.bincount(basis.totals, weights=w, minlength=basis.n_max + 1)


def _lift(basis: FockBasis, mat):
    """Tensor a Fock-space matrix with the qubit identity when needed."""
    if basis.with_qubit:
        return sp.kron(sp.identity(2, format="csr"), mat, format="csr")
    return mat


def _lowering_pairs(basis: FockBasis, j: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(source, target, sqrt(n_j)) for every state with n_j >= 1."""
    src = np.flatnonzero(basis.states[:, j] > 0)
    lowered = basis.states[src].copy()
    lowered[:, j] -= 1
    tgt = basis.lookup(lowered)
    return src, tgt, np.sqrt(basis.states[src, j].astype(float))


def _check_mode(basis: FockBasis, j: int):
    if not 0 <= j < basis.M:
        raise IndexError(f"mode index {j} out of range for {basis.M} modes")


def _check_grid(basis: FockBasis, grid: ModeGrid):
    if grid.M != basis.M:
        raise ValueError(f"grid has {grid.M} modes but the basis has {basis.M}")


def annihilation(basis: FockBasis, j: int) -> AssembledOperator:
    """``a_j |n> = sqrt(n_j) |n - e_j>``."""
    _check_mode(basis, j)
    src, tgt, amp = _lowering_pairs(basis, j)
    d = basis.fock_dim
    mat = sp.csr_array((amp, (tgt, src)), shape=(d, d))
    return AssembledOperator(basis, _lift(basis, mat), ({"op": "a", "mode": j},))


def creation(basis: FockBasis, j: int) -> AssembledOperator:
    """Adjoint of :func:`annihilation`; top-shell states are mapped to zero."""
    _check_mode(basis, j)
    src, tgt, amp = _lowering_pairs(basis, j)
    d = basis.fock_dim
    mat = sp.csr_array((amp, (src, tgt)), shape=(d, d))
    return AssembledOperator(basis, _lift(basis, mat), ({"op": "a_dag", "mode": j},))


def _field_matrix(basis: FockBasis, v: np.ndarray):
    d = basis.fock_dim
    rows, cols, vals = [], [], []
    for j in range(basis.M):
        if v[j] == 0:
            continue
        src, tgt, amp = _lowering_pairs(basis, j)
        # a_dag_j: tgt -> src with v_j ; a_j: src -> tgt with conj(v_j)
        rows += [src, tgt]
        cols += [tgt, src]
        vals += [v[j] * amp, np.conj(v[j]) * amp]
    if not rows:
        return sp.csr_array((d, d), dtype=v.dtype)
    return sp.csr_array(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(d, d)
    )


def field(basis: FockBasis, grid: ModeGrid, g: float = 1.0) -> AssembledOperator:
    """``phi(g v) = g * sum_j (v_j a_j^dag + conj(v_j) a_j)``."""
    _check_grid(basis, grid)
    v = g * grid.v
    return AssembledOperator(basis, _lift(basis, _field_matrix(basis, v)), ({"op": "phi", "g": g, "label": grid.label},))


def _diag(basis: FockBasis, values: np.ndarray):
    return _lift(basis, sp.diags_array(values, format="csr"))


def dGamma(basis: FockBasis, grid: ModeGrid | np.ndarray) -> AssembledOperator:
    """Second quantisation of the mode frequencies: diagonal ``sum_j n_j omega_j``."""
    omega = grid.omega if isinstance(grid, ModeGrid) else np.asarray(grid, dtype=float)
    if omega.size != basis.M:
        raise ValueError(f"{omega.size} frequencies for a basis with {basis.M} modes")
    return AssembledOperator(basis, _diag(basis, basis.states @ omega), ({"op": "dGamma"},))


def number_operator(basis: FockBasis) -> AssembledOperator:
    return AssembledOperator(basis, _diag(basis, basis.totals.astype(float)), ({"op": "N"},))


def parity(basis: FockBasis) -> AssembledOperator:
    """``Gamma(-1)``: diagonal ``(-1)^{total occupation}``."""
    signs = np.where(basis.totals % 2 == 0, 1.0, -1.0)
    return AssembledOperator(basis, _diag(basis, signs), ({"op": "Gamma(-1)"},))


def coherent_tail_mass(f: np.ndarray, n_max: int) -> float:
    """Weight of the normalised coherent state beyond total number ``n_max``.

    The total number of a multimode coherent state is Poisson with mean ``||f||^2``.
    """
    lam = float(np.sum(np.abs(f) ** 2))
    if lam == 0:
        return 0.0
    return float(stats.poisson.sf(n_max, lam))


def _log_amplitudes(states: np.ndarray, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """log|prod f_j^n_j / sqrt(n_j!)| and the phase, per state."""
    absf = np.abs(f)
    with np.errstate(divide="ignore"):
        logf = np.log(absf)
    phase_f = np.where(absf > 0, f / np.where(absf > 0, absf, 1), 1)
    occupied_zero = (states > 0) & (absf == 0)[None, :]
    with np.errstate(invalid="ignore"):
        logmag = np.where(states > 0, states * logf[None, :], 0.0).sum(axis=1) - 0.5 * gammaln(states + 1).sum(axis=1)
    logmag = np.where(occupied_zero.any(axis=1), -np.inf, logmag)
    phase = np.prod(phase_f[None, :] ** states, axis=1)
    return logmag, phase


def coherent_vector(
    basis: FockBasis,
    f: np.ndarray,
    normalized: bool = True,
    tail_tol: float = 1e-10,
) -> FockVector:
    """Exponential vector ``eps(f) = sum_n f^{(x)n} / sqrt(n!)`` on the truncated basis.

    With ``normalized`` the result is ``exp(-||f||^2/2) eps(f)``, the displaced
    vacuum.  The discarded weight is stored in ``tail_mass`` (relative to the
    untruncated norm) and a :class:`TruncationWarning` is raised above ``tail_tol``.
    """
    f = np.asarray(f).ravel()
    if f.size != basis.M:
        raise ValueError(f"{f.size} amplitudes for a basis with {basis.M} modes")
    if not np.all(np.isfinite(f)):
        raise ValueError("coherent amplitudes must be finite")
    logmag, phase = _log_amplitudes(basis.states, f)
    if normalized:
        logmag = logmag - 0.5 * float(np.sum(np.abs(f) ** 2))
    c = np.exp(logmag) * phase
    if not np.iscomplexobj(f):
        c = c.real
    tail = coherent_tail_mass(f, basis.n_max)
    if tail > tail_tol:
        warnings.warn(
            f"coherent vector truncated at n_max={basis.n_max} loses weight {tail:.3e}",
            TruncationWarning,
            stacklevel=2,
        )
    if basis.with_qubit:
        c = np.concatenate([c, np.zeros_like(c)])
    return FockVector(basis, c, tail_mass=tail)


def _log_laguerre(n_top: int, k_top: int, x: float) -> tuple[np.ndarray, np.ndarray]:
    """Sign and log-magnitude of ``L_n^{(k)}(x)`` for ``n <= n_top``, ``k <= k_top``.

    Forward three-term recurrence in ``n`` vectorised over ``k``, rescaled to
    stay inside the floating-point range for large degrees and arguments.
    """
    k = np.arange(k_top + 1, dtype=float)
    sign = np.empty((n_top + 1, k_top + 1))
    logabs = np.empty((n_top + 1, k_top + 1))
    prev = np.ones_like(k)
    scale = np.zeros_like(k)
    sign[0], logabs[0] = 1.0, 0.0
    if n_top == 0:
        return sign, logabs
    cur = 1.0 + k - x
    with np.errstate(divide="ignore"):
        sign[1], logabs[1] = np.sign(cur), np.log(np.abs(cur))
        for n in range(1, n_top):
            nxt = ((2 * n + 1 + k - x) * cur - (n + k) * prev) / (n + 1)
            prev, cur = cur, nxt
            big = np.maximum(np.abs(prev), np.abs(cur))
            rescale = (big > 1e100) | ((big < 1e-100) & (big > 0))
            if np.any(rescale):
                r = np.where(rescale, big, 1.0)
                prev, cur = prev / r, cur / r
                scale = scale + np.log(r)
            sign[n + 1] = np.sign(cur)
            logabs[n + 1] = np.log(np.abs(cur)) + scale
    return sign, logabs


def displacement_table(alpha: complex, n_rows: int, n_cols: int | None = None) -> np.ndarray:
    """Exact single-mode matrix elements ``<m|D(alpha)|n>``, ``m < n_rows``, ``n < n_cols``.

    ``D(alpha) = exp(alpha a^dag - conj(alpha) a)`` on the full Fock space.
    Uses the Laguerre closed form in log scale so that amplitudes far below
    the underflow of ``exp(-|alpha|^2/2)`` and polynomials far above the
    overflow threshold stay accurate.
    """
    n_cols = n_rows if n_cols is None else n_cols
    if alpha == 0:
        return np.eye(n_rows, n_cols)
    m = np.arange(n_rows)[:, None]
    n = np.arange(n_cols)[None, :]
    x = abs(alpha) ** 2
    lo = np.minimum(m, n)
    hi = np.maximum(m, n)
    k = hi - lo
    lsign, llog = _log_laguerre(int(lo.max()), int(k.max()), x)
    logmag = (
        0.5 * (gammaln(lo + 1) - gammaln(hi + 1)) - 0.5 * x + k * math.log(abs(alpha)) + llog[lo, k]
    )
    mag = np.exp(logmag) * lsign[lo, k]
    if np.iscomplexobj(alpha) and np.imag(alpha) != 0:
        u = alpha / abs(alpha)
        phase = np.where(m >= n, u**k, (-np.conj(u)) ** k)
        return mag * phase
    sign = 1.0 if np.real(alpha) > 0 else -1.0
    # real alpha: below the diagonal sign^k, above it (-sign)^k
    return mag * np.where(m >= n, sign**k, (-sign) ** k)


def _displacement_generator(basis: FockBasis, f: np.ndarray):
    # a^dag(f) - a(f) = sum_j f_j a_j^dag - conj(f_j) a_j
    d = basis.fock_dim
    rows, cols, vals = [], [], []
    for j in range(basis.M):
        if f[j] == 0:
            continue
        src, tgt, amp = _lowering_pairs(basis, j)
        rows += [src, tgt]
        cols += [tgt, src]
        vals += [f[j] * amp, -np.conj(f[j]) * amp]
    if not rows:
        return sp.csr_array((d, d), dtype=f.dtype)
    return sp.csr_array((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(d, d))


def displacement_block(rows: FockBasis, cols: FockBasis, f: np.ndarray) -> np.ndarray:
    """Exact elements ``<m|W(f,1)|n>`` for ``m`` in ``rows`` and ``n`` in ``cols`` (Fock parts only)."""
    f = np.asarray(f).ravel()
    if rows.M != cols.M or f.size != rows.M:
        raise ValueError("bases and amplitude must share the mode count")
    r, c = rows.states, cols.states
    out = np.ones((rows.fock_dim, cols.fock_dim), dtype=complex if np.iscomplexobj(f) else float)
    for j in range(rows.M):
        if f[j] == 0:
            # a mode with zero amplitude contributes a Kronecker delta in n_j
            out = out * (r[:, j][:, None] == c[:, j][None, :])
            continue
        table = displacement_table(f[j], rows.n_max + 1, cols.n_max + 1)
        out = out * table[r[:, j][:, None], c[:, j][None, :]]
    return out


def _exact_displacement(basis: FockBasis, f: np.ndarray) -> np.ndarray:
    return displacement_block(basis, basis, f)


def _low_block_defect(basis: FockBasis, mat: np.ndarray) -> float:
    low = np.flatnonzero(basis.totals <= basis.n_max // 2)
    gram = mat.conj().T @ mat[:, low]
    gram = gram[low]
    return float(np.linalg.norm(gram - np.eye(low.size), 2))


def displacement(
    basis: FockBasis,
    f: np.ndarray,
    method: str = "expm",
    check_unitarity: bool = True,
    unitarity_tol: float = 1e-8,
    tail_tol: float = 1e-10,
) -> AssembledOperator:
    """Weyl displacement ``W(f, 1) = exp(a^dag(f) - a(f))`` on the truncated space.

    ``method="expm"`` exponentiates the truncated skew-Hermitian generator
    (exactly unitary on the truncated space, wrong in the top shells when the
    coherent tail is heavy).  ``method="exact"`` compresses the untruncated
    operator onto the basis using closed-form matrix elements; it stays
    accurate for arbitrarily large ``f`` but is only unitary up to the tail.

    The low-block unitarity defect ``||(W*W - 1)|_{N <= n_max/2}||`` is stored
    in the recipe; with ``check_unitarity`` a defect above ``unitarity_tol``
    raises :class:`UnitarityError`.
    """
    f = np.asarray(f).ravel()
    if f.size != basis.M:
        raise ValueError(f"{f.size} amplitudes for a basis with {basis.M} modes")
    if not np.all(np.isfinite(f)):
        raise ValueError("displacement amplitude must be finite")
    if not np.iscomplexobj(f):
        f = f.astype(float)
    tail = coherent_tail_mass(f, basis.n_max)
    if method == "expm":
        gen = _displacement_generator(basis, f)
        mat = scipy.linalg.expm(gen.toarray())
        if tail > tail_tol:
            warnings.warn(
                f"truncated displacement with ||f||^2={np.sum(np.abs(f)**2):.3g} at n_max={basis.n_max} "
                f"has coherent tail {tail:.3e}; raise n_max or use method='exact'",
                TruncationWarning,
                stacklevel=2,
            )
    elif method == "exact":
        mat = _exact_displacement(basis, f)
    else:
        raise ValueError(f"unknown displacement method {method!r}")
    defect = _low_block_defect(basis, mat)
    if check_unitarity and defect > unitarity_tol:
        raise UnitarityError(
            f"displacement unitarity defect {defect:.3e} on the low-occupation block exceeds {unitarity_tol:.1e}"
        )
    full = mat if not basis.with_qubit else np.kron(np.eye(2), mat)
    recipe = ({"op": "W(f,1)", "f": tuple(complex(x) for x in f), "method": method,
               "unitarity_defect": defect, "tail_mass": tail},)
    return AssembledOperator(basis, full, recipe)


def weyl_parity(
    basis: FockBasis,
    f: np.ndarray,
    method: str = "expm",
    check_unitarity: bool = True,
    unitarity_tol: float = 1e-8,
    tail_tol: float = 1e-10,
) -> AssembledOperator:
    """``W(f, -1) = W(f, 1) Gamma(-1)``: a self-adjoint involution (up to truncation)."""
    f = np.asarray(f).ravel()
    if not np.any(f):
        return parity(basis)
    disp = displacement(basis, f, method, check_unitarity, unitarity_tol, tail_tol)
    signs = np.where(basis.totals % 2 == 0, 1.0, -1.0)
    if basis.with_qubit:
        signs = np.concatenate([signs, signs])
    recipe = ({**disp.recipe[0], "op": "W(f,-1)"},)
    return AssembledOperator(basis, disp.matrix * signs[None, :], recipe)
