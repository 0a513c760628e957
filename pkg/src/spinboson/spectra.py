"""Eigensolvers, resolvents and numerical residuals of the operator identities."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fock import AssembledOperator, FockBasis, FockVector, annihilation
from .model import ModelParams, build_fiber

__all__ = [
    "DEFAULT_DENSE_CAP",
    "SpectralError",
    "SolverError",
    "ResolventError",
    "SpectralResult",
    "GapCensus",
    "eigensolve",
    "phase_fix",
    "refine_ground_pair",
    "resolve",
    "pullthrough_residual",
    "FeshbachRow",
    "feshbach_check",
    "semigroup_distance",
    "resolvent_distance",
    "gap_census",
    "SignReport",
    "sign_structure",
    "BoundReport",
    "pointwise_bound",
    "amplitude_bound",
    "tridiagonal_ground_energy",
    "single_mode_fiber_ground_energy",
]

log = logging.getLogger(__name__)

DEFAULT_DENSE_CAP = 4000


class SpectralError(RuntimeError):
    """Base class for solver failures."""


class SolverError(SpectralError):
    """Eigensolver did not converge or violated the residual contract."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ResolventError(SpectralError):
    """Resolvent requested at a point too close to (or inside) the spectrum."""


@dataclass(frozen=True, eq=False)
class SpectralResult:
    """Lowest eigenpairs of an :class:`AssembledOperator`.

    ``eigenvectors`` holds the phase-fixed eigenvectors as columns.
    ``gap_edge`` and ``in_gap_count`` are filled when a gap proxy ``m`` is given.
    """

    basis: FockBasis
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None
    residuals: np.ndarray
    mode: str
    gap: float | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def gap_edge(self) -> float | None:
        return None if self.gap is None else self.ground_energy + self.gap

    @property
    def in_gap_count(self) -> int | None:
        return None if self.gap is None else gap_census(self.eigenvalues, self.gap).count

    def vector(self, i: int = 0) -> FockVector:
        if self.eigenvectors is None:
            raise ValueError("eigenvectors were not requested")
        return FockVector(self.basis, self.eigenvectors[:, i])

    @property
    def ground_state(self) -> FockVector:
        return self.vector(0)


def phase_fix(vec: np.ndarray, threshold: float = 1e-12) -> np.ndarray:
    """Rotate so the vacuum component is real positive (or the largest one if the vacuum is ~0)."""
    vec = np.asarray(vec)
    pivot = 0 if abs(vec[0]) >= threshold else int(np.argmax(np.abs(vec)))
    c = vec[pivot]
    if c == 0:
        return vec
    out = vec * (abs(c) / c)
    if np.isrealobj(vec):
        return out.real
    out[pivot] = abs(c)
    return out


def _operator_norm_estimate(mat) -> float:
    if sp.issparse(mat):
        return float(abs(mat).sum(axis=1).max()) if mat.nnz else 0.0
    return float(np.abs(mat).sum(axis=1).max()) if mat.size else 0.0


def _residuals(mat, vals, vecs) -> np.ndarray:
    r = mat @ vecs - vecs * vals[None, :]
    return np.linalg.norm(r, axis=0)


def refine_ground_pair(mat: np.ndarray, lam: float, vec: np.ndarray, max_iter: int = 30):
    """Sharpen the lowest eigenpair of a dense Hermitian matrix to relative precision.

    Eliminates every coordinate except the largest component ``p`` and solves
    the scalar secular equation ``A_pp - x - b* (A' - x)^{-1} b = 0`` by Newton
    steps, which keeps relative accuracy for eigenvalues far below the matrix
    norm.  Falls back to the input when the reduced matrix is not positive
    definite at the iterate (not the lowest eigenvalue).
    """
    p = int(np.argmax(np.abs(vec)))
    keep = np.ones(mat.shape[0], dtype=bool)
    keep[p] = False
    b = mat[keep, p]
    reduced = mat[np.ix_(keep, keep)]
    app = float(np.real(mat[p, p]))
    eye = np.eye(reduced.shape[0])
    x = float(lam)
    sol = None
    for _ in range(max_iter):
        try:
            cho = scipy.linalg.cho_factor(reduced - x * eye, check_finite=False)
        except np.linalg.LinAlgError:
            return lam, vec, False
        sol = scipy.linalg.cho_solve(cho, b, check_finite=False)
        f = app - x - float(np.real(np.vdot(b, sol)))
        fprime = -1.0 - float(np.real(np.vdot(sol, sol)))
        step = f / fprime
        x_new = x - step
        if abs(step) <= 4 * np.finfo(float).eps * abs(x_new) or step == 0:
            x = x_new
            break
        x = x_new
    try:
        cho = scipy.linalg.cho_factor(reduced - x * eye, check_finite=False)
    except np.linalg.LinAlgError:
        return lam, vec, False
    sol = scipy.linalg.cho_solve(cho, b, check_finite=False)
    out = np.empty(mat.shape[0], dtype=np.result_type(mat, float))
    out[p] = 1.0
    out[keep] = -sol
    out = out / np.linalg.norm(out)
    return x, out, True


def eigensolve(
    A: AssembledOperator,
    k: int = 6,
    mode: str = "auto",
    dense_cap: int = DEFAULT_DENSE_CAP,
    gap: float | None = None,
    vectors: bool = True,
    refine: bool = False,
    tol: float = 0.0,
    maxiter: int | None = None,
    residual_rtol: float = 1e-8,
) -> SpectralResult:
    """Lowest ``k`` eigenpairs of a Hermitian operator.

    ``mode="dense"`` uses LAPACK (``dim <= dense_cap``), ``"iterative"`` the
    implicitly restarted Lanczos method of ARPACK with a fixed start vector,
    and ``"auto"`` picks dense up to the cap.  ``refine`` sharpens the ground
    pair with :func:`refine_ground_pair` (dense matrices only).

    Every returned pair satisfies ``||A psi - lam psi|| <= residual_rtol * (|lam| + ||A||)``
    or :class:`SolverError` is raised.
    """
    dim = A.dim
    k = min(k, dim)
    if k < 1:
        raise ValueError("need at least one eigenpair")
    if mode == "auto":
        mode = "dense" if dim <= dense_cap else "iterative"
    mat = A.matrix
    diagnostics: dict = {"dim": dim}
    if mode == "dense":
        if dim > dense_cap:
            raise SolverError(f"dense solve of dimension {dim} exceeds the dense cap {dense_cap}")
        dense = mat.toarray() if sp.issparse(mat) else mat
        if vectors:
            vals, vecs = scipy.linalg.eigh(dense, subset_by_index=[0, k - 1])
        else:
            vals = scipy.linalg.eigh(dense, eigvals_only=True, subset_by_index=[0, k - 1])
            vecs = None
        diagnostics["solver"] = "lapack_eigh"
    elif mode == "iterative":
        if k >= dim - 1:
            return eigensolve(A, k, "dense", max(dense_cap, dim), gap, vectors, refine, tol, maxiter, residual_rtol)
        op = mat if sp.issparse(mat) else np.asarray(mat)
        v0 = np.ones(dim) / np.sqrt(dim)
        ncv = min(dim, max(2 * k + 1, 20))
        try:
            vals, vecs = spla.eigsh(op, k=k, which="SA", v0=v0, ncv=ncv, tol=tol, maxiter=maxiter)
        except spla.ArpackNoConvergence as exc:
            raise SolverError(
                f"Lanczos did not converge: {len(exc.eigenvalues)} of {k} eigenpairs after maxiter",
                {"converged": len(exc.eigenvalues), "requested": k, "ncv": ncv},
            ) from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        diagnostics.update(solver="arpack_eigsh", ncv=ncv)
    else:
        raise ValueError(f"unknown eigensolver mode {mode!r}")

    if vecs is not None:
        vecs = np.column_stack([phase_fix(vecs[:, i]) for i in range(vecs.shape[1])])
        if refine:
            dense = mat.toarray() if sp.issparse(mat) else np.asarray(mat)
            lam, vec, ok = refine_ground_pair(dense, vals[0], vecs[:, 0])
            diagnostics["refined"] = ok
            if ok:
                vals = vals.copy()
                vals[0] = lam
                vecs = vecs.copy()
                vecs[:, 0] = phase_fix(vec)
        res = _residuals(mat, vals, vecs)
        scale = _operator_norm_estimate(mat)
        bad = res > residual_rtol * (np.abs(vals) + scale)
        if np.any(bad):
            raise SolverError(
                f"residual contract violated for {int(bad.sum())} eigenpair(s), max residual {res.max():.3e}",
                {"residuals": res.tolist(), **diagnostics},
            )
    else:
        res = np.zeros(len(vals))
    return SpectralResult(A.basis, np.asarray(vals), vecs, res, mode, gap, diagnostics)


def _ground_estimate(A: AssembledOperator, dense_cap: int) -> float:
    return eigensolve(A, 1, "auto", dense_cap, vectors=False).ground_energy


def resolve(
    A: AssembledOperator,
    lam: complex,
    rhs: FockVector | np.ndarray,
    ground_energy: float | None = None,
    dense_cap: int = DEFAULT_DENSE_CAP,
    margin: float = 1e-6,
    rtol: float = 1e-10,
) -> FockVector:
    """Solve ``(A - lam) x = rhs``.

    Real ``lam`` must lie at least ``margin`` below the ground energy
    (computed if not given); complex ``lam`` needs a nonzero imaginary part.
    """
    b = rhs.coeffs if isinstance(rhs, FockVector) else np.asarray(rhs)
    lam = complex(lam)
    if lam.imag == 0:
        lam = lam.real
        e0 = _ground_estimate(A, dense_cap) if ground_energy is None else ground_energy
        if lam > e0 - margin:
            raise ResolventError(f"shift {lam:.6g} is not below the spectrum (ground energy {e0:.6g})")
    mat = A.matrix
    if sp.issparse(mat):
        shifted = (mat - lam * sp.identity(A.dim, format="csr")).tocsc()
        x = spla.spsolve(shifted, b)
    else:
        shifted = mat - lam * np.eye(A.dim)
        assume = "pos" if isinstance(lam, float) else "gen"
        x = scipy.linalg.solve(shifted, b, assume_a=assume)
    resid = np.linalg.norm(shifted @ x - b)
    if resid > rtol * max(np.linalg.norm(b), 1e-300):
        raise ResolventError(f"linear solve residual {resid:.3e} above tolerance")
    basis = rhs.basis if isinstance(rhs, FockVector) else A.basis
    return FockVector(basis, x)


def pullthrough_residual(
    params: ModelParams,
    psi: FockVector,
    ground_energy: float,
    dense_cap: int = DEFAULT_DENSE_CAP,
) -> np.ndarray:
    """Per-mode residuals ``||a_j psi + g v_j (F_{-eta} - E + omega_j)^{-1} psi||``.

    ``psi`` is a normalised ground state of ``F_eta`` (eta <= 0) with energy ``E``.
    """
    if params.eta > 0:
        raise ValueError("the pull-through identity is applied to eta <= 0 ground states")
    basis = psi.basis
    opposite = build_fiber(params, eta=-params.eta)
    # F_{-eta} >= F_eta's ground energy, so the shifted operator is positive definite
    opp_ground = _ground_estimate(opposite, dense_cap)
    out = np.zeros(params.grid.M)
    for j in range(params.grid.M):
        lhs = annihilation(basis, j).matrix @ psi.coeffs
        gv = params.coupling[j]
        if gv != 0:
            shift = ground_energy - params.grid.omega[j]
            sol = resolve(opposite, shift, psi, ground_energy=opp_ground, dense_cap=dense_cap, margin=0.0)
            lhs = lhs + gv * sol.coeffs
        out[j] = float(np.linalg.norm(lhs))
    return out


@dataclass(frozen=True)
class FeshbachRow:
    lam: float
    lhs: float
    rhs: float
    defect: float


def feshbach_check(
    params: ModelParams,
    lams: Sequence[float],
    ground_energy: float | None = None,
    min_distance: float = 1e-6,
) -> list[FeshbachRow]:
    """Compare ``<vac, (F - lam)^{-1} vac>`` with ``1 / (F_00 - lam - b* (F' - lam)^{-1} b)``.

    ``F'`` is the fiber with the vacuum row and column deleted and ``b`` the
    vacuum column without its diagonal entry.  Dense evaluation.
    """
    F = build_fiber(params).toarray()
    if ground_energy is None:
        ground_energy = float(scipy.linalg.eigh(F, eigvals_only=True, subset_by_index=[0, 0])[0])
    rows = []
    dim = F.shape[0]
    e0 = np.zeros(dim)
    e0[0] = 1.0
    b = F[1:, 0]
    reduced = F[1:, 1:]
    for lam in lams:
        if lam > ground_energy - min_distance:
            raise ResolventError(f"lambda={lam:.6g} is within {min_distance:g} of or above the ground energy")
        lhs = float(np.real(scipy.linalg.solve(F - lam * np.eye(dim), e0, assume_a="pos")[0]))
        x = scipy.linalg.solve(reduced - lam * np.eye(dim - 1), b, assume_a="pos")
        rhs = 1.0 / float(np.real(F[0, 0] - lam - np.vdot(b, x)))
        rows.append(FeshbachRow(float(lam), lhs, rhs, abs(lhs - rhs)))
    return rows


def _dense(A) -> np.ndarray:
    if isinstance(A, AssembledOperator):
        return A.toarray()
    return A.toarray() if sp.issparse(A) else np.asarray(A)


def semigroup_distance(A, B, ts: Sequence[float], dense_cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
    """Spectral-norm distances ``||exp(-tA) - exp(-tB)||`` for each ``t > 0``."""
    a, b = _dense(A), _dense(B)
    if a.shape != b.shape:
        raise ValueError("operators have different dimensions")
    if a.shape[0] > dense_cap:
        raise SolverError(f"dimension {a.shape[0]} exceeds the dense cap {dense_cap}")
    la, ua = scipy.linalg.eigh(a)
    lb, ub = scipy.linalg.eigh(b)
    out = []
    for t in ts:
        if t <= 0:
            raise ValueError("semigroup times must be positive")
        ea = (ua * np.exp(-t * (la - min(la[0], lb[0])))) @ ua.conj().T
        eb = (ub * np.exp(-t * (lb - min(la[0], lb[0])))) @ ub.conj().T
        scale = np.exp(-t * min(la[0], lb[0]))
        out.append(scale * np.linalg.norm(ea - eb, 2))
    return np.array(out)


def resolvent_distance(A, B, z: complex = -1j, dense_cap: int = DEFAULT_DENSE_CAP) -> float:
    """``||(A - z)^{-1} - (B - z)^{-1}||`` in spectral norm.

    Evaluated as ``(A - z)^{-1} (B - A) (B - z)^{-1}`` so that a small
    difference is not lost to cancellation between two order-one resolvents.
    """
    a, b = _dense(A), _dense(B)
    if a.shape != b.shape:
        raise ValueError("operators have different dimensions")
    if a.shape[0] > dense_cap:
        raise SolverError(f"dimension {a.shape[0]} exceeds the dense cap {dense_cap}")
    la, ua = scipy.linalg.eigh(a)
    lb, ub = scipy.linalg.eigh(b)
    middle = ua.conj().T @ (b - a) @ ub
    middle = middle / (la - z)[:, None] / (lb - z)[None, :]
    # unitary factors do not change the spectral norm
    return _spectral_norm(middle)


def _spectral_norm(mat: np.ndarray) -> float:
    # a full SVD is wasteful when only the top singular value is needed
    n = min(mat.shape)
    if not np.any(mat):
        return 0.0
    if n <= 200:
        return float(np.linalg.norm(mat, 2))
    v0 = np.ones(mat.shape[1]) / np.sqrt(mat.shape[1])
    try:
        top = spla.svds(mat, k=1, v0=v0.astype(mat.dtype), return_singular_vectors=False, tol=1e-14)
    except spla.ArpackError:
        return float(np.linalg.norm(mat, 2))
    return float(top[0])


@dataclass(frozen=True)
class GapCensus:
    count: int
    ambiguous: int
    edge: float
    splittings: np.ndarray


def gap_census(eigenvalues, m: float, ambiguity: float = 1e-9) -> GapCensus:
    """Count eigenvalues in ``[E, E + m)``; those within ``ambiguity`` of the edge are not counted."""
    if isinstance(eigenvalues, SpectralResult):
        eigenvalues = eigenvalues.eigenvalues
    vals = np.sort(np.asarray(eigenvalues, dtype=float))
    edge = vals[0] + m
    near = np.abs(vals - edge) <= ambiguity
    inside = (vals < edge) & ~near
    return GapCensus(int(inside.sum()), int(near.sum()), float(edge), np.diff(vals[inside]))


@dataclass(frozen=True)
class SignReport:
    passed: bool
    min_signed: float
    max_imag: float
    support_violation: float


def _mode_phase(v: np.ndarray) -> np.ndarray:
    absv = np.abs(v)
    return np.where(absv > 0, -v / np.where(absv > 0, absv, 1), 0)


def sign_structure(psi: FockVector, v: np.ndarray, atol: float = 1e-10) -> SignReport:
    """Check ``prod_j conj(h_j)^{n_j} psi_n >= 0`` with ``h_j = -v_j/|v_j|``.

    Also checks that amplitudes vanish on states exciting a mode with ``v_j = 0``.
    Tolerances are relative to ``max|psi|``.  Expects a qubit-free vector.
    """
    basis = psi.basis
    if basis.with_qubit:
        raise ValueError("sign structure is defined for fiber vectors")
    c = phase_fix(psi.coeffs)
    scale = float(np.max(np.abs(c))) or 1.0
    h = _mode_phase(np.asarray(v))
    dead = np.abs(np.asarray(v)) == 0
    states = basis.states
    touches_dead = (states[:, dead] > 0).any(axis=1) if dead.any() else np.zeros(basis.fock_dim, bool)
    factor = np.prod(np.conj(h)[None, :] ** np.where(dead[None, :], 0, states), axis=1)
    signed = factor * c
    live = ~touches_dead
    min_signed = float(np.min(np.real(signed[live]))) / scale
    max_imag = float(np.max(np.abs(np.imag(signed[live])))) / scale
    support = float(np.max(np.abs(c[touches_dead]))) / scale if touches_dead.any() else 0.0
    passed = min_signed >= -atol and max_imag <= atol and support <= atol
    return SignReport(passed, min_signed, max_imag, support)


def amplitude_bound(basis: FockBasis, coupling: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """``prod_j (|g v_j| / omega_j)^{n_j} / sqrt(prod_j n_j!)`` per basis state."""
    from scipy.special import gammaln

    ratio = np.abs(coupling) / omega
    states = basis.states
    with np.errstate(divide="ignore"):
        logr = np.log(ratio)
    with np.errstate(invalid="ignore"):
        logb = np.where(states > 0, states * logr[None, :], 0.0).sum(axis=1) - 0.5 * gammaln(states + 1).sum(axis=1)
    return np.exp(logb)


@dataclass(frozen=True)
class BoundReport:
    passed: bool
    worst_ratio: float
    worst_excess: float
    worst_state: tuple


def pointwise_bound(
    psi: FockVector,
    coupling: np.ndarray,
    omega: np.ndarray,
    slack: float = 1e-6,
    atol: float = 1e-10,
) -> BoundReport:
    """Check ``|psi_n| <= bound_n (1 + slack) + atol`` for every kept state.

    ``coupling`` is the scaled vector ``g v``.  ``worst_ratio`` is
    ``max |psi_n| / bound_n`` over states with a nonzero bound.
    """
    basis = psi.basis
    c = np.abs(psi.coeffs)
    bound = amplitude_bound(basis, coupling, omega)
    excess = c - bound * (1 + slack)
    worst = int(np.argmax(excess))
    nz = bound > 0
    ratio = float(np.max(c[nz] / bound[nz])) if nz.any() else 0.0
    return BoundReport(
        bool(excess[worst] <= atol),
        ratio,
        float(excess[worst]),
        tuple(int(x) for x in basis.states[worst]),
    )


def tridiagonal_ground_energy(diag, offdiag, dps: int, start: float | None = None, max_iter: int = 200):
    """Lowest eigenvalue of a real symmetric tridiagonal matrix in ``dps``-digit arithmetic.

    ``diag`` and ``offdiag`` may hold floats or ``mpmath.mpf`` values (pass
    the latter when the entries themselves must be exact beyond double
    precision).  Newton iteration on the characteristic polynomial starts
    just below the double-precision estimate; the LDL^T pivots stay positive
    below the spectrum, which makes the iteration monotone.  Returns an
    ``mpmath.mpf``.
    """
    import mpmath

    if start is None:
        start = float(
            scipy.linalg.eigvalsh_tridiagonal(
                np.array([float(x) for x in diag]),
                np.array([float(x) for x in offdiag]),
                select="i",
                select_range=(0, 0),
            )[0]
        )
    with mpmath.workdps(dps):
        a = [mpmath.mpf(x) for x in diag]
        b2 = [mpmath.mpf(x) ** 2 for x in offdiag]
        lam = mpmath.mpf(start) - mpmath.mpf(1e-9) * (1 + abs(start))
        tol = mpmath.mpf(10) ** (-dps + 15)
        settled = mpmath.mpf(10) ** (-(dps // 2))
        last_step = None
        for _ in range(max_iter):
            d = a[0] - lam
            dp = mpmath.mpf(-1)
            crossed = d <= 0
            logderiv = 0 if crossed else dp / d
            for i in range(1, len(a)):
                if crossed:
                    break
                ratio = b2[i - 1] / d
                dp = -1 + ratio * dp / d
                d = a[i] - lam - ratio
                crossed = d <= 0
                if not crossed:
                    logderiv += dp / d
            if crossed:
                if d == 0:
                    return +lam
                # once converged, rounding can put the iterate a few ulps past the root
                if last_step is not None and abs(last_step) <= settled * (1 + abs(lam)):
                    return +lam
                raise SolverError("Newton iterate passed the lowest eigenvalue")
            step = -1 / logderiv
            lam = lam + step
            last_step = step
            if abs(step) <= tol * (1 + abs(lam)):
                return +lam
    raise SolverError("high-precision tridiagonal Newton iteration did not converge")


def single_mode_fiber_ground_energy(eta: float, omega: float, coupling: complex, n_max: int, dps: int):
    """High-precision lowest eigenvalue of the truncated single-mode fiber.

    The single-mode fiber is tridiagonal in the occupation basis; the phase of
    the coupling can be gauged away, so only ``|g v|`` enters.
    """
    import mpmath

    with mpmath.workdps(dps + 10):
        w = mpmath.mpf(omega)
        c = mpmath.mpf(abs(coupling))
        eta_mp = mpmath.mpf(eta)
        diag = [eta_mp * (1 if n % 2 == 0 else -1) + w * n for n in range(n_max + 1)]
        off = [c * mpmath.sqrt(n) for n in range(1, n_max + 1)]
    return tridiagonal_ground_energy(diag, off, dps)
