"""Self-contained property suites run by ``spinboson check <suite>``.

Each suite builds its own small models and returns :class:`CheckResult`
records.  Nothing here depends on the sweep harness, so the suites double as
an independent cross-check of it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
import scipy.linalg

from .fock import (
    FockVector,
    ModeGrid,
    annihilation,
    coherent_vector,
    creation,
    displacement,
    enumerate_basis,
    weyl_parity,
)
from .model import ModelParams, build_fiber, build_full, parity_conjugation
from .spectra import (
    eigensolve,
    feshbach_check,
    pointwise_bound,
    pullthrough_residual,
    sign_structure,
)

__all__ = ["CheckResult", "SUITES", "run_suite", "format_result", "converged_ground_state", "default_ground_states"]


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    passed: bool
    value: float
    tol: float
    detail: str = ""


def format_result(r: CheckResult) -> str:
    status = "PASS" if r.passed else "FAIL"
    extra = f" [{r.detail}]" if r.detail else ""
    return f"{status} {r.suite}: {r.name} = {r.value:.3e} (tol {r.tol:.1e}){extra}"


def _result(suite, name, value, tol, detail="", below=True) -> CheckResult:
    value = float(value)
    ok = value <= tol if below else value >= tol
    return CheckResult(suite, name, bool(ok and np.isfinite(value)), value, tol, detail)


SINGLE = ModeGrid(np.array([1.0]), np.array([1.0]), label="single")
TWO = ModeGrid(np.array([1.0, 2.0]), np.array([0.7, 0.3]), label="two")
TWO_COMPLEX = ModeGrid(np.array([1.0, 1.5]), np.array([0.6, 0.4j]), label="two_complex")
SPARSE_SUPPORT = ModeGrid(np.array([1.0, 1.3, 2.0]), np.array([0.8, 0.0, 0.5]), label="zero_coupling_mode")


def converged_ground_state(eta, g, grid, n_start=10, step=6, rtol=1e-10, max_steps=8):
    """Ground pair of ``F_eta`` with ``n_max`` raised until the energy settles."""
    prev = None
    for i in range(max_steps):
        params = ModelParams(eta, g, grid, n_start + i * step)
        res = eigensolve(build_fiber(params), k=2, mode="auto")
        e = res.ground_energy
        if prev is not None and abs(e - prev) <= rtol * max(1.0, abs(e)):
            return params, res
        prev = e
    return params, res


def default_ground_states():
    """Ground states of the built-in eta <= 0 models used by the state suites."""
    cases = [
        (0.0, 0.5, SINGLE),
        (-1.0, 1.0, SINGLE),
        (-1.0, 2.0, SINGLE),
        (-0.4, 1.0, TWO),
        (-0.5, 1.0, TWO_COMPLEX),
        (-1.0, 1.0, SPARSE_SUPPORT),
    ]
    out = []
    for eta, g, grid in cases:
        params, res = converged_ground_state(eta, g, grid)
        out.append((f"{grid.label} eta={eta:g} g={g:g}", res.ground_state, params))
    return out


def suite_ccr() -> list[CheckResult]:
    out = []
    for M, n_max in ((1, 12), (2, 8), (3, 6)):
        basis = enumerate_basis(M, n_max)
        low = np.flatnonzero(basis.totals <= n_max - 1)
        worst_mixed = 0.0
        worst_pure = 0.0
        for i in range(M):
            ai = annihilation(basis, i).toarray()
            for j in range(M):
                aj = annihilation(basis, j).toarray()
                adj = creation(basis, j).toarray()
                comm = ai @ adj - adj @ ai
                target = np.eye(basis.dim) if i == j else 0.0
                worst_mixed = max(worst_mixed, float(np.max(np.abs((comm - target)[np.ix_(low, low)]))))
                worst_pure = max(worst_pure, float(np.max(np.abs(ai @ aj - aj @ ai))))
        out.append(_result("ccr", f"[a_i, a_j^*] - delta_ij, M={M}", worst_mixed, 1e-12, "occupation <= n_max-1"))
        out.append(_result("ccr", f"[a_i, a_j], M={M}", worst_pure, 1e-12))
    return out


def suite_parity_decomposition() -> list[CheckResult]:
    params = ModelParams(0.4, 1.0, TWO, 8)
    H = build_full(params).toarray()
    fp = build_fiber(params).toarray()
    fm = build_fiber(params, eta=-params.eta).toarray()
    basis = params.basis(with_qubit=True)
    # V H V* column by column
    vh = np.empty_like(H)
    for col in range(H.shape[1]):
        e = np.zeros(H.shape[0])
        e[col] = 1.0
        up, down = parity_conjugation(FockVector(basis, e))
        hcol = H @ np.concatenate([up.coeffs, down.coeffs])
        up2, down2 = parity_conjugation(FockVector(basis, hcol))
        vh[:, col] = np.concatenate([up2.coeffs, down2.coeffs])
    block = scipy.linalg.block_diag(fp, fm)
    spectrum_h = scipy.linalg.eigvalsh(H)
    spectrum_f = np.sort(np.concatenate([scipy.linalg.eigvalsh(fp), scipy.linalg.eigvalsh(fm)]))
    return [
        _result("parity_decomposition", "||V H V* - (F_eta + F_-eta)||_max", np.max(np.abs(vh - block)), 1e-10),
        _result("parity_decomposition", "spectrum(H) vs union of fiber spectra", np.max(np.abs(spectrum_h - spectrum_f)), 1e-10),
    ]


def suite_van_hove() -> list[CheckResult]:
    out = []
    for grid, g, n_max in ((ModeGrid(np.array([1.0]), np.array([0.5])), 1.0, 40), (TWO, 1.0, 30), (TWO_COMPLEX, 1.2, 30)):
        params = ModelParams(0.0, g, grid, n_max)
        res = eigensolve(build_fiber(params), k=1)
        exact = -g * g * grid.ir_norm_sq
        out.append(_result("van_hove", f"ground energy error, {grid.label or 'single'}", abs(res.ground_energy - exact), 1e-8))
        coh = coherent_vector(params.basis(), -g * grid.v / grid.omega, tail_tol=np.inf)
        overlap = abs(np.vdot(coh.coeffs, res.eigenvectors[:, 0]))
        out.append(_result("van_hove", f"1 - |<coherent, ground>|, {grid.label or 'single'}", 1 - overlap, 1e-8))
    return out


def suite_pullthrough() -> list[CheckResult]:
    out = []
    for eta, g, grid in ((-1.0, 1.0, SINGLE), (-0.4, 1.0, TWO), (-1.0, 1.0, SPARSE_SUPPORT)):
        params, res = converged_ground_state(eta, g, grid, rtol=1e-13)
        psi = res.ground_state
        r = pullthrough_residual(params, psi, res.ground_energy)
        out.append(_result("pullthrough", f"max_j residual, {grid.label} eta={eta:g}", np.max(r), 1e-6))
        # one-particle amplitudes against the pointwise bound, loosened by the residual
        one = [params.basis().index(np.eye(grid.M, dtype=int)[j]) for j in range(grid.M)]
        amp = np.abs(psi.coeffs[one])
        excess = amp - (g * np.abs(grid.v) / grid.omega + r)
        out.append(_result("pullthrough", f"one-particle amplitude excess, {grid.label}", np.max(excess), 0.0))
    return out


def suite_feshbach() -> list[CheckResult]:
    out = []
    for eta, grid in ((-0.4, TWO), (0.4, TWO), (-0.5, TWO_COMPLEX)):
        params = ModelParams(eta, 1.0, grid, 8)
        e = eigensolve(build_fiber(params), k=1, mode="dense").ground_energy
        lams = e - np.array([0.01, 0.1, 0.5, 1.0, 3.0])
        rows = feshbach_check(params, lams, e)
        out.append(_result("feshbach", f"max defect over 5 lambdas, {grid.label} eta={eta:g}",
                           max(r.defect for r in rows), 1e-9))
        out.append(_result("feshbach", f"min <vac,(F-lam)^-1 vac>, {grid.label} eta={eta:g}",
                           min(min(r.lhs, r.rhs) for r in rows), 0.0, below=False))
    decoupled = ModelParams(-0.7, 0.0, TWO, 6)
    rows = feshbach_check(decoupled, [-1.0, -2.0])
    out.append(_result("feshbach", "g=0 lhs vs 1/(eta - lam)", max(abs(r.lhs - 1 / (-0.7 - r.lam)) for r in rows), 1e-14))
    return out


def suite_sign_structure(states: Iterable | None = None) -> list[CheckResult]:
    out = []
    for label, psi, params in states if states is not None else default_ground_states():
        rep = sign_structure(psi, params.coupling)
        worst = max(-rep.min_signed, rep.max_imag, rep.support_violation, 0.0)
        out.append(_result("sign_structure", f"worst violation, {label}", worst, 1e-10))
    return out


def suite_pointwise_bound(states: Iterable | None = None) -> list[CheckResult]:
    out = []
    for label, psi, params in states if states is not None else default_ground_states():
        rep = pointwise_bound(psi, params.coupling, params.grid.omega)
        out.append(_result("pointwise_bound", f"max excess, {label}", max(rep.worst_excess, 0.0), 1e-10,
                           f"max ratio {rep.worst_ratio:.6f}"))
    return out


def suite_weyl_algebra() -> list[CheckResult]:
    out = []
    # the compression of W(f,-1)^2 is exact on the low block up to the coherent tail beyond n_max
    basis = enumerate_basis(2, 50)
    low = np.flatnonzero(basis.totals <= 25)
    eye = np.eye(low.size)
    for f in (np.array([0.8, -0.3]), np.array([0.5 + 0.4j, -0.2j]), np.array([1.1, 0.0])):
        W = weyl_parity(basis, f, method="exact", check_unitarity=False).toarray()
        sq = (W @ W)[np.ix_(low, low)]
        out.append(_result("weyl_algebra", f"||W(f,-1)^2 - 1|| low block, f={np.round(f, 2).tolist()}",
                           np.linalg.norm(sq - eye, 2), 1e-8))
        herm = np.max(np.abs(W - W.conj().T))
        out.append(_result("weyl_algebra", "W(f,-1) self-adjoint", herm, 1e-12))
    f = np.array([0.4 + 0.1j, 0.3])
    h = np.array([-0.2, 0.5j])
    Df = displacement(basis, f, method="exact", check_unitarity=False).toarray()
    Dh = displacement(basis, h, method="exact", check_unitarity=False).toarray()
    Dfh = displacement(basis, f + h, method="exact", check_unitarity=False).toarray()
    phase = np.exp(-1j * np.imag(np.vdot(f, h)))
    err = np.max(np.abs((Df @ Dh)[np.ix_(low, low)] - phase * Dfh[np.ix_(low, low)]))
    out.append(_result("weyl_algebra", "D(f) D(h) = exp(-i Im<f,h>) D(f+h) low block", err, 1e-8))
    return out


SUITES: dict[str, Callable[[], list[CheckResult]]] = {
    "ccr": suite_ccr,
    "parity_decomposition": suite_parity_decomposition,
    "van_hove": suite_van_hove,
    "pullthrough": suite_pullthrough,
    "feshbach": suite_feshbach,
    "sign_structure": suite_sign_structure,
    "pointwise_bound": suite_pointwise_bound,
    "weyl_algebra": suite_weyl_algebra,
}


def run_suite(name: str) -> list[CheckResult]:
    try:
        suite = SUITES[name]
    except KeyError:
        raise KeyError(f"unknown check suite {name!r}; available: {', '.join(SUITES)}") from None
    return suite()
