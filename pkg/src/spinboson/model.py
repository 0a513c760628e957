"""Spin-boson Hamiltonian, its parity fibers and the polaron-frame fiber.

Conventions
-----------
* Full Hamiltonian ``H = eta sigma_z (x) 1 + 1 (x) dGamma(omega) + sigma_x (x) phi(g v)``
  on ``C^2 (x) Fock`` with channel 0 = ``e_1`` (``sigma_z = +1``).
* Fiber ``F_eta = eta Gamma(-1) + dGamma(omega) + phi(g v)``.
* The parity unitary ``V`` swaps the odd-number components of the two qubit
  channels.  With the channel convention above, ``V H V*`` acts as ``F_eta``
  on channel ``e_1`` and as ``F_{-eta}`` on channel ``e_-1``.
* Polaron frame: ``U = D(h)`` with ``h = g omega^{-1} v`` on the high modes.
  ``U F U* + ||omega^{-1/2} g v_high||^2 = eta W(2h, -1) + dGamma + phi(g v_low)``.
  Lab-frame vectors are recovered as ``psi = D(-h) psi_tilde``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fock import (
    DEFAULT_DIM_CAP,
    AssembledOperator,
    FockBasis,
    FockVector,
    ModeGrid,
    TruncationWarning,
    coherent_tail_mass,
    dGamma,
    displacement_block,
    enumerate_basis,
    field,
    parity,
    weyl_parity,
)

__all__ = [
    "ModelError",
    "ModelParams",
    "high_mode_mask",
    "build_fiber",
    "build_full",
    "parity_conjugation",
    "build_polaron_fiber",
    "polaron_shift",
    "polaron_amplitude",
    "to_lab_frame",
]


class ModelError(ValueError):
    """Invalid model parameters."""


@dataclass(frozen=True)
class ModelParams:
    """Qubit half-gap ``eta``, coupling multiplier ``g``, mode grid and truncation."""

    eta: float
    g: float
    grid: ModeGrid
    n_max: int
    dim_cap: int = DEFAULT_DIM_CAP

    def __post_init__(self):
        if not np.isfinite(self.eta):
            raise ModelError("eta must be finite")
        if not np.isfinite(self.g) or self.g < 0:
            raise ModelError(f"coupling g must be a nonnegative real, got {self.g}")
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ModelError(f"n_max must be an integer >= 1, got {self.n_max}")
        object.__setattr__(self, "n_max", int(self.n_max))

    @property
    def coupling(self) -> np.ndarray:
        """The scaled coupling vector ``g v``."""
        return self.g * self.grid.v

    def basis(self, with_qubit: bool = False) -> FockBasis:
        return _cached_basis(self.grid.M, self.n_max, with_qubit, self.dim_cap)

    def replace(self, **changes) -> "ModelParams":
        fields = dict(eta=self.eta, g=self.g, grid=self.grid, n_max=self.n_max, dim_cap=self.dim_cap)
        fields.update(changes)
        return ModelParams(**fields)


_BASIS_CACHE: dict = {}


def _cached_basis(M, n_max, with_qubit, dim_cap) -> FockBasis:
    # bases are immutable, so sharing them across builds is safe
    key = (M, n_max, with_qubit)
    basis = _BASIS_CACHE.get(key)
    if basis is None:
        basis = enumerate_basis(M, n_max, with_qubit, dim_cap)
        if len(_BASIS_CACHE) > 64:
            _BASIS_CACHE.clear()
        _BASIS_CACHE[key] = basis
    elif basis.dim > dim_cap:
        basis = enumerate_basis(M, n_max, with_qubit, dim_cap)
    return basis


def build_fiber(params: ModelParams, eta: float | None = None) -> AssembledOperator:
    """``F_eta = eta Gamma(-1) + dGamma(omega) + phi(g v)`` on the qubit-free basis.

    ``eta`` overrides ``params.eta`` (used for the opposite fiber ``F_{-eta}``).
    """
    eta = params.eta if eta is None else eta
    basis = params.basis()
    op = dGamma(basis, params.grid) + field(basis, params.grid, params.g)
    if eta != 0:
        op = op + eta * parity(basis)
    return AssembledOperator(basis, op.matrix, ({"op": "fiber", "eta": eta, "g": params.g, "n_max": params.n_max},))


def build_full(params: ModelParams) -> AssembledOperator:
    """Spin-boson Hamiltonian on ``C^2 (x) Fock``."""
    basis = params.basis(with_qubit=True)
    fb = basis.without_qubit()
    dg = dGamma(fb, params.grid).matrix
    phi = field(fb, params.grid, params.g).matrix
    sz = sp.csr_array(np.diag([1.0, -1.0]))
    sx = sp.csr_array(np.array([[0.0, 1.0], [1.0, 0.0]]))
    eye_f = sp.identity(fb.fock_dim, format="csr")
    mat = (
        params.eta * sp.kron(sz, eye_f, format="csr")
        + sp.kron(sp.identity(2, format="csr"), dg, format="csr")
        + sp.kron(sx, phi, format="csr")
    )
    return AssembledOperator(basis, mat, ({"op": "H", "eta": params.eta, "g": params.g, "n_max": params.n_max},))


def parity_conjugation(vec: FockVector) -> tuple[FockVector, FockVector]:
    """Apply the parity unitary ``V`` and split into the two channels.

    Returns ``(channel e_1, channel e_-1)`` as qubit-free vectors.  ``V`` swaps
    the odd-number components between channels, so it is its own inverse.
    Channel ``e_1`` carries ``F_eta`` and channel ``e_-1`` carries ``F_{-eta}``.
    """
    basis = vec.basis
    if not basis.with_qubit:
        raise ValueError("parity conjugation needs a vector on a qubit basis")
    d = basis.fock_dim
    c = vec.coeffs
    up, down = c[:d].copy(), c[d:].copy()
    odd = basis.totals % 2 == 1
    up[odd], down[odd] = c[d:][odd], c[:d][odd]
    fb = basis.without_qubit()
    return FockVector(fb, up), FockVector(fb, down)


def parity_conjugation_inverse(first: FockVector, second: FockVector) -> FockVector:
    """Reassemble a qubit-basis vector from its two fiber channels (``V`` again)."""
    fb = first.basis.with_qubit_factor()
    stacked = FockVector(fb, np.concatenate([first.coeffs, second.coeffs]))
    up, down = parity_conjugation(stacked)
    return FockVector(fb, np.concatenate([up.coeffs, down.coeffs]))


def high_mode_mask(grid: ModeGrid, split_mass: float | None) -> np.ndarray:
    """Modes with ``omega > split_mass``; ``None`` puts every mode in the high part."""
    if split_mass is None:
        return np.ones(grid.M, dtype=bool)
    if not split_mass > 0:
        raise ModelError("split mass must be positive")
    return grid.omega > split_mass


def polaron_amplitude(params: ModelParams, split_mass: float | None = None) -> np.ndarray:
    """Displacement amplitude ``h = g omega^{-1} v`` on the high modes (0 elsewhere)."""
    high = high_mode_mask(params.grid, split_mass)
    return np.where(high, params.coupling / params.grid.omega, 0)


def polaron_shift(params: ModelParams, split_mass: float | None = None) -> float:
    """Scalar ``||omega^{-1/2} g v_high||^2`` added when passing to the polaron frame."""
    high = high_mode_mask(params.grid, split_mass)
    c = params.coupling
    return float(np.sum(np.abs(c[high]) ** 2 / params.grid.omega[high]))


def build_polaron_fiber(
    params: ModelParams,
    split_mass: float | None = None,
    eta: float | None = None,
    method: str = "exact",
    tail_tol: float = 1e-10,
) -> AssembledOperator:
    """Polaron-frame fiber ``eta W(2h, -1) + dGamma(omega) + phi(g v_low)``.

    Its spectrum equals that of ``F_eta`` shifted up by :func:`polaron_shift`.
    ``method="exact"`` uses closed-form displacement matrix elements, which
    stay accurate however large ``h`` is; ``"expm"`` exponentiates the
    truncated generator and is only trustworthy while the coherent tail is small.
    A :class:`TruncationWarning` flags a heavy tail of ``W(h)`` itself, the
    part that the truncated polaron-frame states cannot resolve.
    """
    eta = params.eta if eta is None else eta
    basis = params.basis()
    grid = params.grid
    high = high_mode_mask(grid, split_mass)
    h = polaron_amplitude(params, split_mass)
    op = dGamma(basis, grid)
    if np.any(~high):
        op = op + field(basis, grid.masked(~high), params.g)
    recipe = {"op": "polaron_fiber", "eta": eta, "g": params.g, "n_max": params.n_max,
              "split_mass": split_mass, "method": method}
    if eta != 0:
        with warnings.catch_warnings():
            if method == "exact":
                warnings.simplefilter("ignore", TruncationWarning)
            wp = weyl_parity(basis, 2 * h, method=method, check_unitarity=False, tail_tol=tail_tol)
        recipe["unitarity_defect"] = wp.recipe[0].get("unitarity_defect", 0.0)
        recipe["tail_mass"] = coherent_tail_mass(2 * h, params.n_max)
        op = op + eta * wp
    return AssembledOperator(basis, op.matrix, (recipe,))


def to_lab_frame(
    vec: FockVector,
    params: ModelParams,
    split_mass: float | None = None,
    n_max_lab: int | None = None,
) -> FockVector:
    """Map a polaron-frame fiber vector back to the lab frame, ``psi = D(-h) psi_tilde``.

    The result lives on a basis truncated at ``n_max_lab`` (default: the
    vector's own ``n_max``); a larger lab truncation captures the displaced
    weight.  ``tail_mass`` reports the norm lost to the lab truncation.
    """
    h = polaron_amplitude(params, split_mass)
    src = vec.basis
    if src.with_qubit:
        raise ValueError("expected a qubit-free fiber vector")
    n_lab = src.n_max if n_max_lab is None else int(n_max_lab)
    if not np.any(h) and n_lab == src.n_max:
        return vec
    target = _cached_basis(src.M, n_lab, False, params.dim_cap)
    coeffs = displacement_block(target, src, -h) @ vec.coeffs
    lost = max(0.0, vec.norm**2 - float(np.linalg.norm(coeffs)) ** 2)
    return FockVector(target, coeffs, tail_mass=lost)
