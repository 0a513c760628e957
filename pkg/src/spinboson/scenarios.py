"""Named scenarios producing discretised mode grids.

Radial scenarios discretise ``k`` in ``nu`` dimensions with Gauss-Legendre
nodes ``k_i`` and weights ``w_i`` and fold the measure into the couplings::

    v_i = v(k_i) * sqrt(w_i * k_i**(nu - 1) * S_nu),   S_nu = 2 pi^(nu/2) / Gamma(nu/2)

so that every continuum norm becomes a plain sum over modes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.special import gamma as gamma_fn

from .fock import ModeGrid

__all__ = [
    "ScenarioError",
    "ScenarioPreset",
    "KINDS",
    "PRESETS",
    "get_preset",
    "make_scenario",
    "sphere_area",
    "refinement_check",
    "coupling_profile",
    "cutoff_profile",
]

KINDS = (
    "discrete",
    "massive_generic",
    "spin_boson_3d_cutoff",
    "massless_infrared_regular",
    "counterexample_3d",
)

CUTOFF_SHAPES = ("sharp", "smooth")


class ScenarioError(ValueError):
    """Raised for unknown presets or parameters violating a scenario's contract."""


def sphere_area(nu: int) -> float:
    """Surface area of the unit sphere in ``nu`` dimensions."""
    return 2 * math.pi ** (nu / 2) / float(gamma_fn(nu / 2))


@dataclass(frozen=True)
class ScenarioPreset:
    """Parameters of a named scenario.

    kind
        One of :data:`KINDS`.
    mass
        Boson mass ``m`` (``omega = sqrt(m^2 + k^2)``); zero for massless kinds.
    cutoff
        UV cutoff ``Lambda`` in energy (the coupling lives on ``omega <= Lambda``).
    nu
        Spatial dimension.
    nodes
        Quadrature nodes; for ``spin_boson_3d_cutoff`` the infrared nodes.
    uv_nodes
        Nodes above the split mass (``spin_boson_3d_cutoff`` only).
    coupling
        Overall prefactor of the continuum coupling function.
    split_mass
        Polaron split mass; ``None`` means every mode is treated as high.
    family_g
        Family index of the counterexample (IR window ``[1/g, 2]``).
    cutoff_shape
        ``"sharp"`` indicator or ``"smooth"`` ``1/(1 + (omega/Lambda)^4)``.
    omega, v
        Explicit modes for the ``discrete`` kind.
    """

    kind: str
    name: str = ""
    mass: float = 1.0
    cutoff: float = 2.0
    nu: int = 3
    nodes: int = 8
    uv_nodes: int = 2
    coupling: float = 1.0
    split_mass: float | None = None
    family_g: float = 1.0
    cutoff_shape: str = "sharp"
    omega: tuple = ()
    v: tuple = ()
    description: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ScenarioError(f"unknown scenario kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if self.cutoff_shape not in CUTOFF_SHAPES:
            raise ScenarioError(f"cutoff_shape must be one of {CUTOFF_SHAPES}")
        if self.nu < 1:
            raise ScenarioError("dimension nu must be >= 1")
        if self.nodes < 1 or self.uv_nodes < 1:
            raise ScenarioError("node counts must be positive")
        if self.kind in ("massive_generic", "spin_boson_3d_cutoff") and not self.mass > 0:
            raise ScenarioError(f"{self.kind} needs a strictly positive mass, got {self.mass}")
        if self.kind == "spin_boson_3d_cutoff":
            if self.split_mass is None or not self.mass < self.split_mass < self.cutoff:
                raise ScenarioError("spin_boson_3d_cutoff needs mass < split_mass < cutoff")
        if self.kind == "counterexample_3d" and not self.family_g > 0.5:
            raise ScenarioError("counterexample family index g must exceed 1/2")
        if self.kind == "discrete" and len(self.omega) != len(self.v):
            raise ScenarioError("discrete scenario needs equally many omega and v entries")

    def with_(self, **changes) -> "ScenarioPreset":
        return replace(self, **changes)


def cutoff_profile(shape: str, cutoff: float) -> Callable[[np.ndarray], np.ndarray]:
    """The function ``chi_Lambda(omega)``."""
    if shape == "sharp":
        return lambda om: (om <= cutoff).astype(float)
    return lambda om: 1.0 / (1.0 + (om / cutoff) ** 4)


def dispersion(preset: ScenarioPreset) -> Callable[[np.ndarray], np.ndarray]:
    m = 0.0 if preset.kind in ("massless_infrared_regular", "counterexample_3d") else preset.mass
    return lambda k: np.sqrt(m * m + k * k)


def coupling_profile(preset: ScenarioPreset) -> Callable[[np.ndarray], np.ndarray]:
    """Continuum coupling ``v(k)`` for the radial kinds."""
    om = dispersion(preset)
    kind = preset.kind
    c = preset.coupling
    if kind in ("massive_generic", "spin_boson_3d_cutoff"):
        chi = cutoff_profile(preset.cutoff_shape, preset.cutoff)
        return lambda k: c * chi(om(k)) / np.sqrt(om(k))
    if kind == "massless_infrared_regular":
        # v(k) = c sqrt(k) 1{k <= cutoff}: omega^{-1} v is square integrable near 0
        return lambda k: c * np.sqrt(k) * (k <= preset.cutoff)
    if kind == "counterexample_3d":
        lo = 1.0 / preset.family_g
        return lambda k: c * ((k >= lo) & (k <= 2.0)) / np.sqrt(om(k))
    raise ScenarioError(f"{kind} has no continuum profile")


def _gauss(a: float, b: float, n: int, log: bool = False) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    if log:
        la, lb = math.log(a), math.log(b)
        u = 0.5 * (lb - la) * x + 0.5 * (la + lb)
        k = np.exp(u)
        return k, 0.5 * (lb - la) * w * k
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def _k_of_omega(m: float, om: float) -> float:
    return math.sqrt(max(om * om - m * m, 0.0))


def radial_nodes(preset: ScenarioPreset, scale: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Radial nodes and weights for a preset; ``scale`` multiplies the node counts."""
    kind = preset.kind
    m = preset.mass
    if kind == "massive_generic":
        top = preset.cutoff if preset.cutoff_shape == "sharp" else 4 * preset.cutoff
        return _gauss(0.0, _k_of_omega(m, top), preset.nodes * scale)
    if kind == "spin_boson_3d_cutoff":
        ks = _k_of_omega(m, preset.split_mass)
        top = preset.cutoff if preset.cutoff_shape == "sharp" else 4 * preset.cutoff
        k1, w1 = _gauss(0.0, ks, preset.nodes * scale)
        k2, w2 = _gauss(ks, _k_of_omega(m, top), preset.uv_nodes * scale)
        return np.concatenate([k1, k2]), np.concatenate([w1, w2])
    if kind == "massless_infrared_regular":
        return _gauss(0.0, preset.cutoff, preset.nodes * scale)
    if kind == "counterexample_3d":
        # log-spaced nodes resolve the 1/k weight of the infrared window
        return _gauss(1.0 / preset.family_g, 2.0, preset.nodes * scale, log=True)
    raise ScenarioError(f"{kind} is not a radial scenario")


def make_scenario(preset: ScenarioPreset, scale: int = 1) -> ModeGrid:
    """Discretise a preset into a :class:`ModeGrid`."""
    if preset.kind == "discrete":
        return ModeGrid(np.array(preset.omega, dtype=float), np.array(preset.v), label=preset.name or "discrete")
    k, w = radial_nodes(preset, scale)
    omega = dispersion(preset)(k)
    measure = w * k ** (preset.nu - 1) * sphere_area(preset.nu)
    v = coupling_profile(preset)(k) * np.sqrt(measure)
    grid = ModeGrid(omega, v, weight=measure, label=preset.name or preset.kind)
    _check_contract(preset, grid)
    return grid


def _check_contract(preset: ScenarioPreset, grid: ModeGrid):
    if preset.kind == "massive_generic" and grid.min_omega < preset.mass:
        raise ScenarioError("massive grid has a frequency below the mass")
    if preset.kind == "massless_infrared_regular" and not np.isfinite(grid.displacement_norm_sq):
        raise ScenarioError("infrared-regular grid has infinite ||omega^-1 v||")


def refinement_check(preset: ScenarioPreset, factor: int = 8, rtol: float = 0.01) -> dict:
    """Compare the grid norms against a ``factor``-times finer quadrature."""
    if preset.kind == "discrete":
        return {"converged": True, "rel_change": 0.0, "norms": {}, "reference": {}}
    coarse = make_scenario(preset)
    fine = make_scenario(preset, scale=factor)
    names = ("v_norm_sq", "ir_norm_sq", "displacement_norm_sq")
    norms = {n: getattr(coarse, n) for n in names}
    ref = {n: getattr(fine, n) for n in names}
    rel = max(abs(norms[n] - ref[n]) / abs(ref[n]) if ref[n] else abs(norms[n]) for n in names)
    return {"converged": rel <= rtol, "rel_change": rel, "norms": norms, "reference": ref}


PRESETS: dict[str, ScenarioPreset] = {
    p.name: p
    for p in (
        ScenarioPreset("discrete", name="van_hove", omega=(1.0,), v=(0.5,),
                       description="single mode omega=1, v=0.5"),
        ScenarioPreset("discrete", name="single_mode", omega=(1.0,), v=(1.0,),
                       description="single mode omega=1, v=1"),
        ScenarioPreset("discrete", name="two_mode", omega=(1.0, 2.0), v=(0.7, 0.3),
                       description="two modes omega=(1,2), v=(0.7,0.3)"),
        ScenarioPreset("massive_generic", name="massive_3d", mass=1.0, cutoff=2.0, nu=3, nodes=32,
                       description="massive 3D, v = chi(omega)/sqrt(omega), sharp cutoff 2"),
        ScenarioPreset("massive_generic", name="physical_2d", mass=1.0, cutoff=2.0, nu=2, nodes=32,
                       description="massive 2D, v = chi(omega)/sqrt(omega), sharp cutoff 2"),
        ScenarioPreset("massive_generic", name="physical_3d", mass=1.0, cutoff=2.0, nu=3, nodes=32,
                       description="massive 3D, v = chi(omega)/sqrt(omega), sharp cutoff 2"),
        ScenarioPreset("spin_boson_3d_cutoff", name="uv_cutoff_3d", mass=1.0, split_mass=1.5, cutoff=2.0,
                       nu=3, nodes=1, uv_nodes=1, coupling=0.5,
                       description="3D cutoff family, one infrared and one ultraviolet node split at 1.5"),
        ScenarioPreset("massless_infrared_regular", name="massless_ir_regular", mass=0.0, cutoff=1.0,
                       nu=3, nodes=3, coupling=0.1,
                       description="massless 3D, v = 0.1 sqrt(k) on k <= 1"),
        ScenarioPreset("counterexample_3d", name="counterexample_3d", mass=0.0, nu=3, nodes=3,
                       coupling=1.0, family_g=1.0,
                       description="massless 3D, v = omega^{-1/2} on 1/g <= k <= 2 (log nodes)"),
    )
}


def get_preset(name: str, **overrides) -> ScenarioPreset:
    try:
        preset = PRESETS[name]
    except KeyError:
        raise ScenarioError(
            f"unknown scenario {name!r}; available presets: {', '.join(sorted(PRESETS))}"
        ) from None
    return preset.with_(**overrides) if overrides else preset
