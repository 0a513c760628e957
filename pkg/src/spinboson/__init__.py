"""Truncated-Fock numerics for the spin-boson model and its parity fibers."""

from .fock import (
    DimensionError,
    FockBasis,
    FockError,
    FockVector,
    ModeGrid,
    TruncationWarning,
    UnitarityError,
    enumerate_basis,
)
from .model import ModelError, ModelParams, build_fiber, build_full, build_polaron_fiber
from .scenarios import PRESETS, ScenarioError, get_preset, make_scenario
from .spectra import ResolventError, SolverError, SpectralError, eigensolve

__version__ = "0.1.0"
