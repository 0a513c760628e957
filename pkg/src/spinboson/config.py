"""Strict INI configuration for ``spinboson run``.

Example::

    [scenario]
    name = single_mode

    [model]
    eta = -1
    g = 0, 1, 2, 4, 8
    n_max = ladder

    [sweep]
    kind = strong_coupling

    [output]
    directory = out
    formats = csv, jsonl

Unknown sections or keys are errors.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .asymptotics import SweepOptions
from .scenarios import ScenarioError, ScenarioPreset, get_preset

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "SWEEP_KINDS"]


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


SWEEP_KINDS = ("strong_coupling", "excited_state", "uv_renorm", "massless", "counterexample", "gap_criterion")

# scenario kinds each sweep accepts
_COMPATIBLE = {
    "strong_coupling": ("discrete", "massive_generic", "spin_boson_3d_cutoff"),
    "excited_state": ("discrete", "massive_generic", "spin_boson_3d_cutoff"),
    "uv_renorm": ("spin_boson_3d_cutoff",),
    "massless": ("massless_infrared_regular",),
    "counterexample": ("counterexample_3d",),
    "gap_criterion": ("massive_generic",),
}

_SCHEMA = {
    "scenario": {"name", "mass", "cutoff", "nu", "nodes", "uv_nodes", "coupling", "split_mass",
                 "family_g", "cutoff_shape", "omega", "v"},
    "model": {"eta", "g", "h", "n_max"},
    "sweep": {"kind", "frame", "cutoffs", "eps", "quadrature_nodes", "lab_check", "gap"},
    "solver": {"dense_cap", "dim_cap", "rtol", "atol", "ladder_steps", "workers"},
    "output": {"directory", "formats", "basename"},
}


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioPreset
    kind: str
    eta: float = -1.0
    gs: tuple = (0.0,)
    h: float = 1.0
    n_max: int | None = None
    frame: str | None = None
    cutoffs: tuple = ()
    eps: tuple = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)
    quadrature_nodes: int = 400
    lab_check: bool = True
    gap: float | None = None
    options: SweepOptions = field(default_factory=SweepOptions)
    directory: Path = Path(".")
    formats: tuple = ("csv",)
    basename: str = ""

    @property
    def stem(self) -> str:
        return self.basename or f"{self.scenario.name or self.scenario.kind}_{self.kind}"


def _floats(text: str, key: str) -> tuple:
    try:
        return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"{key}: expected a comma-separated list of numbers, got {text!r}") from None


def _number(text: str, key: str, kind=float):
    try:
        value = kind(text)
    except ValueError:
        raise ConfigError(f"{key}: expected {kind.__name__}, got {text!r}") from None
    return value


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]; allowed: {', '.join(_SCHEMA)}")
        unknown = set(parser[section]) - _SCHEMA[section]
        if unknown:
            raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
    for required in ("scenario", "sweep"):
        if not parser.has_section(required):
            raise ConfigError(f"missing section [{required}]")

    sc = parser["scenario"]
    if "name" not in sc:
        raise ConfigError("[scenario] needs a name")
    overrides = {}
    for key in ("mass", "cutoff", "coupling", "family_g"):
        if key in sc:
            overrides[key] = _number(sc[key], key)
    for key in ("nu", "nodes", "uv_nodes"):
        if key in sc:
            overrides[key] = _number(sc[key], key, int)
    if "split_mass" in sc:
        overrides["split_mass"] = None if sc["split_mass"].strip().lower() == "none" else _number(sc["split_mass"], "split_mass")
    if "cutoff_shape" in sc:
        overrides["cutoff_shape"] = sc["cutoff_shape"].strip()
    for key in ("omega", "v"):
        if key in sc:
            overrides[key] = _floats(sc[key], key)
    try:
        preset = get_preset(sc["name"].strip(), **overrides)
    except (ScenarioError, TypeError) as exc:
        raise ConfigError(str(exc)) from None

    sw = parser["sweep"]
    kind = sw.get("kind", "").strip()
    if kind not in SWEEP_KINDS:
        raise ConfigError(f"[sweep] kind must be one of {', '.join(SWEEP_KINDS)}, got {kind!r}")
    if preset.kind not in _COMPATIBLE[kind]:
        raise ConfigError(
            f"sweep {kind!r} is incompatible with scenario kind {preset.kind!r}; "
            f"it needs one of {', '.join(_COMPATIBLE[kind])}"
        )

    md = parser["model"] if parser.has_section("model") else {}
    eta = _number(md.get("eta", "-1"), "eta")
    gs = _floats(md.get("g", "0"), "g")
    if any(g < 0 for g in gs):
        raise ConfigError("couplings g must be nonnegative")
    n_text = md.get("n_max", "ladder").strip().lower()
    n_max = None if n_text == "ladder" else _number(n_text, "n_max", int)
    if n_max is not None and n_max < 1 and any(g > 0 for g in gs):
        raise ConfigError(f"n_max={n_max} cannot represent a state with g > 0; use n_max >= 1 or 'ladder'")
    if n_max is not None and n_max < 0:
        raise ConfigError("n_max must be nonnegative")
    h = _number(md.get("h", "1"), "h")
    if kind == "massless" and eta > 0:
        raise ConfigError("the massless sweep needs eta <= 0")
    if kind == "counterexample" and not (eta < 0 and h != 0):
        raise ConfigError("the counterexample needs eta < 0 and h != 0")

    cutoffs = _floats(sw.get("cutoffs", ""), "cutoffs")
    if kind == "uv_renorm" and not cutoffs:
        raise ConfigError("uv_renorm needs a cutoffs list")
    eps = _floats(sw.get("eps", "1e-1, 1e-2, 1e-3, 1e-4, 1e-5"), "eps")
    if any(e <= 0 for e in eps):
        raise ConfigError("eps values must be positive")
    frame = sw.get("frame")
    if frame is not None and frame.strip() not in ("lab", "polaron"):
        raise ConfigError("frame must be 'lab' or 'polaron'")
    lab_check = sw.get("lab_check", "true").strip().lower() in ("1", "true", "yes", "on")
    gap = _number(sw["gap"], "gap") if "gap" in sw else None

    so = parser["solver"] if parser.has_section("solver") else {}
    opts = dict(
        dense_cap=_number(so.get("dense_cap", "4000"), "dense_cap", int),
        dim_cap=_number(so.get("dim_cap", "2000000"), "dim_cap", int),
        rtol=_number(so.get("rtol", "1e-8"), "rtol"),
        atol=_number(so.get("atol", "1e-14"), "atol"),
        ladder_steps=_number(so.get("ladder_steps", "4"), "ladder_steps", int),
        workers=_number(so.get("workers", "1"), "workers", int),
    )
    if not (opts["rtol"] > 0 and opts["atol"] > 0):
        raise ConfigError("tolerances must be positive")
    if opts["dense_cap"] < 1 or opts["dim_cap"] < 1 or opts["ladder_steps"] < 2 or opts["workers"] < 1:
        raise ConfigError("dense_cap, dim_cap and workers must be >= 1, ladder_steps >= 2")
    options = SweepOptions(**opts, fixed_n_max=max(n_max, 1) if n_max is not None else None)

    out = parser["output"] if parser.has_section("output") else {}
    formats = tuple(x.strip() for x in out.get("formats", "csv").split(",") if x.strip())
    if not formats or any(f not in ("csv", "jsonl") for f in formats):
        raise ConfigError("formats must be a subset of {csv, jsonl}")
    return RunConfig(
        scenario=preset,
        kind=kind,
        eta=eta,
        gs=gs,
        h=h,
        n_max=n_max,
        frame=frame.strip() if frame else None,
        cutoffs=cutoffs,
        eps=eps,
        quadrature_nodes=_number(sw.get("quadrature_nodes", "400"), "quadrature_nodes", int),
        lab_check=lab_check,
        gap=gap,
        options=options,
        directory=Path(out.get("directory", ".")),
        formats=formats,
        basename=out.get("basename", "").strip(),
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))
