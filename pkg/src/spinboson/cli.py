"""Command line entry point: ``spinboson run | check | describe``.

Exit codes: 0 success, 1 assertion or solver failure (including flagged
rows), 2 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .scenarios import PRESETS, ScenarioError, get_preset, make_scenario, refinement_check
from .spectra import SpectralError

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2

log = logging.getLogger("spinboson")


def execute(cfg):
    """Run the configured sweep (a ``RunConfig``) and return its :class:`SweepReport`."""
    from . import asymptotics as asy
    from .config import ConfigError

    opts = cfg.options
    if cfg.kind == "gap_criterion":
        return asy.gap_criterion_diagnostic(cfg.scenario, cfg.eps, cfg.quadrature_nodes).to_sweep_report()
    if cfg.kind == "uv_renorm":
        g = cfg.gs[0] if cfg.gs else 1.0
        return asy.sweep_uv_renormalization(cfg.scenario, cfg.eta, cfg.cutoffs, g=g, options=opts)
    if cfg.kind == "counterexample":
        return asy.counterexample_demo(cfg.eta, cfg.h, cfg.gs, nodes=cfg.scenario.nodes, options=opts)
    grid = make_scenario(cfg.scenario)
    if cfg.kind == "strong_coupling":
        return asy.sweep_strong_coupling(grid, cfg.eta, cfg.gs, frame=cfg.frame or "polaron",
                                         split_mass=cfg.scenario.split_mass, lab_check=cfg.lab_check, options=opts)
    if cfg.kind == "excited_state":
        return asy.sweep_excited_state(grid, cfg.eta, cfg.gs, gap=cfg.gap,
                                       split_mass=cfg.scenario.split_mass, options=opts)
    if cfg.kind == "massless":
        return asy.sweep_massless(grid, cfg.eta, cfg.gs, frame=cfg.frame or "lab", options=opts)
    raise ConfigError(f"unsupported sweep kind {cfg.kind!r}")


def _summary(report, row) -> str:
    bits = [f"{report.param_name}={row.param:g}", f"n_max={row.n_max}"]
    for name in ("ground_energy", "delta", "one_minus_overlap", "number_defect", "splitting",
                 "resolvent_diff", "integral"):
        value = getattr(row, name)
        if np.isfinite(value):
            bits.append(f"{name}={value:.10g}")
    if row.in_gap_count >= 0:
        bits.append(f"in_gap={row.in_gap_count}")
    bits.append(f"trunc_err={row.truncation_error:.2e}")
    bits.append("FLAGGED" if row.flagged else "ok")
    return " ".join(bits)


def cmd_run(args) -> int:
    # imported here so that ``check`` and ``describe`` work without the sweep harness
    from .config import ConfigError, load_config

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(args.out) if args.out else cfg.directory
    formats = {"csv": ("csv",), "jsonl": ("jsonl",), "both": ("csv", "jsonl")}[args.format] if args.format else cfg.formats
    try:
        report = execute(cfg)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except SpectralError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    for row in report.rows:
        print(_summary(report, row))
    for key, value in report.meta.items():
        if key in ("g0", "verdict", "r_squared"):
            print(f"{key}: {value}")
    out_dir.mkdir(parents=True, exist_ok=True)
    for fmt in formats:
        target = out_dir / f"{cfg.stem}.{fmt}"
        (report.to_csv if fmt == "csv" else report.to_jsonl)(target)
        print(f"wrote {target}")
    return EXIT_FAILURE if any(r.flagged for r in report.rows) else EXIT_OK


def cmd_check(args) -> int:
    from .checks import SUITES, format_result, run_suite

    names = list(SUITES) if args.suite == "all" else [args.suite]
    if args.suite != "all" and args.suite not in SUITES:
        print(f"unknown suite {args.suite!r}; available: {', '.join(SUITES)}, all", file=sys.stderr)
        return EXIT_CONFIG
    failed = 0
    for name in names:
        try:
            results = run_suite(name)
        except SpectralError as exc:
            print(f"FAIL {name}: solver failure: {exc}")
            failed += 1
            continue
        for r in results:
            print(format_result(r))
            failed += not r.passed
    return EXIT_FAILURE if failed else EXIT_OK


def describe_lines(name: str) -> list[str]:
    preset = get_preset(name)
    lines = [f"scenario {name} ({preset.kind}): {preset.description}"]
    variants = [preset]
    if preset.kind == "counterexample_3d":
        variants = [preset.with_(family_g=g) for g in (1.0, 10.0, 100.0)]
    for p in variants:
        grid = make_scenario(p)
        prefix = f"  g={p.family_g:g}: " if preset.kind == "counterexample_3d" else "  "
        lines.append(
            f"{prefix}M={grid.M} min_omega={grid.min_omega:.10g} max_omega={float(grid.omega.max()):.10g} "
            f"||v||^2={grid.v_norm_sq:.10g} ||omega^-1/2 v||^2={grid.ir_norm_sq:.10g} "
            f"||omega^-1 v||^2={grid.displacement_norm_sq:.10g}"
        )
        ref = refinement_check(p)
        status = "converged" if ref["converged"] else "NOT converged"
        lines.append(f"{prefix}refinement: {status} (max relative change {ref['rel_change']:.2e} against a finer grid)")
    return lines


def cmd_describe(args) -> int:
    try:
        lines = describe_lines(args.scenario)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print("\n".join(lines))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinboson", description="Spin-boson fiber numerics and sweep harness")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a configured sweep")
    run.add_argument("--config", required=True, help="INI configuration file")
    run.add_argument("--out", help="output directory (overrides [output] directory)")
    run.add_argument("--format", choices=("csv", "jsonl", "both"), help="output format(s)")
    run.set_defaults(func=cmd_run)
    check = sub.add_parser("check", help="run a property suite")
    check.add_argument("suite", help="suite name or 'all'")
    check.set_defaults(func=cmd_check)
    desc = sub.add_parser("describe", help="summarise a scenario grid")
    desc.add_argument("scenario", help=f"one of: {', '.join(sorted(PRESETS))}")
    desc.set_defaults(func=cmd_describe)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
