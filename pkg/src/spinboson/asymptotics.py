"""Sweep harnesses turning coupling and cutoff limits into finite trend data.

Every sweep point is computed at a truncation chosen by a ladder in ``n_max``
(:func:`truncation_estimate`); the last change along the ladder is reported
as the row's truncation error and rows that did not stabilise are flagged.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Callable, Iterable, Sequence

import numpy as np
from scipy import stats
from scipy.special import gammaln, logsumexp

from .fock import FockVector, ModeGrid, coherent_vector, field as field_op, number_operator, parity, sector_norms, weyl_parity
from .model import (
    ModelParams,
    build_fiber,
    build_polaron_fiber,
    high_mode_mask,
    polaron_amplitude,
    polaron_shift,
)
from .scenarios import (
    ScenarioError,
    ScenarioPreset,
    coupling_profile,
    cutoff_profile,
    dispersion,
    get_preset,
    make_scenario,
    sphere_area,
)
from .spectra import (
    DEFAULT_DENSE_CAP,
    SolverError,
    eigensolve,
    gap_census,
    resolvent_distance,
    single_mode_fiber_ground_energy,
)

__all__ = [
    "COLUMNS",
    "SweepRow",
    "SweepReport",
    "SweepOptions",
    "TruncationEstimate",
    "truncation_estimate",
    "coherent_ladder",
    "sweep_strong_coupling",
    "sweep_excited_state",
    "sweep_uv_renormalization",
    "sweep_massless",
    "GapCriterionReport",
    "gap_criterion_diagnostic",
    "counterexample_demo",
    "SummabilityReport",
    "summability_check",
    "high_precision_splitting",
]

log = logging.getLogger(__name__)

# CSV / JSON-lines column order; part of the output contract (see README)
COLUMNS = (
    "param",
    "n_max",
    "frame",
    "eta",
    "ground_energy",
    "opposite_energy",
    "shift",
    "delta",
    "reference_energy",
    "overlap",
    "one_minus_overlap",
    "number_expectation",
    "number_defect",
    "parity_expectation",
    "splitting",
    "in_gap_count",
    "resolvent_diff",
    "fiber_resolvent_diff",
    "displacement_norm_sq",
    "integral",
    "lab_check",
    "truncation_error",
    "flagged",
)

_NAN = float("nan")

# largest lab-frame dimension used for the optional cross-check of polaron results
LAB_CHECK_CAP = 200_000


@dataclass
class SweepRow:
    param: float
    n_max: int = 0
    frame: str = ""
    eta: float = _NAN
    ground_energy: float = _NAN
    opposite_energy: float = _NAN
    shift: float = _NAN
    delta: float = _NAN
    reference_energy: float = _NAN
    overlap: float = _NAN
    one_minus_overlap: float = _NAN
    number_expectation: float = _NAN
    number_defect: float = _NAN
    parity_expectation: float = _NAN
    splitting: float = _NAN
    in_gap_count: int = -1
    resolvent_diff: float = _NAN
    fiber_resolvent_diff: float = _NAN
    displacement_norm_sq: float = _NAN
    integral: float = _NAN
    lab_check: float = _NAN
    truncation_error: float = _NAN
    flagged: bool = False


assert tuple(f.name for f in fields(SweepRow)) == COLUMNS


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    x = float(value)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.16e}"


def _json_value(value):
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, str):
        return value
    x = float(value)
    return None if math.isnan(x) else x


@dataclass
class SweepReport:
    """Rows of a sweep, sorted by the sweep parameter."""

    kind: str
    param_name: str
    rows: list[SweepRow]
    meta: dict = field(default_factory=dict)
    # ground states per sweep point (not serialised): param -> (vector, params, frame, split_mass)
    states: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: r.param)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    @property
    def params(self) -> np.ndarray:
        return self.column("param")

    def trusted(self) -> list[SweepRow]:
        """Rows whose truncation stabilised (the only ones used for trend checks)."""
        return [r for r in self.rows if not r.flagged]

    def to_csv(self, target=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        for r in self.rows:
            writer.writerow([_fmt(getattr(r, c)) for c in COLUMNS])
        text = buf.getvalue()
        if target is not None:
            with open(target, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    def to_jsonl(self, target=None) -> str:
        lines = [json.dumps({c: _json_value(getattr(r, c)) for c in COLUMNS}) for r in self.rows]
        text = "\n".join(lines) + ("\n" if lines else "")
        if target is not None:
            with open(target, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text


@dataclass(frozen=True)
class SweepOptions:
    """Numerical knobs shared by all sweeps."""

    dense_cap: int = DEFAULT_DENSE_CAP
    dim_cap: int = 2_000_000
    rtol: float = 1e-8
    atol: float = 1e-14
    ladder_steps: int = 4
    workers: int = 1
    sigmas: float = 6.0
    margin: int = 12
    # fixed truncation instead of the coherent-state ladder (one extra rung estimates the error)
    fixed_n_max: int | None = None


@dataclass
class TruncationEstimate:
    value: np.ndarray
    error: float
    n_max: int
    converged: bool
    payload: Any = None
    history: list = field(default_factory=list)


def truncation_estimate(
    evaluate: Callable[[int], tuple[Any, Any]],
    ladder: Iterable[int],
    rtol: float = 1e-8,
    atol: float = 0.0,
    keep_first: bool = False,
) -> TruncationEstimate:
    """Evaluate an observable along increasing ``n_max`` until it stabilises.

    ``evaluate(n)`` returns ``(value, payload)`` where ``value`` is a scalar or
    vector.  Stops at the first rung whose change from the previous rung is
    ``<= rtol * |value| + atol`` in every component; the change is reported
    as the error.  An exhausted ladder gives ``converged=False``.  With
    ``keep_first`` the first rung's value is reported and later rungs only
    size the error (fixed truncation policy).
    """
    prev = None
    history = []
    est = None
    for n in ladder:
        value, payload = evaluate(n)
        v = np.atleast_1d(np.asarray(value, dtype=float))
        history.append((n, v))
        if prev is not None:
            change = np.abs(v - prev)
            ok = bool(np.all(change <= rtol * np.abs(v) + atol))
            err = float(np.max(change))
            est = TruncationEstimate(v, err, n, ok, payload, history)
            if keep_first:
                first_n, first_v = history[0]
                return TruncationEstimate(first_v, err, first_n, ok, first_payload, history)
            if ok:
                return est
        else:
            est = TruncationEstimate(v, _NAN, n, False, payload, history)
            first_payload = payload
        prev = v
    if est is None:
        raise ValueError("empty n_max ladder")
    return est


def _estimate(evaluate, ladder, opts: "SweepOptions", rtol: float | None = None) -> TruncationEstimate:
    return truncation_estimate(evaluate, ladder, opts.rtol if rtol is None else rtol, opts.atol,
                               keep_first=opts.fixed_n_max is not None)


def _max_n_for_dim(M: int, cap: int) -> int:
    n = 0
    while math.comb(M + n + 1, M) <= cap:
        n += 1
    return n


def coherent_ladder(mu: float, M: int, cap: int, opts: SweepOptions) -> list[int]:
    """``n_max`` rungs covering a coherent state of mean number ``mu``, capped by dimension."""
    step = max(8, int(math.ceil(math.sqrt(mu))))
    top = _max_n_for_dim(M, cap)
    if opts.fixed_n_max is not None:
        rungs = [min(opts.fixed_n_max, top), min(opts.fixed_n_max + step, top)]
    else:
        start = int(math.ceil(mu + opts.sigmas * math.sqrt(mu) + opts.margin))
        rungs = [min(start + i * step, top) for i in range(opts.ladder_steps)]
    out = []
    for n in rungs:
        if n >= 1 and n not in out:
            out.append(n)
    return out


def _run(fn, items, workers: int):
    # map keeps input order, so output is deterministic regardless of scheduling
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _one_minus_overlap(psi: np.ndarray) -> float:
    o = abs(psi[0])
    rest = float(np.sum(np.abs(psi[1:]) ** 2))
    return rest / (1.0 + o)


def _polaron_observables(params: ModelParams, split_mass, psi: np.ndarray, power: int) -> dict:
    basis = params.basis()
    grid = params.grid
    g = params.g
    high = high_mode_mask(grid, split_mass)
    h = polaron_amplitude(params, split_mass)
    n_tilde = float(np.real(np.vdot(psi, basis.totals * psi)))
    disp_grid = ModeGrid(grid.omega, np.where(high, grid.v / grid.omega, 0))
    phi_h = float(np.real(field_op(basis, disp_grid).expectation(psi))) if g else 0.0
    low_sq = float(np.sum(np.abs(grid.v[~high]) ** 2 / grid.omega[~high] ** 2))
    # <N> in the lab frame; the g^2 ||omega^-1 v||^2 part is subtracted analytically
    defect_num = n_tilde - g * phi_h - g * g * low_sq
    number = defect_num + g * g * grid.displacement_norm_sq
    if np.any(h):
        wp = weyl_parity(basis, 2 * h, method="exact", check_unitarity=False)
        par = float(np.real(wp.expectation(psi)))
    else:
        par = float(np.real(parity(basis).expectation(psi)))
    return {
        "overlap": abs(psi[0]),
        "one_minus_overlap": _one_minus_overlap(psi),
        "number_expectation": number,
        "number_defect": defect_num / g**power if g else _NAN,
        "parity_expectation": par,
    }


def _lab_observables(params: ModelParams, psi: np.ndarray, power: int) -> dict:
    basis = params.basis()
    grid = params.grid
    g = params.g
    number = float(np.real(np.vdot(psi, basis.totals * psi)))
    coh = coherent_vector(basis, -g * grid.v / grid.omega, tail_tol=np.inf).coeffs
    o = abs(np.vdot(coh, psi))
    defect_num = number - g * g * grid.displacement_norm_sq
    return {
        "overlap": o,
        "one_minus_overlap": 1.0 - o,
        "number_expectation": number,
        "number_defect": defect_num / g**power if g else _NAN,
        "parity_expectation": float(np.real(parity(basis).expectation(psi))),
    }


def _ground_point(grid: ModeGrid, eta: float, g: float, frame: str, opts: SweepOptions,
                  split_mass=None, power: int = 1, refine: bool = True):
    """Ladder-converged ground data of the fiber ``F_eta`` in one frame."""
    base = ModelParams(eta, g, grid, 1, opts.dim_cap)
    shift = polaron_shift(base, split_mass)
    if frame == "polaron":
        mu = float(np.sum(np.abs(2 * polaron_amplitude(base, split_mass)) ** 2))
        # the low modes keep a linear field; their displacement is not removed
        high = high_mode_mask(grid, split_mass)
        mu += g * g * float(np.sum(np.abs(grid.v[~high]) ** 2 / grid.omega[~high] ** 2))
        cap = opts.dense_cap
    else:
        mu = g * g * grid.displacement_norm_sq
        cap = opts.dim_cap
    ladder = coherent_ladder(mu, grid.M, cap, opts)

    def evaluate(n):
        params = base.replace(n_max=n)
        if frame == "polaron":
            res = eigensolve(build_polaron_fiber(params, split_mass), k=1, mode="dense",
                             dense_cap=opts.dense_cap, refine=refine)
            delta = res.ground_energy
            obs = _polaron_observables(params, split_mass, res.eigenvectors[:, 0], power)
        else:
            res = eigensolve(build_fiber(params), k=1, mode="auto", dense_cap=opts.dense_cap)
            delta = res.ground_energy + g * g * grid.ir_norm_sq
            obs = _lab_observables(params, res.eigenvectors[:, 0], power)
        obs["delta"] = delta
        obs["params"] = params
        obs["vector"] = res.ground_state
        value = (delta, obs["one_minus_overlap"], obs["number_expectation"], obs["parity_expectation"])
        return value, obs

    return _estimate(evaluate, ladder, opts), shift


def _fill_row(row: SweepRow, est: TruncationEstimate, shift: float, g: float, grid: ModeGrid):
    obs = est.payload
    row.n_max = est.n_max
    row.delta = obs["delta"]
    row.shift = shift
    row.ground_energy = obs["delta"] - g * g * grid.ir_norm_sq
    for key in ("overlap", "one_minus_overlap", "number_expectation", "number_defect", "parity_expectation"):
        setattr(row, key, obs[key])
    row.displacement_norm_sq = g * g * grid.displacement_norm_sq
    row.truncation_error = est.error
    row.flagged = not est.converged


def sweep_strong_coupling(
    grid: ModeGrid,
    eta: float,
    gs: Sequence[float],
    frame: str = "polaron",
    split_mass: float | None = None,
    lab_check: bool = True,
    options: SweepOptions | None = None,
) -> SweepReport:
    """Shifted energy, coherent overlap and number defect along a coupling sweep.

    ``delta(g) = E_eta(g v) + g^2 ||omega^{-1/2} v||^2``; overlap with the
    normalised coherent state of amplitude ``-g omega^{-1} v``; number defect
    ``(<N> - g^2 ||omega^{-1} v||^2) / g``.  In the polaron frame these read
    off the ground state near the vacuum; ``lab_check`` repeats the energy in
    the lab frame where the dimension allows and records the difference.
    """
    opts = options or SweepOptions()
    if grid.min_omega <= 0:
        raise ScenarioError("strong-coupling sweep needs a massive grid")

    def job(g):
        row = SweepRow(param=float(g), frame=frame, eta=eta)
        est, shift = _ground_point(grid, eta, g, frame, opts, split_mass, power=1)
        _fill_row(row, est, shift, g, grid)
        if lab_check and frame == "polaron":
            ladder = coherent_ladder(g * g * grid.displacement_norm_sq, grid.M, opts.dim_cap, opts)
            if math.comb(grid.M + ladder[-1], grid.M) <= LAB_CHECK_CAP:
                lab, _ = _ground_point(grid, eta, g, "lab", opts, power=1)
                row.lab_check = float(lab.payload["delta"] - row.delta)
        return row, est.payload

    results = _run(job, list(gs), opts.workers)
    report = SweepReport("strong_coupling", "g", [r for r, _ in results], {"eta": eta, "frame": frame})
    for row, obs in results:
        report.states[row.param] = (obs["vector"], obs["params"], frame, split_mass)
    return report


def high_precision_splitting(omega: float, coupling: float, eta: float, guard_nats: float = 60.0):
    """``E_{|eta|} - E_{-|eta|}`` for one mode, resolved below double precision.

    The splitting behaves like ``exp(-2 |g v / omega|^2)``; the lab-frame
    truncation is chosen so the coherent tail lies ``guard_nats`` below it and
    the working precision carries the same margin.  Returns
    ``(splitting, lower_energy, n_max)`` with the energies as floats.
    """
    import mpmath

    mu = (abs(coupling) / omega) ** 2
    target = 2 * mu + guard_nats
    n = max(int(mu) + 1, 8)
    # Chernoff bound on the Poisson tail of the displaced vacuum
    while mu > 0 and n * math.log(n / mu) - n + mu < target:
        n += 1
    n = max(n, int(mu + 8 * math.sqrt(mu) + 20))
    dps = int(target / math.log(10)) + 30
    a = abs(eta)
    lower = single_mode_fiber_ground_energy(-a, omega, coupling, n, dps)
    upper = single_mode_fiber_ground_energy(a, omega, coupling, n, dps)
    with mpmath.workdps(dps):
        split = upper - lower
    return float(split), float(lower), n


def sweep_excited_state(
    grid: ModeGrid,
    eta: float,
    gs: Sequence[float],
    gap: float | None = None,
    split_mass: float | None = None,
    options: SweepOptions | None = None,
) -> SweepReport:
    """In-gap census of both fibers and the splitting ``E_{|eta|} - E_{-|eta|}``.

    Levels come from the polaron frame of both fibers (the common shift drops
    out of the census).  For a single mode the splitting is recomputed in
    extended precision because it falls far below double-precision resolution
    at strong coupling.  ``meta["g0"]`` is the first coupling with at least
    two in-gap levels.
    """
    opts = options or SweepOptions()
    m = grid.min_omega if gap is None else gap
    a = abs(eta)

    def levels(params, sign):
        k = 8
        while True:
            res = eigensolve(build_polaron_fiber(params, split_mass, eta=sign * a), k=k, mode="dense",
                             dense_cap=opts.dense_cap, refine=True)
            if k >= params.basis().dim or res.eigenvalues[-1] > res.eigenvalues[0] + m + 1.0:
                return res
            k *= 2

    def job(g):
        base = ModelParams(-a, g, grid, 1, opts.dim_cap)
        mu = float(np.sum(np.abs(2 * polaron_amplitude(base, split_mass)) ** 2))
        ladder = coherent_ladder(mu, grid.M, opts.dense_cap, opts)

        def evaluate(n):
            params = base.replace(n_max=n)
            lo = levels(params, -1)
            hi = levels(params, +1)
            allv = np.sort(np.concatenate([lo.eigenvalues, hi.eigenvalues]))
            census = gap_census(allv, m)
            value = (lo.ground_energy, hi.ground_energy, census.count)
            return value, {"lo": lo, "hi": hi, "census": census, "params": params}

        est = _estimate(evaluate, ladder, opts)
        obs = est.payload
        shift = polaron_shift(base, split_mass)
        row = SweepRow(param=float(g), frame="polaron", eta=eta, n_max=est.n_max, shift=shift)
        row.delta = obs["lo"].ground_energy
        row.ground_energy = obs["lo"].ground_energy - shift
        row.opposite_energy = obs["hi"].ground_energy - shift
        row.in_gap_count = obs["census"].count
        row.displacement_norm_sq = g * g * grid.displacement_norm_sq
        if a == 0:
            row.splitting = 0.0
        elif grid.M == 1:
            row.splitting, _, _ = high_precision_splitting(float(grid.omega[0]), g * complex(grid.v[0]), a)
            row.frame = "polaron+lab_mp"
        else:
            row.splitting = obs["hi"].ground_energy - obs["lo"].ground_energy
        row.truncation_error = est.error
        row.flagged = not est.converged
        return row, obs

    results = _run(job, list(gs), opts.workers)
    rows = [r for r, _ in results]
    report = SweepReport("excited_state", "g", rows, {"eta": eta, "gap": m})
    g0 = next((r.param for r in report.rows if r.in_gap_count >= 2), None)
    report.meta["g0"] = g0
    for row, obs in results:
        report.states[row.param] = (obs["lo"].ground_state, obs["params"].replace(eta=-a), "polaron", split_mass)
    return report


def sweep_uv_renormalization(
    preset: ScenarioPreset,
    eta: float,
    cutoffs: Sequence[float],
    g: float = 1.0,
    options: SweepOptions | None = None,
    rtol: float = 1e-6,
) -> SweepReport:
    """Self-energy renormalised cutoff sweep.

    Per cutoff ``Lambda``: ``c = ||omega^{-1/2} 1{omega > split} g v_Lambda||^2``,
    the renormalised ground energies ``E_eta + c`` and ``E_0 + c``, the norm
    ``||(H_eta + c + i)^{-1} - (H_0 + c + i)^{-1}||`` (the largest of the two
    fiber differences, lab frame) and the polaron-frame distance between the
    shifted fiber and ``dGamma + phi(v_IR)``.  Resolvent norms stabilise
    slower than energies, hence the looser default ``rtol``.
    """
    opts = options or SweepOptions()
    if preset.split_mass is None:
        raise ScenarioError("UV sweep needs a preset with a split mass")
    cutoffs = sorted(float(c) for c in cutoffs)
    grids = [make_scenario(preset.with_(cutoff=c)) for c in cutoffs]
    split = preset.split_mass
    uv_norms = []
    for grid in grids:
        high = grid.omega > split
        uv_norms.append(float(np.sum(np.abs(grid.v[high]) ** 2 / grid.omega[high] ** 2)))
    if len(uv_norms) > 1 and not all(b > a for a, b in zip(uv_norms, uv_norms[1:])):
        raise ScenarioError(
            "||omega^-1 1{omega > split} v|| does not grow along the cutoff list; the scenario is not UV divergent"
        )
    a = abs(eta)

    def job(item):
        cutoff, grid = item
        base = ModelParams(eta, g, grid, 1, opts.dim_cap)
        c = polaron_shift(base, split)
        z = -c - 1j

        def lab_eval(n):
            params = base.replace(n_max=n)
            fib0 = build_fiber(params, eta=0.0)
            fm = build_fiber(params, eta=-a)
            fp = build_fiber(params, eta=a)
            d = max(resolvent_distance(fm, fib0, z, n_cap(params)), resolvent_distance(fp, fib0, z, n_cap(params)))
            e_lo = eigensolve(fm, k=1, dense_cap=opts.dense_cap)
            e_hi = eigensolve(fp, k=1, dense_cap=opts.dense_cap, vectors=False).ground_energy
            e_0 = eigensolve(fib0, k=1, dense_cap=opts.dense_cap, vectors=False).ground_energy
            return (d, e_lo.ground_energy, e_0), {"lo": e_lo, "hi": e_hi, "params": params}

        def pol_eval(n):
            params = base.replace(n_max=n)
            target = build_polaron_fiber(params, split, eta=0.0)
            d = resolvent_distance(build_polaron_fiber(params, split), target, -1j, n_cap(params))
            return d, None

        def n_cap(params):
            return max(opts.dense_cap, params.basis().dim)

        mu_lab = g * g * grid.displacement_norm_sq
        mu_pol = float(np.sum(np.abs(2 * polaron_amplitude(base, split)) ** 2)) + g * g * float(
            np.sum(np.abs(grid.v[grid.omega <= split]) ** 2 / grid.omega[grid.omega <= split] ** 2)
        )
        lab = _estimate(lab_eval, coherent_ladder(mu_lab, grid.M, opts.dense_cap, opts), opts, rtol)
        pol = _estimate(pol_eval, coherent_ladder(mu_pol, grid.M, opts.dense_cap, opts), opts, rtol)
        obs = lab.payload
        row = SweepRow(param=cutoff, frame="lab+polaron", eta=eta, n_max=lab.n_max, shift=c)
        row.ground_energy = obs["lo"].ground_energy
        row.opposite_energy = obs["hi"]
        row.delta = obs["lo"].ground_energy + c
        row.reference_energy = float(lab.value[2]) + c
        row.resolvent_diff = float(lab.value[0])
        row.fiber_resolvent_diff = float(pol.value[0])
        row.displacement_norm_sq = mu_lab
        row.truncation_error = max(lab.error, pol.error)
        row.flagged = not (lab.converged and pol.converged)
        return row, obs

    results = _run(job, list(zip(cutoffs, grids)), opts.workers)
    report = SweepReport("uv_renorm", "Lambda", [r for r, _ in results],
                         {"eta": eta, "g": g, "split_mass": split, "uv_norms": uv_norms})
    for row, obs in results:
        report.states[row.param] = (obs["lo"].ground_state, obs["params"].replace(eta=-a), "lab", None)
    return report


def sweep_massless(
    grid: ModeGrid,
    eta: float,
    gs: Sequence[float],
    frame: str = "lab",
    options: SweepOptions | None = None,
) -> SweepReport:
    """Shifted energy, number defect ``(<N> - g^2 ||omega^{-1} v||^2)/g^2`` and parity expectation.

    For ``eta <= 0`` on an infrared-regular grid.  The lab frame is the
    default: it needs the smaller truncation and the sparse fiber suits the
    iterative solver when several modes are present.
    """
    if eta > 0:
        raise ValueError("the massless sweep is defined for eta <= 0")
    if not np.isfinite(grid.displacement_norm_sq):
        raise ScenarioError("massless sweep needs omega^-1 v square summable")
    opts = options or SweepOptions()

    def job(g):
        row = SweepRow(param=float(g), frame=frame, eta=eta)
        est, shift = _ground_point(grid, eta, g, frame, opts, None, power=2)
        _fill_row(row, est, shift, g, grid)
        return row, est.payload

    results = _run(job, list(gs), opts.workers)
    report = SweepReport("massless", "g", [r for r, _ in results], {"eta": eta, "frame": frame})
    for row, obs in results:
        report.states[row.param] = (obs["vector"], obs["params"], frame, None)
    return report


@dataclass
class GapCriterionReport:
    eps: np.ndarray
    integrals: np.ndarray
    errors: np.ndarray
    slope: float
    intercept: float
    r_squared: float
    ratio: float
    verdict: str
    # last over first local slope dI/dlog(1/eps): near 1 for log growth, decaying when bounded
    slope_decay: float = _NAN

    def to_sweep_report(self) -> SweepReport:
        rows = [SweepRow(param=float(e), frame="continuum", integral=float(i), truncation_error=float(d))
                for e, i, d in zip(self.eps, self.integrals, self.errors)]
        return SweepReport("gap_criterion", "eps", rows,
                           {"slope": self.slope, "r_squared": self.r_squared, "ratio": self.ratio,
                            "slope_decay": self.slope_decay, "verdict": self.verdict})


def _regularised_integral(preset: ScenarioPreset, eps: float, nodes: int) -> float:
    m = preset.mass
    top = preset.cutoff if preset.cutoff_shape == "sharp" else 4 * preset.cutoff
    om = dispersion(preset)
    v = coupling_profile(preset)
    # substitute s = log(omega - m + eps): the 1/(omega - m + eps) weight becomes flat
    x, w = np.polynomial.legendre.leggauss(nodes)
    lo, hi = math.log(eps), math.log(top - m + eps)
    s = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    omega = m - eps + np.exp(s)
    omega = np.maximum(omega, m)
    k = np.sqrt(np.maximum(omega**2 - m**2, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = np.abs(v(k)) ** 2 * k ** (preset.nu - 2) * omega
    integrand = np.where(np.isfinite(integrand), integrand, 0.0)
    assert np.allclose(om(k), omega)
    return float(sphere_area(preset.nu) * 0.5 * (hi - lo) * np.sum(w * integrand))


def gap_criterion_diagnostic(
    preset: ScenarioPreset,
    eps_list: Sequence[float] = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5),
    nodes: int = 400,
    r2_min: float = 0.99,
    bounded_ratio: float = 2.0,
) -> GapCriterionReport:
    """Regularised integral ``I(eps) = int |v|^2 / (omega - m + eps) d^nu k`` and its growth.

    Evaluated on its own fine quadrature (not the model grid).  With three or
    more ``eps`` the verdict follows the local slopes of ``I`` against
    ``log(1/eps)``: a steady slope (last over first ``>= 0.5``) together with a
    linear fit of ``R^2 >= r2_min`` means logarithmic divergence ("satisfied"),
    a decaying slope means the integral stays bounded ("violated").  With two
    ``eps`` only the growth ratio is available: ``I(eps_min) / I(eps_max) <=
    bounded_ratio`` is read as bounded.
    """
    if preset.kind != "massive_generic":
        raise ScenarioError("the gap criterion is evaluated on massive radial presets")
    eps = np.array(sorted(eps_list, reverse=True), dtype=float)
    vals = np.array([_regularised_integral(preset, e, nodes) for e in eps])
    # quadrature error estimate from a doubled node count
    errs = np.abs(np.array([_regularised_integral(preset, e, 2 * nodes) for e in eps]) - vals)
    if np.all(vals == 0):
        return GapCriterionReport(eps, vals, errs, 0.0, 0.0, _NAN, _NAN, "violated")
    fit = stats.linregress(np.log(1 / eps), vals)
    ratio = float(vals[-1] / vals[0])
    r2 = float(fit.rvalue**2)
    local = np.diff(vals) / np.diff(np.log(1 / eps))
    decay = float(local[-1] / local[0]) if eps.size >= 3 and local[0] > 0 else _NAN
    if eps.size < 3:
        verdict = "violated" if ratio <= bounded_ratio else "inconclusive"
    elif decay >= 0.5 and r2 >= r2_min and fit.slope > 0:
        verdict = "satisfied"
    elif decay < 0.5:
        verdict = "violated"
    else:
        verdict = "inconclusive"
    return GapCriterionReport(eps, vals, errs, float(fit.slope), float(fit.intercept), r2, ratio, verdict, decay)


def counterexample_demo(
    eta: float,
    h: float,
    gs: Sequence[float],
    nodes: int = 3,
    options: SweepOptions | None = None,
    rtol: float = 1e-6,
) -> SweepReport:
    """Lowest point of the polaron-frame fiber for the infrared-divergent family.

    For each family index ``g`` the grid couples on ``1/g <= k <= 2`` with
    ``v_g = omega^{-1/2}``; the model coupling is ``h``.  The lowest point of
    the all-high polaron fiber equals ``E_eta(h v_g) + h^2 ||omega^{-1/2} v_g||^2``
    and is computed in the lab frame, whose truncation needs only the mean
    number ``h^2 ||omega^{-1} v_g||^2``.
    """
    if not eta < 0:
        raise ValueError("the counterexample uses eta < 0")
    if h == 0:
        raise ValueError("the counterexample needs h != 0")
    opts = options or SweepOptions()

    def job(g):
        grid = make_scenario(get_preset("counterexample_3d", family_g=float(g), nodes=nodes))
        row = SweepRow(param=float(g), frame="lab", eta=eta)
        local = SweepOptions(**{**asdict(opts), "rtol": rtol, "sigmas": 5.0, "margin": 10, "ladder_steps": 3})
        est, shift = _ground_point(grid, eta, abs(h), "lab", local, None, power=2)
        _fill_row(row, est, shift, abs(h), grid)
        row.reference_energy = eta * math.exp(-2 * h * h * grid.displacement_norm_sq)
        return row, est.payload

    results = _run(job, list(gs), opts.workers)
    report = SweepReport("counterexample", "g", [r for r, _ in results], {"eta": eta, "h": h, "nodes": nodes})
    for row, obs in results:
        report.states[row.param] = (obs["vector"], obs["params"], "lab", None)
    return report


@dataclass
class SummabilityReport:
    weight: str
    p: float
    x: float
    terms: np.ndarray
    partial_sums: np.ndarray
    ratios: np.ndarray
    verdict: str
    sector_sum: float | None = None


def summability_check(
    grid: ModeGrid,
    g: float,
    weight: str = "factorial_root",
    p: float = 4.0,
    n_terms: int = 200,
    state: FockVector | None = None,
) -> SummabilityReport:
    """Series ``sum_n f(n)^2 x^n / n!`` with ``x = g^2 ||omega^{-1} v||^2``.

    ``weight="factorial_root"`` is ``f(n) = (n!)^{1/p}``.  The verdict follows
    the ratio ``(n + 1)^{2/p - 1} x`` of consecutive terms.  If a ground
    ``state`` is given, ``sum_n f(n)^2 ||psi^(n)||^2`` over its sectors is
    reported for comparison (it is bounded by the series).
    """
    if weight != "factorial_root":
        raise ValueError(f"unknown weight {weight!r}")
    if p <= 0:
        raise ValueError("p must be positive")
    x = g * g * grid.displacement_norm_sq
    n = np.arange(n_terms)
    log_f2 = (2.0 / p) * gammaln(n + 1)
    if x == 0:
        log_terms = np.where(n == 0, 0.0, -np.inf)
    else:
        log_terms = log_f2 + n * math.log(x) - gammaln(n + 1)
    # terms beyond the float range become inf; the verdict does not depend on them
    with np.errstate(over="ignore"):
        terms = np.exp(log_terms)
        partial = np.exp(np.logaddexp.accumulate(log_terms))
    expo = 2.0 / p - 1.0
    ratios = (n[:-1] + 1.0) ** expo * x if x else np.zeros(n_terms - 1)
    if x == 0 or expo < 0:
        verdict = "finite"
    elif expo == 0:
        verdict = "finite" if x < 1 else "divergent"
    else:
        verdict = "divergent"
    sector_sum = None
    if state is not None:
        w = sector_norms(state)
        k = np.arange(w.size)
        sector_sum = float(np.exp(logsumexp((2.0 / p) * gammaln(k + 1), b=w)))
    return SummabilityReport(weight, p, x, terms, partial, ratios, verdict, sector_sum)
