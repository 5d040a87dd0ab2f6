"""End-to-end reproduction studies: fits, error grids, noise sweeps, reports.

The three built-in segments encode the published demonstration systems:

* ``ss1-3pt``: times 0,1,2 s, degree 4, square system (residual constraints
  pruned to make the equation count match the 17 unknowns);
* ``ss1``: times 0..3 s, degree 5, least squares, residuals at t=0,1,2;
* ``ss2``: times 3..6 s, degree 5, least squares, residuals at t=3,4,5.

Datasets are generated from the closed-form solution rounded to 4 decimals,
matching how the reference concentration values are tabulated.
"""

from __future__ import annotations

import csv
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .basis import TrialPolynomialSet
from .collocation import (
    MODE_LEAST_SQUARES,
    MODE_SQUARE,
    CollocationSystem,
    Segment,
    assemble,
)
from .mechanism import (
    ConcentrationState,
    Mechanism,
    RateConstants,
    abc_mechanism,
    analytic_curve,
    generate_dataset,
)
from .solver import FitResult, SolverConfig, solve

# Ground-truth rate constants used to generate every dataset and to express
# recovered-constant percent errors.
TRUE_RATE_CONSTANTS = RateConstants(k1=0.9855, k2=0.1637)

DEFAULT_DATA_DECIMALS = 4
DEFAULT_GRID_STEP = 0.25
DEFAULT_CURVE_STEP = 0.01
# Fitted coefficients are rounded to reporting precision before error grids
# are evaluated; the reference error tables were produced from coefficients
# printed at this precision, and t**5 amplifies the rounding at the far end
# of a segment far above the full-precision fit error.
DEFAULT_COEFF_DECIMALS = 5

DEFAULT_NOISE_PERCENTS = (1.0, -1.0, 3.0, -3.0, 5.0, -5.0, 7.0, -7.0)

NOISE_SCOPE_T_POSITIVE = "t_positive"
NOISE_SCOPE_ALL = "all"

STABILITY_HEADER = (
    "noise_percent",
    "k1",
    "k2",
    "k1_err_percent",
    "k2_err_percent",
    "converged",
)


@dataclass(frozen=True)
class SegmentSpec:
    """Named recipe for building and fitting one segment."""

    name: str
    times: tuple[float, ...]
    degree: int
    mode: str
    residual_times: tuple[float, ...] | None = None


SEGMENT_PRESETS = {
    "ss1-3pt": SegmentSpec(
        name="ss1-3pt", times=(0.0, 1.0, 2.0), degree=4, mode=MODE_SQUARE
    ),
    "ss1": SegmentSpec(
        name="ss1",
        times=(0.0, 1.0, 2.0, 3.0),
        degree=5,
        mode=MODE_LEAST_SQUARES,
        residual_times=(0.0, 1.0, 2.0),
    ),
    "ss2": SegmentSpec(
        name="ss2",
        times=(3.0, 4.0, 5.0, 6.0),
        degree=5,
        mode=MODE_LEAST_SQUARES,
        residual_times=(3.0, 4.0, 5.0),
    ),
}

# Published recovered constants per built-in segment, with the tolerances the
# reproduction is held to.
REFERENCE_FITS = {
    "ss1-3pt": {"k1": 0.980855, "k1_tol": 1e-3, "k2": 0.164535, "k2_tol": 1e-3},
    "ss1": {"k1": 0.9842, "k1_tol": 2e-3, "k2": 0.1639, "k2_tol": 1e-3},
    "ss2": {"k1": 0.98649, "k1_tol": 1e-3, "k2": 0.16373, "k2_tol": 5e-4},
}


@dataclass(frozen=True)
class NoiseSpec:
    """Deterministic fixed-sign relative perturbation of the observations.

    Every in-scope concentration v becomes v * (1 + relative_percent / 100).
    The default scope leaves t=0 observations untouched: they are definitional
    initial conditions, not measurements.
    """

    relative_percent: float
    scope: str = NOISE_SCOPE_T_POSITIVE

    def __post_init__(self) -> None:
        if abs(self.relative_percent) > 50:
            raise ValueError("noise level beyond +-50% is not meaningful here")
        if self.scope not in (NOISE_SCOPE_T_POSITIVE, NOISE_SCOPE_ALL):
            raise ValueError(f"unknown noise scope {self.scope!r}")


@dataclass(frozen=True)
class ErrorGrid:
    """Per-species absolute errors |C_exact - C_calc| on a time grid."""

    times: tuple[float, ...]
    species: tuple[str, ...]
    errors: tuple[tuple[float, ...], ...]

    def as_array(self) -> np.ndarray:
        return np.array(self.errors).reshape(len(self.times), len(self.species))

    def max_errors(self, t_min: float | None = None) -> np.ndarray:
        """Per-species maxima, optionally restricted to times >= t_min."""
        arr = self.as_array()
        if t_min is not None:
            arr = arr[np.asarray(self.times) >= t_min]
        return arr.max(axis=0) if arr.size else np.zeros(len(self.species))


@dataclass(frozen=True)
class StabilityRow:
    """One noise level of a stability sweep."""

    noise_percent: float
    k1: float
    k2: float
    k1_err_percent: float
    k2_err_percent: float
    converged: bool


@dataclass(frozen=True)
class FitExperiment:
    """Fit of one segment plus its error grid against the exact solution."""

    spec: SegmentSpec
    segment: Segment
    result: FitResult
    grid: ErrorGrid


def resolve_segment_spec(
    segment_spec,
    degree: int | None = None,
    mode: str | None = None,
) -> SegmentSpec:
    """Turn a preset name or a sequence of times into a SegmentSpec.

    ``degree`` and ``mode`` override the preset values; custom time sequences
    default to degree 5, least squares, residuals at every time.
    """
    if isinstance(segment_spec, SegmentSpec):
        spec = segment_spec
    elif isinstance(segment_spec, str):
        try:
            spec = SEGMENT_PRESETS[segment_spec]
        except KeyError:
            raise ValueError(
                f"unknown segment {segment_spec!r}; "
                f"choose from {sorted(SEGMENT_PRESETS)} or pass explicit times"
            ) from None
    else:
        times = tuple(float(t) for t in segment_spec)
        spec = SegmentSpec(
            name="custom", times=times, degree=5, mode=MODE_LEAST_SQUARES
        )
    if degree is not None:
        spec = replace(spec, degree=degree)
    if mode is not None:
        spec = replace(spec, mode=mode)
    return spec


def apply_noise(
    data: Sequence[ConcentrationState], spec: NoiseSpec
) -> list[ConcentrationState]:
    """Scale every in-scope concentration by (1 + relative_percent/100)."""
    factor = 1.0 + spec.relative_percent / 100.0
    out = []
    for state in data:
        if spec.scope == NOISE_SCOPE_T_POSITIVE and state.t <= 0:
            out.append(state)
            continue
        out.append(
            ConcentrationState(
                t=state.t,
                ca=state.ca * factor,
                cb=state.cb * factor,
                cc=state.cc * factor,
            )
        )
    return out


def build_segment(
    spec: SegmentSpec,
    k: RateConstants = TRUE_RATE_CONSTANTS,
    rounding: int | None = DEFAULT_DATA_DECIMALS,
    noise: NoiseSpec | None = None,
) -> Segment:
    """Generate the spec's dataset (optionally perturbed) and wrap it."""
    data = generate_dataset(k, spec.times, rounding=rounding)
    if noise is not None:
        data = apply_noise(data, noise)
    return Segment.from_states(data, spec.degree, residual_times=spec.residual_times)


def _rounded_polynomials(
    polys: TrialPolynomialSet, decimals: int | None
) -> TrialPolynomialSet:
    if decimals is None:
        return polys
    matrix = np.round(polys.coefficient_matrix(), decimals)
    return TrialPolynomialSet.from_coefficients(polys.species, matrix)


def error_grid(
    fit: FitResult,
    grid_times,
    k_true: RateConstants = TRUE_RATE_CONSTANTS,
    coeff_decimals: int | None = DEFAULT_COEFF_DECIMALS,
) -> ErrorGrid:
    """Absolute errors of the fitted polynomials against the exact solution.

    Errors are always measured against the closed-form oracle, never against a
    numerical integration. Coefficients are rounded to ``coeff_decimals``
    first (None keeps full precision); see the module notes.
    """
    ts = np.asarray(grid_times, dtype=float)
    polys = _rounded_polynomials(fit.polynomials, coeff_decimals)
    if ts.size == 0:
        return ErrorGrid(times=(), species=polys.species, errors=())
    exact = analytic_curve(k_true, 1.0, ts)
    fitted = polys.evaluate(ts).T
    errors = np.abs(exact - fitted)
    return ErrorGrid(
        times=tuple(float(t) for t in ts),
        species=polys.species,
        errors=tuple(tuple(float(v) for v in row) for row in errors),
    )


def run_fit_experiment(
    segment_spec,
    degree: int | None = None,
    mode: str | None = None,
    *,
    noise: NoiseSpec | None = None,
    rounding: int | None = DEFAULT_DATA_DECIMALS,
    grid_step: float | None = DEFAULT_GRID_STEP,
    grid_times=None,
    coeff_decimals: int | None = DEFAULT_COEFF_DECIMALS,
    config: SolverConfig | None = None,
    mechanism: Mechanism | None = None,
) -> FitExperiment:
    """Generate data, assemble, solve, and grade the fit on a time grid.

    ``grid_times`` overrides the default 0.25 s grid spanning the segment; an
    empty sequence yields an empty grid while the fit is still performed.
    """
    spec = resolve_segment_spec(segment_spec, degree=degree, mode=mode)
    mech = mechanism or abc_mechanism()
    segment = build_segment(spec, rounding=rounding, noise=noise)
    system = assemble(segment, mech, spec.mode)
    result = solve(system, config)
    if grid_times is None:
        step = grid_step if grid_step else DEFAULT_GRID_STEP
        grid_times = np.arange(spec.times[0], spec.times[-1] + 1e-9, step)
    grid = error_grid(result, grid_times, coeff_decimals=coeff_decimals)
    return FitExperiment(spec=spec, segment=segment, result=result, grid=grid)


def _sweep_one(spec, percent, scope, rounding, config, mech) -> StabilityRow:
    noise = NoiseSpec(relative_percent=percent, scope=scope)
    segment = build_segment(spec, rounding=rounding, noise=noise)
    result = solve(assemble(segment, mech, spec.mode), config)
    k = result.rate_constants
    truth = TRUE_RATE_CONSTANTS
    return StabilityRow(
        noise_percent=float(percent),
        k1=k.k1,
        k2=k.k2,
        k1_err_percent=100.0 * abs(k.k1 - truth.k1) / truth.k1,
        k2_err_percent=100.0 * abs(k.k2 - truth.k2) / truth.k2,
        converged=result.converged,
    )


def run_stability_sweep(
    segment_spec,
    degree: int | None = None,
    percents: Sequence[float] = DEFAULT_NOISE_PERCENTS,
    *,
    mode: str | None = None,
    scope: str = NOISE_SCOPE_T_POSITIVE,
    rounding: int | None = DEFAULT_DATA_DECIMALS,
    config: SolverConfig | None = None,
    jobs: int = 1,
) -> list[StabilityRow]:
    """Fit the segment at each signed noise level.

    Rows are returned in the order of ``percents`` regardless of ``jobs``;
    non-converged fits are flagged in the row, never dropped. Percent errors
    are relative to the fixed ground truth.
    """
    spec = resolve_segment_spec(segment_spec, degree=degree, mode=mode)
    mech = abc_mechanism()
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(
                pool.map(
                    lambda p: _sweep_one(spec, p, scope, rounding, config, mech),
                    percents,
                )
            )
    else:
        rows = [_sweep_one(spec, p, scope, rounding, config, mech) for p in percents]
    return rows


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header, rows) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"failed to write report {path}: {exc}") from exc


def write_fit_csv(path, name: str, fit: FitResult) -> None:
    """Recovered constants, coefficients, and solve diagnostics."""
    rows = [
        ("segment", name),
        ("mode", fit.mode),
        ("k1", fit.rate_constants.k1),
        ("k2", fit.rate_constants.k2),
        ("final_residual_norm", fit.final_residual_norm),
        ("iterations", fit.iterations),
        ("converged", fit.converged),
        ("diagnostic", fit.diagnostic or ""),
    ]
    for species, poly in zip(fit.polynomials.species, fit.polynomials.polynomials):
        for n, c in enumerate(poly.coefficients):
            rows.append((f"{species}_c{n}", c))
    _write_csv(Path(path), ("parameter", "value"), rows)


def write_errors_csv(path, grid: ErrorGrid) -> None:
    """Error grid in the reference tables' layout: one row per grid time."""
    header = ("t",) + tuple(f"{s}_abs_error" for s in grid.species)
    rows = [(t,) + row for t, row in zip(grid.times, grid.errors)]
    _write_csv(Path(path), header, rows)


def write_stability_csv(path, rows: Sequence[StabilityRow]) -> None:
    _write_csv(
        Path(path),
        STABILITY_HEADER,
        [
            (r.noise_percent, r.k1, r.k2, r.k1_err_percent, r.k2_err_percent, r.converged)
            for r in rows
        ],
    )


def write_curves_csv(
    path,
    fit: FitResult,
    t_start: float,
    t_end: float,
    step: float = DEFAULT_CURVE_STEP,
    k_true: RateConstants = TRUE_RATE_CONSTANTS,
) -> None:
    """Dense sampling of fitted and exact curves for external plotting."""
    ts = np.arange(t_start, t_end + 1e-9, step)
    fitted = fit.polynomials.evaluate(ts).T
    exact = analytic_curve(k_true, 1.0, ts)
    species = fit.polynomials.species
    header = (
        ("t",)
        + tuple(f"{s}_fit" for s in species)
        + tuple(f"{s}_exact" for s in species)
    )
    rows = [
        (float(t),) + tuple(float(v) for v in fit_row) + tuple(float(v) for v in ex_row)
        for t, fit_row, ex_row in zip(ts, fitted, exact)
    ]
    _write_csv(Path(path), header, rows)


@dataclass(frozen=True)
class SegmentReport:
    """Everything render_reports writes for one segment."""

    name: str
    fit: FitResult
    grid: ErrorGrid | None = None
    sweep: Sequence[StabilityRow] | None = None
    t_start: float = 0.0
    t_end: float = 0.0


def render_reports(reports: Sequence[SegmentReport], out_dir) -> list[Path]:
    """Write fit/errors/stability/curves CSVs per segment; return the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for rep in reports:
        path = out / f"fit_{rep.name}.csv"
        write_fit_csv(path, rep.name, rep.fit)
        written.append(path)
        if rep.grid is not None:
            path = out / f"errors_{rep.name}.csv"
            write_errors_csv(path, rep.grid)
            written.append(path)
        if rep.sweep is not None:
            path = out / f"stability_{rep.name}.csv"
            write_stability_csv(path, rep.sweep)
            written.append(path)
        if rep.t_end > rep.t_start:
            path = out / f"curves_{rep.name}.csv"
            write_curves_csv(path, rep.fit, rep.t_start, rep.t_end)
            written.append(path)
    return written


@dataclass(frozen=True)
class SummaryCheck:
    """One pass/fail row of the reproduction summary."""

    check: str
    quantity: str
    target: str
    actual: str
    passed: bool


@dataclass(frozen=True)
class ReproduceReport:
    checks: tuple[SummaryCheck, ...]
    paths: tuple[Path, ...]
    elapsed_seconds: float

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _within(actual: float, target: float, tol: float) -> bool:
    return abs(actual - target) <= tol


def _monotone_within_slack(errors: Sequence[float], slack: float) -> bool:
    return all(b >= a - slack for a, b in zip(errors, errors[1:]))


def reproduce(out_dir, jobs: int = 1) -> ReproduceReport:
    """Run the full reproduction pipeline and grade it against the references.

    Fits the three built-in segments, evaluates both error grids, runs both
    stability sweeps, writes every report CSV plus ``summary.csv``, and checks
    the recovered constants, grid errors, and sweep behaviour against the
    published values at their documented tolerances.
    """
    t0 = _time.perf_counter()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    experiments = {}
    fit_seconds = {}
    for name in ("ss1-3pt", "ss1", "ss2"):
        t_fit = _time.perf_counter()
        experiments[name] = run_fit_experiment(name)
        fit_seconds[name] = _time.perf_counter() - t_fit

    sweeps = {
        name: run_stability_sweep(name, jobs=jobs) for name in ("ss1", "ss2")
    }

    reports = []
    for name, exp in experiments.items():
        reports.append(
            SegmentReport(
                name=name,
                fit=exp.result,
                grid=exp.grid if name != "ss1-3pt" else None,
                sweep=sweeps.get(name),
                t_start=exp.spec.times[0],
                t_end=exp.spec.times[-1],
            )
        )
    paths = render_reports(reports, out)

    checks = []

    def add(check, quantity, target, actual, passed):
        checks.append(
            SummaryCheck(
                check=check,
                quantity=quantity,
                target=target,
                actual=actual if isinstance(actual, str) else repr(actual),
                passed=bool(passed),
            )
        )

    for name, ref in REFERENCE_FITS.items():
        k = experiments[name].result.rate_constants
        add(
            f"fit_{name}", "k1", f"{ref['k1']}+-{ref['k1_tol']}", k.k1,
            _within(k.k1, ref["k1"], ref["k1_tol"]),
        )
        add(
            f"fit_{name}", "k2", f"{ref['k2']}+-{ref['k2_tol']}", k.k2,
            _within(k.k2, ref["k2"], ref["k2_tol"]),
        )
    # The measured time stays out of the CSV so reruns are byte-identical.
    runtime_ok = fit_seconds["ss1-3pt"] < 0.1
    add(
        "fit_ss1-3pt", "runtime_seconds", "<0.1",
        "ok" if runtime_ok else "exceeded", runtime_ok,
    )

    ss1_max = float(experiments["ss1"].grid.max_errors(t_min=0.5).max())
    add("errors_ss1", "max_abs_error_t>=0.5", "<=0.004", ss1_max, ss1_max <= 0.004)
    ss2_grid = experiments["ss2"].grid
    ca_errors = ss2_grid.as_array()[:, 0]
    ss2_max_ca = float(ca_errors.max())
    argmax_t = ss2_grid.times[int(np.argmax(ca_errors))]
    add("errors_ss2", "max_Ca_abs_error", "<=0.02", ss2_max_ca, ss2_max_ca <= 0.02)
    add("errors_ss2", "max_Ca_error_time", "6.0", argmax_t, argmax_t == 6.0)

    ss1_rows = {row.noise_percent: row for row in sweeps["ss1"]}
    for pct in (7.0, -7.0):
        err = ss1_rows[pct].k1_err_percent
        add(
            "stability_ss1", f"k1_err_percent_at_{pct:+g}", "[1.5,3.0]", err,
            1.5 <= err <= 3.0,
        )
    for sign in (1.0, -1.0):
        series = [
            ss1_rows[sign * lvl].k1_err_percent for lvl in (1.0, 3.0, 5.0, 7.0)
        ]
        add(
            "stability_ss1",
            f"k1_err_monotone_{'pos' if sign > 0 else 'neg'}",
            "non-decreasing+-0.3",
            "ok" if _monotone_within_slack(series, 0.3) else "violated",
            _monotone_within_slack(series, 0.3),
        )
    ss2_k1_max = max(row.k1_err_percent for row in sweeps["ss2"])
    ss2_k2_max = max(row.k2_err_percent for row in sweeps["ss2"])
    add("stability_ss2", "max_k1_err_percent", "<=1", ss2_k1_max, ss2_k1_max <= 1.0)
    add("stability_ss2", "max_k2_err_percent", "<=0.2", ss2_k2_max, ss2_k2_max <= 0.2)

    summary_path = out / "summary.csv"
    _write_csv(
        summary_path,
        ("check", "quantity", "target", "actual", "pass"),
        [(c.check, c.quantity, c.target, c.actual, c.passed) for c in checks],
    )
    paths.append(summary_path)

    return ReproduceReport(
        checks=tuple(checks),
        paths=tuple(paths),
        elapsed_seconds=_time.perf_counter() - t0,
    )
