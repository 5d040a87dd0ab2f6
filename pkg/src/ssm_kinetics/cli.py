"""Command-line front end: dataset generation, fitting, sweeps, reproduction.

Exit codes: 0 success, 2 argument or data-format error, 3 I/O failure,
4 solver non-convergence, 5 reproduction acceptance failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from .collocation import MODES, Segment, UnderdeterminedSystem, assemble
from .experiments import (
    DEFAULT_DATA_DECIMALS,
    DEFAULT_NOISE_PERCENTS,
    NOISE_SCOPE_T_POSITIVE,
    SEGMENT_PRESETS,
    TRUE_RATE_CONSTANTS,
    error_grid,
    reproduce,
    resolve_segment_spec,
    run_fit_experiment,
    run_stability_sweep,
    write_errors_csv,
    write_fit_csv,
    write_stability_csv,
)
from .mechanism import (
    NonFiniteState,
    RateConstants,
    abc_mechanism,
    generate_dataset,
    read_dataset_csv,
    write_dataset_csv,
)
from .solver import (
    RankDeficientInnerSystem,
    SingularNormalEquations,
    SolverConfig,
    solve,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NO_CONVERGENCE = 4
EXIT_ACCEPTANCE = 5

OUT_DIR_ENV = "SSM_OUT_DIR"

_CONFIG_KEYS = {
    "segment",
    "times",
    "degree",
    "mode",
    "noise",
    "scope",
    "out_dir",
    "round",
    "truth",
    "out",
    "data",
    "jobs",
    "solver",
    "k1",
    "k2",
}
_SOLVER_KEYS = {f.name for f in dataclasses.fields(SolverConfig)}


@dataclass(frozen=True)
class RunConfig:
    """Merged options for one command: flags override config-file values."""

    command: str
    segment: str | None = None
    times: tuple[float, ...] | None = None
    degree: int | None = None
    mode: str | None = None
    noise: tuple[float, ...] | None = None
    scope: str = NOISE_SCOPE_T_POSITIVE
    out_dir: Path = Path(".")
    data_rounding: int | None = DEFAULT_DATA_DECIMALS
    solver: SolverConfig | None = None
    jobs: int = 1
    truth: tuple[float, float] | None = None
    data: Path | None = None
    out: Path | None = None
    k1: float = TRUE_RATE_CONSTANTS.k1
    k2: float = TRUE_RATE_CONSTANTS.k2


def _parse_times(text) -> tuple[float, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(float(t) for t in text)
    try:
        return tuple(float(tok) for tok in str(text).split(",") if tok.strip() != "")
    except ValueError:
        raise ValueError(f"cannot parse times {text!r}") from None


def _parse_noise(text) -> tuple[float, ...]:
    """Expand a noise list; bare magnitudes become +p,-p pairs in order."""
    if isinstance(text, (list, tuple)):
        tokens = [str(t) for t in text]
    else:
        tokens = [tok.strip() for tok in str(text).split(",") if tok.strip() != ""]
    out = []
    for tok in tokens:
        value = float(tok)
        if tok.startswith(("+", "-")):
            out.append(value)
        else:
            out.extend([value, -value])
    if not out:
        raise ValueError("noise list is empty")
    return tuple(out)


def _parse_rounding(text) -> int | None:
    if text is None:
        return None
    token = str(text).strip().lower()
    if token in ("none", "full"):
        return None
    try:
        return int(token)
    except ValueError:
        raise ValueError(f"cannot parse rounding {text!r}") from None


def _load_config_file(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
    return raw


def _solver_config(raw) -> SolverConfig | None:
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise ValueError("solver overrides must be a JSON object")
    unknown = set(raw) - _SOLVER_KEYS
    if unknown:
        raise ValueError(f"unknown solver keys {sorted(unknown)}")
    return SolverConfig(**raw)


def _merge_run_config(args: argparse.Namespace) -> RunConfig:
    file_cfg = _load_config_file(args.config) if args.config else {}

    def pick(key, default=None):
        value = getattr(args, key, None)
        if value is not None:
            return value
        return file_cfg.get(key, default)

    out_dir = pick("out_dir") or os.environ.get(OUT_DIR_ENV) or "."
    times = pick("times")
    noise = pick("noise")
    truth = pick("truth")
    if isinstance(truth, str):
        parts = _parse_times(truth)
        if len(parts) != 2:
            raise ValueError("--truth expects two values: k1,k2")
        truth = (parts[0], parts[1])
    elif isinstance(truth, (list, tuple)):
        truth = (float(truth[0]), float(truth[1]))
    rounding = pick("round", DEFAULT_DATA_DECIMALS)
    data = pick("data")
    return RunConfig(
        command=args.command,
        segment=pick("segment"),
        times=_parse_times(times) if times is not None else None,
        degree=pick("degree"),
        mode=pick("mode"),
        noise=_parse_noise(noise) if noise is not None else None,
        scope=pick("scope", NOISE_SCOPE_T_POSITIVE),
        out_dir=Path(out_dir),
        data_rounding=_parse_rounding(rounding),
        solver=_solver_config(file_cfg.get("solver")),
        jobs=int(pick("jobs", 1)),
        truth=truth,
        data=Path(data) if data is not None else None,
        out=Path(pick("out")) if pick("out") is not None else None,
        k1=float(pick("k1", TRUE_RATE_CONSTANTS.k1)),
        k2=float(pick("k2", TRUE_RATE_CONSTANTS.k2)),
    )


def _cmd_generate(cfg: RunConfig) -> int:
    if cfg.k1 <= 0 or cfg.k2 <= 0:
        raise ValueError("rate constants must be positive")
    times = cfg.times if cfg.times is not None else (0.0, 1.0, 2.0, 3.0)
    states = generate_dataset(
        RateConstants(cfg.k1, cfg.k2), times, rounding=cfg.data_rounding
    )
    out = cfg.out if cfg.out is not None else cfg.out_dir / "dataset.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_dataset_csv(out, states, decimals=cfg.data_rounding)
    print(f"wrote {len(states)} rows to {out}")
    return EXIT_OK


def _print_fit(name, result, truth) -> None:
    k = result.rate_constants
    line = f"{name}: k1 = {k.k1:.6f}  k2 = {k.k2:.6f}"
    if truth is not None:
        e1 = 100.0 * abs(k.k1 - truth[0]) / truth[0]
        e2 = 100.0 * abs(k.k2 - truth[1]) / truth[1]
        line += f"  (errors vs truth: {e1:.3f}% / {e2:.3f}%)"
    line += f"  [mode={result.mode}, iterations={result.iterations}, "
    line += f"converged={result.converged}]"
    print(line)


def _cmd_fit(cfg: RunConfig) -> int:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    if cfg.data is not None:
        states = read_dataset_csv(cfg.data)
        degree = cfg.degree if cfg.degree is not None else 5
        mode = cfg.mode or "least_squares"
        segment = Segment.from_states(states, degree)
        system = assemble(segment, abc_mechanism(), mode)
        result = solve(system, cfg.solver)
        name = cfg.data.stem
        write_fit_csv(cfg.out_dir / f"fit_{name}.csv", name, result)
        if cfg.truth is not None:
            grid = error_grid(
                result,
                [s.t for s in states],
                k_true=RateConstants(*cfg.truth),
            )
            write_errors_csv(cfg.out_dir / f"errors_{name}.csv", grid)
        _print_fit(name, result, cfg.truth)
    elif cfg.segment is not None:
        exp = run_fit_experiment(
            cfg.segment,
            degree=cfg.degree,
            mode=cfg.mode,
            rounding=cfg.data_rounding,
            config=cfg.solver,
        )
        name = exp.spec.name
        result = exp.result
        write_fit_csv(cfg.out_dir / f"fit_{name}.csv", name, result)
        write_errors_csv(cfg.out_dir / f"errors_{name}.csv", exp.grid)
        truth = cfg.truth or (TRUE_RATE_CONSTANTS.k1, TRUE_RATE_CONSTANTS.k2)
        _print_fit(name, result, truth)
    else:
        raise ValueError("fit needs --segment NAME or --data FILE")
    return EXIT_OK if result.converged else EXIT_NO_CONVERGENCE


def _cmd_sweep(cfg: RunConfig) -> int:
    if cfg.segment is None:
        raise ValueError("sweep needs --segment NAME")
    spec = resolve_segment_spec(cfg.segment, degree=cfg.degree, mode=cfg.mode)
    percents = cfg.noise if cfg.noise is not None else DEFAULT_NOISE_PERCENTS
    rows = run_stability_sweep(
        spec,
        percents=percents,
        scope=cfg.scope,
        rounding=cfg.data_rounding,
        config=cfg.solver,
        jobs=cfg.jobs,
    )
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.out_dir / f"stability_{spec.name}.csv"
    write_stability_csv(path, rows)
    print(f"noise%   k1        k2        k1_err%  k2_err%  converged")
    for r in rows:
        print(
            f"{r.noise_percent:+6.1f}  {r.k1:.6f}  {r.k2:.6f}  "
            f"{r.k1_err_percent:7.3f}  {r.k2_err_percent:7.3f}  {r.converged}"
        )
    print(f"wrote {path}")
    return EXIT_OK if all(r.converged for r in rows) else EXIT_NO_CONVERGENCE


def _cmd_reproduce(cfg: RunConfig) -> int:
    report = reproduce(cfg.out_dir, jobs=cfg.jobs)
    for check in report.checks:
        status = "PASS" if check.passed else "FAIL"
        print(
            f"{status}  {check.check:18s} {check.quantity:28s} "
            f"target {check.target:18s} actual {check.actual}"
        )
    n_pass = sum(c.passed for c in report.checks)
    print(
        f"{n_pass}/{len(report.checks)} checks passed "
        f"in {report.elapsed_seconds:.2f} s; reports in {cfg.out_dir}"
    )
    return EXIT_OK if report.all_passed else EXIT_ACCEPTANCE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssm-kinetics",
        description=(
            "Estimate first-order rate constants by fitting piecewise "
            "polynomial trial solutions constrained by data interpolation "
            "and ODE residual collocation."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--out-dir", dest="out_dir",
                       help=f"output directory (default ${OUT_DIR_ENV} or .)")

    p = sub.add_parser("generate", help="write a dataset CSV from the closed form")
    common(p)
    p.add_argument("--k1", type=float, help="rate constant k1 (1/s)")
    p.add_argument("--k2", type=float, help="rate constant k2 (1/s)")
    p.add_argument("--times", help="comma-separated sample times, e.g. 0,1,2")
    p.add_argument("--round", dest="round",
                   help="decimals for the data (integer or 'none'; default 4)")
    p.add_argument("--out", help="output CSV path (default <out-dir>/dataset.csv)")

    p = sub.add_parser("fit", help="fit rate constants to a segment or data file")
    common(p)
    p.add_argument("--segment", choices=sorted(SEGMENT_PRESETS),
                   help="built-in segment name")
    p.add_argument("--data", help="dataset CSV with header t,Ca,Cb,Cc")
    p.add_argument("--degree", type=int, help="trial polynomial degree")
    p.add_argument("--mode", choices=MODES, help="constraint-system mode")
    p.add_argument("--truth", help="k1,k2 ground truth for percent errors")
    p.add_argument("--round", dest="round",
                   help="decimals for generated segment data (default 4)")

    p = sub.add_parser("sweep", help="noise-stability sweep over a segment")
    common(p)
    p.add_argument("--segment", choices=sorted(SEGMENT_PRESETS), help="segment name")
    p.add_argument("--degree", type=int, help="trial polynomial degree")
    p.add_argument("--mode", choices=MODES, help="constraint-system mode")
    p.add_argument("--noise",
                   help="comma-separated levels; bare values expand to +p,-p")
    p.add_argument("--scope", choices=("t_positive", "all"),
                   help="which observations are perturbed (default t_positive)")
    p.add_argument("--jobs", type=int, help="parallel fits (order-independent)")

    p = sub.add_parser("reproduce", help="run the full reproduction pipeline")
    common(p)
    p.add_argument("--jobs", type=int, help="parallel sweep fits")

    return parser


_HANDLERS = {
    "generate": _cmd_generate,
    "fit": _cmd_fit,
    "sweep": _cmd_sweep,
    "reproduce": _cmd_reproduce,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _merge_run_config(args)
        return _HANDLERS[args.command](cfg)
    except (SingularNormalEquations, RankDeficientInnerSystem, NonFiniteState) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except UnderdeterminedSystem as exc:
        print(f"error: UnderdeterminedSystem: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
