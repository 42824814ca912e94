"""Command-line interface.

Every command writes a JSON report (to ``--out`` or stdout).  With ``--out``,
flat tables go next to it as ``<stem>.table.csv`` and plot series as
``<stem>.plot.csv``.  Exit codes: 0 success, 2 usage/config error, 3 data or
validation error, 4 resource or calibration failure.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, bootstrap_infer, rates, sim_engine, tail_diagnostics, tail_models
from ._streams import resolve_workers
from .errors import CalibrationError, ConfigError, DataError, DomainError, FitError, ResourceError
from .io import PARSERS, dumps_report, sibling, write_table

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RESOURCE = 0, 2, 3, 4

TAILS = ("exponential", "pareto", "bounded_power", "uniform", "normal", "stretched_exp")


class UsageError(Exception):
    pass


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not (math.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"{text!r} must be positive")
    return v


def _nonneg_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not (math.isfinite(v) and v >= 0):
        raise argparse.ArgumentTypeError(f"{text!r} must be nonnegative")
    return v


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"{text!r} must be >= 1")
    return v


def _probability(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"{text!r} must lie strictly between 0 and 1")
    return v


def _int_list(text):
    try:
        values = [int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a comma-separated list of integers") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError(f"{text!r} must list positive integers")
    return values


def _depth(text):
    """Integer literal or an expression such as ``n^0.25`` / ``0.2*n^(4/9)``."""
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        return text


def _add_tail_flags(p, required=True):
    g = p.add_argument_group("tail model")
    g.add_argument("--tail", choices=TAILS, required=required)
    g.add_argument("--alpha", type=_positive_float, help="shape for pareto / bounded_power")
    g.add_argument("--rate", type=_positive_float, default=1.0, help="exponential rate (default 1)")
    g.add_argument("--mu", type=float, default=0.0)
    g.add_argument("--sigma", type=_positive_float, default=1.0)
    g.add_argument("--lam", type=_positive_float, default=1.0, help="stretched_exp scale")
    g.add_argument("--gamma", type=_positive_float, default=1.0, help="stretched_exp shape")
    g.add_argument("--shift", type=float, default=0.0, help="stretched_exp location")


def _tail_from_args(args) -> tail_models.TailModel:
    t = args.tail
    if t == "exponential":
        return tail_models.Exponential(args.rate)
    if t == "pareto":
        if args.alpha is None:
            raise UsageError("--alpha is required for --tail pareto")
        return tail_models.Pareto(args.alpha)
    if t in ("bounded_power", "uniform"):
        if t == "uniform" and args.alpha not in (None, 1.0):
            raise UsageError("--tail uniform takes no --alpha (it is bounded_power with alpha 1)")
        return tail_models.BoundedPower(1.0 if args.alpha is None else args.alpha)
    if t == "normal":
        return tail_models.Normal(args.mu, args.sigma)
    return tail_models.StretchedExp(args.lam, args.gamma, args.shift)


def _add_sim_flags(p, need_n=True, need_sd=True):
    _add_tail_flags(p)
    p.add_argument("--n", type=_positive_int, required=need_n)
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--p", type=_positive_int)
    grp.add_argument("--p-rule", help="item count as an expression of n, e.g. 0.0005*n^2")
    p.add_argument("--noise-sd", type=_nonneg_float, required=need_sd, default=None if need_sd else 1.0)
    p.add_argument("--reps", type=_positive_int, default=1000)
    p.add_argument("--j0", type=_depth, action="append", help="depth: integer or expression in n and p (repeatable)")
    p.add_argument("--mode", choices=("prefix", "set", "both"), default="prefix")
    p.add_argument("--direction", choices=("ascending", "descending"), default="ascending")
    p.add_argument("--rounding", choices=("floor", "nearest", "ceil"), default="floor")
    p.add_argument("--noise", choices=sim_engine.NOISE_FAMILIES, default="normal")
    p.add_argument("--seed", type=int, required=True)


def _add_common(p):
    p.add_argument("--out", type=Path, help="JSON report path (default: stdout)")
    p.add_argument("--workers", type=_positive_int, help="worker threads; results do not depend on it")


def _config_from_args(args, n=None) -> sim_engine.ExperimentConfig:
    return sim_engine.ExperimentConfig(
        tail=_tail_from_args(args),
        n=args.n if n is None else n,
        p=args.p,
        p_rule=args.p_rule,
        noise_sd=args.noise_sd,
        reps=args.reps,
        j0_list=tuple(args.j0 or (1,)),
        mode=args.mode,
        direction=args.direction,
        seed=args.seed,
        rounding=args.rounding,
        noise=args.noise,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rankvar", description="Variability of rankings under noisy observation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo rank-correctness probabilities")
    _add_sim_flags(p)
    _add_common(p)

    p = sub.add_parser("rates", help="critical depth rates and regime diagnostics")
    p.add_argument("--family", choices=rates.FAMILIES, required=True)
    p.add_argument("--n", type=_positive_float, required=True)
    p.add_argument("--p", type=_positive_float)
    p.add_argument("--alpha", type=_positive_float, required=True)
    p.add_argument("--j0", type=_positive_int)
    _add_common(p)

    p = sub.add_parser("bootstrap", help="bootstrap prediction intervals for ranks")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--format", choices=tuple(PARSERS), required=True)
    p.add_argument("--stat", choices=bootstrap_infer.KINDS, required=True)
    p.add_argument("--B", type=_positive_int, default=1000)
    p.add_argument("--level", type=_probability, default=0.9)
    p.add_argument("--m", type=_positive_int)
    p.add_argument("--direction", choices=("ascending", "descending"), default="ascending")
    p.add_argument("--sort-by", choices=("point", "lower"), default="point", help="row order of the plot table")
    p.add_argument("--exhaustive", action="store_true", help="enumerate every resample (tiny replicate data only)")
    p.add_argument("--seed", type=int, required=True)
    _add_common(p)

    p = sub.add_parser("topset", help="probability that the top-j set is recovered (two-class data)")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--stat", choices=("mann_whitney",), default="mann_whitney")
    p.add_argument("--j", type=_positive_int, action="append", required=True)
    p.add_argument("--B", type=_positive_int, default=1000)
    p.add_argument("--nprime", type=_positive_int, required=True)
    p.add_argument("--direction", choices=("ascending", "descending"), default="descending")
    p.add_argument("--p-subsample", type=_positive_int)
    p.add_argument("--seed", type=int, required=True)
    _add_common(p)

    p = sub.add_parser("calibrate", help="tune the noise sd to hit a target probability")
    _add_sim_flags(p, need_sd=False)
    p.add_argument("--target", type=_probability, required=True)
    p.add_argument("--tol", type=_nonneg_float, default=0.01)
    p.add_argument("--sd-min", type=_nonneg_float, default=0.0)
    p.add_argument("--sd-max", type=_positive_float, default=100.0)
    _add_common(p)

    p = sub.add_parser("required-n", help="smallest n on a grid achieving a target probability")
    _add_sim_flags(p, need_n=False)
    p.add_argument("--target", type=_probability, required=True)
    p.add_argument("--n-grid", type=_int_list, required=True, help="comma-separated increasing n values")
    _add_common(p)

    p = sub.add_parser("tailfit", help="Hill or stretched-exponential tail fit")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--column", default="value")
    p.add_argument("--method", choices=("hill", "stretchedexp"), required=True)
    p.add_argument("--k", type=_positive_int)
    p.add_argument("--shift", type=float, default=0.0)
    _add_common(p)

    p = sub.add_parser("qq", help="QQ pairs of data against a tail model")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--column", default="value")
    _add_tail_flags(p)
    _add_common(p)
    return parser


def _read_column(path: Path, column: str):
    values = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path} is empty", line=1)
        if column not in reader.fieldnames:
            raise DataError(f"{path} has no column {column!r} (see --column)", line=1)
        for row in reader:
            text = (row[column] or "").strip()
            try:
                v = float(text)
            except ValueError:
                raise DataError(f"{path}: value {text!r} is not a number", line=reader.line_num) from None
            if not math.isfinite(v):
                raise DataError(f"{path}: value {text!r} is not finite", line=reader.line_num)
            values.append(v)
    if not values:
        raise DataError(f"{path} has no values", line=2)
    return values


# each handler returns (config, payload, table, plot); tables are (header, rows)


def _cmd_simulate(args, workers):
    cfg = _config_from_args(args)
    report = sim_engine.run_rank_experiment(cfg, workers=workers)
    payload = report.to_dict()
    payload.pop("config")
    table = (
        ["j0_spec", "j0", "mode", "probability", "se", "successes", "reps"],
        [[r.j0_spec, r.j0, r.mode, r.probability, r.se, r.successes, r.reps] for r in report.rows],
    )
    return cfg.to_dict(), payload, table, None


def _cmd_rates(args, workers):
    rep = rates.regime_report(args.family, args.n, args.p, args.alpha, args.j0)
    d = rep.to_dict()
    table = (["quantity", "value"], [["nu", rep.nu], *([k, v] for k, v in rep.diagnostics.items())])
    return {k: getattr(args, k) for k in ("family", "n", "p", "alpha", "j0")}, d, table, None


def _cmd_bootstrap(args, workers):
    ds = PARSERS[args.format](args.input)
    intervals = bootstrap_infer.bootstrap_rank_intervals(
        ds, args.stat, B=args.B, level=args.level, m=args.m, direction=args.direction,
        seed=args.seed, workers=workers, exhaustive=args.exhaustive,
    )
    header = ["item_id", "point_rank", "lower", "upper", "level", "B", "m"]
    table = (header, [[iv.item_id, iv.point_rank, iv.lower, iv.upper, iv.level, iv.B, iv.m] for iv in intervals])
    ordered = bootstrap_infer.sort_intervals(intervals, args.sort_by)
    plot = (["position", "item_id", "point_rank", "lower", "upper"],
            [[i + 1, iv.item_id, iv.point_rank, iv.lower, iv.upper] for i, iv in enumerate(ordered)])
    payload = {"p": ds.p, "intervals": [iv.to_dict() for iv in intervals]}
    if isinstance(ds, bootstrap_infer.Replicates):
        payload["n_ratio"] = ds.n_ratio
    config = {k: getattr(args, k) for k in ("format", "stat", "B", "level", "m", "direction", "seed", "sort_by", "exhaustive")}
    config["input"] = str(args.input)
    return config, payload, table, plot


def _cmd_topset(args, workers):
    ds = PARSERS["twoclass"](args.input)
    probs = bootstrap_infer.top_set_probability(
        ds, args.stat, args.j, B=args.B, n_prime=args.nprime, seed=args.seed,
        direction=args.direction, p_subsample=args.p_subsample, workers=workers,
    )
    table = (["j", "probability", "B", "nprime"], [[j, pr, args.B, args.nprime] for j, pr in probs.items()])
    config = {k: getattr(args, k) for k in ("stat", "j", "B", "nprime", "direction", "p_subsample", "seed")}
    config["input"] = str(args.input)
    return config, {"p": ds.p, "probabilities": probs}, table, None


def _cmd_calibrate(args, workers):
    cfg = _config_from_args(args)
    res = sim_engine.calibrate_noise(cfg, args.target, args.tol, (args.sd_min, args.sd_max), workers=workers)
    config = cfg.to_dict()
    config.pop("noise_sd")
    config.update(target=args.target, tol=args.tol, sd_bounds=[args.sd_min, args.sd_max])
    table = (["iteration", "noise_sd", "probability"], [[i, sd, pr] for i, (sd, pr) in enumerate(res.history)])
    if not res.converged:
        raise CalibrationError(f"no noise sd within tolerance {args.tol} after {res.iterations} iterations; closest {res.noise_sd} gives {res.probability}")
    return config, res.to_dict(), table, None


def _cmd_required_n(args, workers):
    template = _config_from_args(args, n=args.n_grid[0])
    template.validate()
    results = [
        sim_engine.required_n(template, j0, args.target, args.n_grid, mode=args.mode if args.mode != "both" else "prefix", workers=workers)
        for j0 in (args.j0 or [1])
    ]
    table_rows = []
    for res in results:
        for n, pr in res.grid:
            table_rows.append([str(res.j0), n, pr])
    plot = (["j0", "n", "n_quarter_sqrt_log_n"],
            [[str(r.j0), r.n, None if r.n is None else sim_engine.exp_rate_axis(r.n)] for r in results])
    config = template.to_dict()
    config.pop("n")
    config.update(target=args.target, n_grid=args.n_grid)
    return config, {"results": [r.to_dict() for r in results]}, (["j0", "n", "probability"], table_rows), plot


def _cmd_tailfit(args, workers):
    data = _read_column(args.input, args.column)
    config = {"input": str(args.input), "column": args.column, "method": args.method, "k": args.k, "shift": args.shift}
    if args.method == "hill":
        if args.k is None:
            raise UsageError("--k is required for --method hill")
        fit = tail_diagnostics.hill_estimator(data, args.k)
        plot = (["k", "alpha_hat"], [[i + 1, a] for i, a in enumerate(fit.stability)])
        table = (["method", "k", "alpha_hat"], [["hill", fit.k, fit.alpha_hat]])
    else:
        fit = tail_diagnostics.fit_stretched_exp(data, args.shift)
        plot = None
        table = (["method", "lam", "gamma", "shift", "rss"],
                 [["stretched_exp", fit.params["lam"], fit.params["gamma"], fit.params["shift"], fit.diagnostics["rss"]]])
    return config, fit.to_dict(), table, plot


def _cmd_qq(args, workers):
    model = _tail_from_args(args)
    pairs = tail_diagnostics.qq_points(_read_column(args.input, args.column), model)
    config = {"input": str(args.input), "column": args.column, "model": model.to_dict()}
    payload = {"n": len(pairs), "deviation": tail_diagnostics.qq_deviation(pairs)}
    plot = (["empirical", "theoretical"], pairs.tolist())
    return config, payload, None, plot


HANDLERS = {
    "simulate": _cmd_simulate,
    "rates": _cmd_rates,
    "bootstrap": _cmd_bootstrap,
    "topset": _cmd_topset,
    "calibrate": _cmd_calibrate,
    "required-n": _cmd_required_n,
    "tailfit": _cmd_tailfit,
    "qq": _cmd_qq,
}


def _emit(args, argv, config, payload, table, plot, started, wall, workers):
    bundle = {
        "command": args.command,
        "version": __version__,
        "config": config,
        "payload": payload,
        "metadata": {"argv": list(argv), "started_utc": started, "wall_clock_seconds": wall, "workers": workers},
    }
    text = dumps_report(bundle)
    if args.out is None:
        sys.stdout.write(text)
        return
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(text, encoding="utf-8")
    if table is not None:
        write_table(sibling(args.out, ".table.csv"), *table)
    if plot is not None:
        write_table(sibling(args.out, ".plot.csv"), *plot)


def cli_dispatch(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        workers = resolve_workers(args.workers)
    except ValueError as exc:
        print(f"rankvar: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    try:
        config, payload, table, plot = HANDLERS[args.command](args, workers)
        _emit(args, argv, config, payload, table, plot, started, time.perf_counter() - t0, workers)
    except (UsageError, ConfigError) as exc:
        print(f"rankvar {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FitError, DomainError) as exc:
        print(f"rankvar {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ResourceError, CalibrationError) as exc:
        print(f"rankvar {args.command}: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except OSError as exc:
        print(f"rankvar {args.command}: cannot access {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main():
    sys.exit(cli_dispatch())


if __name__ == "__main__":
    main()
