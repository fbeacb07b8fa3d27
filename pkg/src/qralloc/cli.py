"""Batch command-line front end.

Four subcommands: ``backtest`` runs every (strategy x window-size) pair of
the configuration over a CSV panel, ``simulate`` runs the Monte Carlo
strategy comparison, ``tune-lambda`` resolves the pivotal penalty per
quantile level, ``report`` turns a result directory into plot-ready data
files. A JSON config file drives everything; a few flags override it.

Exit codes: 0 success, 2 config error, 3 data error, 4 solver error.
"""
from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from ._io import read_csv, read_json, write_csv, write_json
from .allocation import StrategySpec, deviation_design, select_numeraire
from .backtest import (
    decomposition_stats,
    make_windows,
    run_backtest,
    split_subperiods,
    write_backtest_files,
)
from .errors import ConfigError, DataError, EngineError, SolverError
from .indicators import REPORT_FIELDS, compute_report, empirical_quantile, wealth_path
from .panel import load_returns
from .simulation import (
    DistributionSpec,
    MonteCarloSpec,
    estimate_moments,
    random_moments,
    run_monte_carlo,
)
from .tuning import LambdaRule, optimal_lambda, simulate_pivot

log = logging.getLogger("qralloc")

SUMMARY_COLUMNS = (
    "strategy", "ws", "std", "mad", "var10", "alpha_risk10",
    "psi1_90", "psi2_90", "mean", "sharpe", "final_wealth", "turnover",
)


@dataclass
class RunConfig:
    input: str | None = None
    input_format: str = "returns-csv"
    strategies: list = field(default_factory=list)
    ws: list = field(default_factory=lambda: [500, 1000])
    alpha: float = 0.1
    psi: float = 0.9
    split_date: dt.date | None = None
    out: str = "results"
    seed: int = 0
    theta: list = field(default_factory=lambda: [0.1, 0.5, 0.9])
    n_sims: int = 100_000
    confidence: float = 0.9
    simulation: dict = field(default_factory=dict)

    def validate(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha: {self.alpha} outside (0, 1)")
        if not 0.0 < self.psi < 1.0:
            raise ConfigError(f"psi: {self.psi} outside (0, 1)")
        for w in self.ws:
            if int(w) < 2:
                raise ConfigError(f"ws: {w} must be >= 2")


def _parse_lambda_rule(obj, seed: int) -> LambdaRule:
    if obj is None:
        return LambdaRule(rng_seed=seed)
    if isinstance(obj, (int, float)):
        return LambdaRule(method="fixed", fixed_value=float(obj))
    kwargs = {
        "method": obj.get("method", "pivotal-simulation"),
        "n_sims": int(obj.get("n_sims", 100_000)),
        "confidence": float(obj.get("confidence", 0.9)),
        "recompute_per_window": bool(obj.get("recompute_per_window", False)),
        "rng_seed": int(obj.get("seed", seed)),
    }
    if "value" in obj:
        kwargs["fixed_value"] = float(obj["value"])
    if "target_active" in obj:
        kwargs["target_active"] = int(obj["target_active"])
    if "theta_set" in obj:
        kwargs["theta_set"] = tuple(float(t) for t in obj["theta_set"])
    return LambdaRule(**kwargs)


def _parse_strategy(obj, cfg: RunConfig, pos: int) -> StrategySpec:
    if not isinstance(obj, dict) or "estimator" not in obj:
        raise ConfigError(f"strategies[{pos}]: need an object with an 'estimator'")
    est = str(obj["estimator"]).upper()
    kwargs = {"estimator": est}
    if "theta" in obj:
        kwargs["theta"] = float(obj["theta"])
    if est in ("LASSO", "PQR"):
        kwargs["lambda_rule"] = _parse_lambda_rule(obj.get("lambda"), cfg.seed)
    if "numeraire_rule" in obj:
        kwargs["numeraire_rule"] = obj["numeraire_rule"]
    if "numeraire_asset" in obj:
        kwargs["numeraire_asset"] = obj["numeraire_asset"]
    kwargs["psi_level"] = float(obj.get("psi_level", cfg.psi))
    if "threshold" in obj:
        kwargs["threshold"] = float(obj["threshold"])
    try:
        return StrategySpec(**kwargs)
    except ConfigError as err:
        raise ConfigError(f"strategies[{pos}].{err}") from err


def load_config(args) -> RunConfig:
    cfg = RunConfig()
    raw = {}
    if args.config:
        try:
            raw = read_json(args.config)
        except OSError as err:
            raise ConfigError(f"config: cannot read {args.config}: {err}") from err
        except json.JSONDecodeError as err:
            raise ConfigError(f"config: invalid JSON: {err}") from err
    for key in ("input", "input_format", "out"):
        if key in raw:
            setattr(cfg, key, raw[key])
    if "seed" in raw:
        cfg.seed = int(raw["seed"])
    if "ws" in raw:
        cfg.ws = [int(w) for w in (raw["ws"] if isinstance(raw["ws"], list) else [raw["ws"]])]
    for key in ("alpha", "psi", "confidence"):
        if key in raw:
            setattr(cfg, key, float(raw[key]))
    if "n_sims" in raw:
        cfg.n_sims = int(raw["n_sims"])
    if "theta" in raw:
        cfg.theta = [float(t) for t in (raw["theta"] if isinstance(raw["theta"], list) else [raw["theta"]])]
    if "split_date" in raw:
        cfg.split_date = _parse_date(raw["split_date"])
    if "simulation" in raw:
        cfg.simulation = dict(raw["simulation"])

    # flag overrides
    if getattr(args, "input", None):
        cfg.input = args.input
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "ws", None):
        cfg.ws = [int(w) for w in args.ws.split(",")]
    if getattr(args, "theta", None):
        cfg.theta = [float(t) for t in args.theta.split(",")]
    if getattr(args, "out", None):
        cfg.out = args.out
    if getattr(args, "split_date", None):
        cfg.split_date = _parse_date(args.split_date)

    strategies = raw.get("strategies")
    if strategies is not None:
        if not isinstance(strategies, list) or not strategies:
            raise ConfigError("strategies: need a nonempty list")
        cfg.strategies = [_parse_strategy(s, cfg, i) for i, s in enumerate(strategies)]
    else:
        cfg.strategies = [StrategySpec("OLS")] + [
            StrategySpec("QR", theta=t) for t in cfg.theta
        ]
    if getattr(args, "theta", None) and strategies is not None:
        cfg.strategies = [_retheta(s, cfg.theta[0]) for s in cfg.strategies]
    if getattr(args, "lam", None) is not None:
        cfg.strategies = [_refix_lambda(s, args.lam) for s in cfg.strategies]
    cfg.validate()
    return cfg


def _retheta(spec: StrategySpec, theta: float) -> StrategySpec:
    from dataclasses import replace

    if spec.theta is None:
        return spec
    return replace(spec, theta=theta)


def _refix_lambda(spec: StrategySpec, lam: float) -> StrategySpec:
    from dataclasses import replace

    if not spec.penalized:
        return spec
    return replace(spec, lambda_rule=LambdaRule(method="fixed", fixed_value=lam))


def _parse_date(text) -> dt.date:
    try:
        return dt.date.fromisoformat(str(text))
    except ValueError as err:
        raise ConfigError(f"split_date: bad date '{text}'") from err


def _slug(spec: StrategySpec) -> str:
    return spec.label.replace("(", "_").replace(")", "").replace(".", "p")


def _require_input(cfg: RunConfig):
    if not cfg.input:
        raise ConfigError("input: no input file given (flag --input or config)")
    return load_returns(cfg.input, cfg.input_format)


def cmd_backtest(cfg: RunConfig) -> int:
    panel = _require_input(cfg)
    if not cfg.strategies:
        raise ConfigError("strategies: need at least one")
    outdir = Path(cfg.out)
    summary = {"config": {"input": cfg.input, "ws": cfg.ws, "alpha": cfg.alpha,
                          "psi": cfg.psi, "seed": cfg.seed}, "runs": []}
    rows = []
    for spec in cfg.strategies:
        for ws in cfg.ws:
            plan = make_windows(panel.n_periods, ws)
            log.info("backtest strategy=%s ws=%d windows=%d", spec.label, ws, plan.n_windows)
            result = run_backtest(spec, panel, plan, alpha=cfg.alpha, psi=cfg.psi)
            rundir = outdir / f"{_slug(spec)}_ws{ws}"
            write_backtest_files(result, rundir)
            report = compute_report(result.oos_returns, cfg.alpha, cfg.psi,
                                    weights=result.weight_path.values)
            dstats = decomposition_stats(result)
            entry = {
                "strategy": spec.label,
                "ws": ws,
                "directory": rundir.name,
                "lambda": result.resolved_lambda,
                "mean_active": float(result.active_path.mean()),
                "mean_short": float(result.short_path.mean()),
                "oos": report.as_dict(),
                "decomposition": {
                    "intercept_mean": dstats.intercept_mean,
                    "intercept_std": dstats.intercept_std,
                    "residual_mean": dstats.residual_mean,
                    "residual_std": dstats.residual_std,
                },
            }
            if cfg.split_date is not None:
                first, second = split_subperiods(result, cfg.split_date)
                entry["subperiods"] = {
                    "split_date": cfg.split_date.isoformat(),
                    "first": first.as_dict(),
                    "second": second.as_dict(),
                }
            summary["runs"].append(entry)
            d = report.as_dict()
            rows.append([spec.label, ws] + [d[c] for c in SUMMARY_COLUMNS[2:]])
    write_json(outdir / "summary.json", summary)
    write_csv(outdir / "summary.csv", SUMMARY_COLUMNS, rows)
    _print_table(SUMMARY_COLUMNS, rows)
    return 0


def _print_table(columns, rows):
    def fmt_cell(v):
        return f"{v:.4f}" if isinstance(v, float) else str(v)

    text_rows = [[fmt_cell(v) for v in row] for row in rows]
    widths = [max(len(c), *(len(r[i]) for r in text_rows)) if text_rows else len(c)
              for i, c in enumerate(columns)]
    print("  ".join(c.ljust(w) for c, w in zip(columns, widths)))
    for row in text_rows:
        print("  ".join(v.rjust(w) for v, w in zip(row, widths)))


def _distribution_from_config(cfg: RunConfig) -> DistributionSpec:
    sim = cfg.simulation
    n = int(sim.get("n_assets", 10))
    if "mean" in sim and "covariance" in sim:
        mean = np.asarray(sim["mean"], dtype=float)
        cov = np.asarray(sim["covariance"], dtype=float)
    elif cfg.input:
        est = estimate_moments(load_returns(cfg.input, cfg.input_format))
        mean, cov = est.mean, est.covariance
    else:
        mean, cov = random_moments(n, rng_seed=cfg.seed)
    return DistributionSpec(
        family=sim.get("family", "normal"),
        mean=mean,
        covariance=cov,
        df=float(sim.get("df", 5.0)),
        skew_target=float(sim.get("skew_target", 0.02)),
    )


def cmd_simulate(cfg: RunConfig) -> int:
    dist = _distribution_from_config(cfg)
    sim = cfg.simulation
    mc = MonteCarloSpec(
        distribution=dist,
        n_samples=int(sim.get("n_samples", 100)),
        n_periods=int(sim.get("n_periods", 300)),
        strategies=tuple(cfg.strategies),
        alpha=cfg.alpha,
        psi=cfg.psi,
        rng_seed=cfg.seed,
    )
    log.info("simulate family=%s n=%d samples=%d periods=%d",
             dist.family, dist.n_assets, mc.n_samples, mc.n_periods)
    result = run_monte_carlo(mc)
    outdir = Path(cfg.out)
    rows = []
    for s, label in enumerate(result.strategies):
        for i, ind in enumerate(result.indicators):
            for r in range(mc.n_samples):
                rows.append([r, label, ind, result.values[s, i, r]])
    write_csv(outdir / "distributions.csv",
              ["replication", "strategy", "indicator", "value"], rows)
    med = result.medians()
    write_csv(outdir / "medians.csv",
              ["strategy", *result.indicators],
              ([label, *med[s]] for s, label in enumerate(result.strategies)))
    write_json(outdir / "simulate_summary.json", {
        "family": dist.family,
        "n_assets": dist.n_assets,
        "n_samples": mc.n_samples,
        "n_periods": mc.n_periods,
        "seed": cfg.seed,
        "failures": [list(f) for f in result.failures],
    })
    _print_table(["strategy", *result.indicators],
                 [[label, *med[s]] for s, label in enumerate(result.strategies)])
    return 0


def cmd_tune_lambda(cfg: RunConfig) -> int:
    panel = _require_input(cfg)
    k = select_numeraire(panel.values, cfg.psi)
    _, covariates = deviation_design(panel.values, k)
    records = []
    for theta in cfg.theta:
        samples = simulate_pivot(covariates, (theta,), cfg.n_sims, cfg.seed)
        choice = optimal_lambda(samples, theta, panel.n_periods, cfg.confidence)
        records.append({
            "theta": theta,
            "tau": choice.tau,
            "lambda_star": choice.lambda_star,
            "n_sims": cfg.n_sims,
            "seed": cfg.seed,
        })
        print(f"theta={theta:g} tau={choice.tau!r} lambda_star={choice.lambda_star!r}")
    write_json(Path(cfg.out) / "lambda_star.json", records)
    return 0


def _boxplot_rows(values_by_key):
    rows = []
    for key, values in values_by_key.items():
        v = np.asarray([x for x in values if np.isfinite(x)], dtype=float)
        if v.size == 0:
            continue
        rows.append(list(key) + [
            float(v.min()),
            empirical_quantile(v, 0.25),
            empirical_quantile(v, 0.5),
            empirical_quantile(v, 0.75),
            float(v.max()),
        ])
    return rows


def cmd_report(result_dir, out=None) -> int:
    indir = Path(result_dir)
    if not indir.is_dir():
        raise DataError(f"result directory not found: {indir}")
    outdir = Path(out) if out else indir / "report"
    wrote = []

    summary_path = indir / "summary.json"
    if summary_path.exists():
        summary = read_json(summary_path)
        box = {}
        wealth_rows = []
        turn_rows = []
        for entry in summary["runs"]:
            rundir = indir / entry["directory"]
            dist_header, dist_rows = read_csv(rundir / "insample_distributions.csv")
            for ind in REPORT_FIELDS:
                col = dist_header.index(ind)
                box[(entry["strategy"], entry["ws"], ind)] = [
                    float(r[col]) for r in dist_rows
                ]
            _, oos_rows = read_csv(rundir / "oos_returns.csv")
            wealth = wealth_path(np.array([float(r[1]) for r in oos_rows]))
            # initial wealth sits at the first formation date, then one row per day
            dates = [dist_rows[0][0]] + [r[0] for r in oos_rows]
            for d, w in zip(dates, wealth):
                wealth_rows.append([entry["strategy"], entry["ws"], d, w])
            turn_rows.append([entry["strategy"], entry["ws"], entry["oos"]["turnover"]])
        write_csv(outdir / "boxplot_insample.csv",
                  ["strategy", "ws", "indicator", "min", "q1", "median", "q3", "max"],
                  _boxplot_rows(box))
        write_csv(outdir / "wealth_paths.csv",
                  ["strategy", "ws", "date", "wealth"], wealth_rows)
        write_csv(outdir / "turnover_bars.csv",
                  ["strategy", "ws", "turnover"], turn_rows)
        wrote += ["boxplot_insample.csv", "wealth_paths.csv", "turnover_bars.csv"]

    dist_path = indir / "distributions.csv"
    if dist_path.exists():
        header, rows = read_csv(dist_path)
        box = {}
        for rep, strategy, indicator, value in rows:
            box.setdefault((strategy, indicator), []).append(float(value))
        write_csv(outdir / "boxplot_simulation.csv",
                  ["strategy", "indicator", "min", "q1", "median", "q3", "max"],
                  _boxplot_rows(box))
        wrote.append("boxplot_simulation.csv")

    if not wrote:
        raise DataError(f"nothing to report in {indir}: no summary.json or distributions.csv")
    for name in wrote:
        print(f"wrote {outdir / name}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qralloc",
        description="Rolling portfolio allocation from quantile and least-squares regressions",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--input", help="input CSV panel")
        p.add_argument("--ws", help="comma-separated window sizes")
        p.add_argument("--theta", help="comma-separated quantile levels")
        p.add_argument("--lambda", dest="lam", type=float,
                       help="fixed penalty weight override")
        p.add_argument("--seed", type=int, help="random seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--split-date", dest="split_date",
                       help="sub-period split date (ISO)")

    add_common(sub.add_parser("backtest", help="rolling backtest over a CSV panel"))
    add_common(sub.add_parser("simulate", help="Monte Carlo strategy comparison"))
    add_common(sub.add_parser("tune-lambda", help="pivotal penalty per quantile level"))
    rep = sub.add_parser("report", help="plot-data files from a result directory")
    rep.add_argument("result_dir")
    rep.add_argument("--out", help="report output directory")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            return cmd_report(args.result_dir, args.out)
        cfg = load_config(args)
        if args.command == "backtest":
            return cmd_backtest(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        return cmd_tune_lambda(cfg)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except DataError as err:
        print(f"data error: {err}", file=sys.stderr)
        return 3
    except SolverError as err:
        print(f"solver error: {err}", file=sys.stderr)
        return 4
    except EngineError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
