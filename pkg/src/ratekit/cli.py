"""Command-line entry point: precompute, synthesize, simulate, bench, battery."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .config import ConfigError, load_config
from .energy import Battery, EnergyBudget, battery_discharge
from .search import synthesize
from .sim import MatchFixedBudget, classify, simulate
from .tables import (build_cost_table, build_power_table, build_profit_tables,
                     design_all, load_tables, save_tables, totals_over_window)


def _parse_pattern(text: str):
    try:
        parts = tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"pattern: {exc}") from exc
    if abs(sum(parts) - 1.0) > 1e-9:
        raise ConfigError(f"pattern: fractions must sum to 1, got {sum(parts)}")
    return parts


def _parse_capacity(text: str) -> float:
    text = text.strip().lower()
    if text.endswith("mah"):
        text = text[:-3]
    return float(text)


def cmd_precompute(args) -> int:
    cfg = load_config(args.config)
    controllers = design_all(cfg.plant, cfg.rates)
    ct = build_cost_table(cfg.plant, cfg.rates, cfg.levels, controllers=controllers)
    pt = build_power_table(cfg.rates, cfg.peak_power_mw)
    totals = totals_over_window(ct, pt, cfg.pattern, cfg.hyper_period_s)
    profit = build_profit_tables(totals)
    meta = {
        "plant_sha256": cfg.plant_sha256,
        "config_sha256": cfg.config_sha256,
        "ratekit_version": __version__,
        "thresholds": list(cfg.levels.thresholds),
        "representative_r": list(cfg.levels.representative_r),
        "peak_power_mw": cfg.peak_power_mw,
        "pattern": list(cfg.pattern),
        "window_s": cfg.hyper_period_s,
    }
    save_tables(args.out, ct, pt, profit, meta)
    print(f"wrote tables for {len(cfg.rates)} rates x {cfg.levels.k} levels to {args.out}")
    return 0


def cmd_synthesize(args) -> int:
    ct, pt, meta = load_tables(args.tables)
    pattern = _parse_pattern(args.pattern)
    totals = totals_over_window(ct, pt, pattern, args.budget_window)
    budget = EnergyBudget(e_max=args.budget_energy, window=args.budget_window)
    backend = args.backend if args.backend != "auto" else None
    result = synthesize(args.algo, totals, budget, backend=backend)
    doc = {
        "algo": result.algo,
        "controller": {
            "indices": list(result.controller.choice),
            "periods_ms": [ct.rates.periods_ms[i] for i in result.controller.choice],
        },
        "predicted_cost": result.predicted_cost,
        "predicted_energy": result.predicted_energy,
        "explored": result.explored,
        "elapsed": result.elapsed,
        "feasible": result.feasible,
    }
    text = json.dumps(doc, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    if args.strict and not result.feasible:
        print("synthesis infeasible under the given budget", file=sys.stderr)
        return 2
    return 0


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if cfg.scenario is None:
        raise ConfigError("scenario: required for simulate")
    if cfg.budget is None and cfg.strategy.kind == "adaptive":
        raise ConfigError("budget: required for adaptive simulation")
    controllers = design_all(cfg.plant, cfg.rates)
    ct = build_cost_table(cfg.plant, cfg.rates, cfg.levels, controllers=controllers)
    pt = build_power_table(cfg.rates, cfg.peak_power_mw)
    budget = cfg.budget or EnergyBudget(e_max=1e18, window=cfg.hyper_period_s)
    seed = args.seed if args.seed is not None else cfg.seed
    backend = args.backend if args.backend != "auto" else None
    trace = simulate(cfg.plant, ct, pt, cfg.levels, cfg.scenario, budget,
                     cfg.strategy, lam=cfg.rve_lambda, seed=seed,
                     backend=backend, controllers=controllers)
    if args.out:
        trace.write_jsonl(args.out)
        print(f"wrote {len(trace.events)} events to {args.out}")
    else:
        sys.stdout.write(trace.jsonl())
    if args.emit_plotdata:
        out_dir = Path(args.emit_plotdata)
        out_dir.mkdir(parents=True, exist_ok=True)
        level0 = cfg.battery_capacity_mah * cfg.battery_voltage * 3.6
        with open(out_dir / "plot_cost.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_s", "cost_integral"])
            for ev in trace.events:
                if ev["type"] == "sample":
                    w.writerow([repr(ev["t"]), repr(ev["cost_integral"])])
        with open(out_dir / "plot_battery.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_s", "battery_j"])
            for ev in trace.events:
                if ev["type"] == "sample":
                    w.writerow([repr(ev["t"]), repr(level0 - ev["energy_j"])])
        print(f"wrote plot data to {out_dir}")
    print(f"duration {trace.total_time:.1f} s, energy {trace.total_energy:.3f} J, "
          f"avg power {trace.avg_power_mw():.2f} mW", file=sys.stderr)
    return 0


def cmd_bench(args) -> int:
    from .bench import format_report, load_cases, run_bench, write_report

    cases = load_cases(args.cases)
    if args.compare_backends:
        backends = ["numba", "numpy"] if _kernels.HAS_NUMBA else ["numpy"]
        if not _kernels.HAS_NUMBA:
            print("numba unavailable; comparing numpy only", file=sys.stderr)
    else:
        backends = ["auto"]
    rows = run_bench(cases, backends=tuple(backends), cap=args.cap)
    print(format_report(rows))
    if args.out:
        write_report(rows, args.out)
        print(f"wrote report to {args.out}")
    return 0


def cmd_battery(args) -> int:
    ct, pt, meta = load_tables(args.tables)
    window = float(meta.get("window_s", 100.0))
    thresholds = meta.get("thresholds")
    doc = json.loads(Path(args.pattern).read_text()) if Path(args.pattern).exists() else None
    if doc is None:
        raise ConfigError(f"pattern: file not found: {args.pattern}")
    if "shares" in doc:
        fractions = tuple(float(f) for f in doc["shares"])
    elif "segments" in doc and thresholds:
        from .tables import LevelSpec
        rep = meta.get("representative_r")
        levels = LevelSpec(thresholds=tuple(thresholds), representative_r=tuple(rep))
        acc = np.zeros(levels.k)
        for d, r in doc["segments"]:
            acc[classify(float(r), levels) - 1] += float(d)
        fractions = tuple(float(v / acc.sum()) for v in acc)
    else:
        raise ConfigError("pattern: expected 'shares', or 'segments' with table metadata")
    totals = totals_over_window(ct, pt, fractions, window)
    iref = ct.rates.index_of(args.fixed_ms / 1000.0)
    if args.budget_energy is not None:
        budget = EnergyBudget(e_max=args.budget_energy, window=window)
    else:
        budget = MatchFixedBudget(reference_h=args.fixed_ms / 1000.0,
                                  window=window).budget_for(totals)
    result = synthesize(args.algo, totals, budget)
    fixed_energy = float(totals.ec_total[iref])
    fixed_power = 1000.0 * fixed_energy / window
    multi_power = 1000.0 * result.predicted_energy / window
    battery = Battery(capacity_mah=_parse_capacity(args.capacity), voltage=args.voltage)
    horizon = args.horizon if args.horizon else battery.full_j / (fixed_power * 1e-3)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, power in (("fixed", fixed_power), ("multirate", multi_power)):
        times, levels_j, depletion = battery_discharge(battery, power, horizon)
        with open(out_dir / f"battery_{name}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_s", "level_j"])
            for t, lv in zip(times, levels_j):
                w.writerow([repr(float(t)), repr(float(lv))])
        print(f"{name:<10} avg power {power:8.3f} mW, depletion {depletion:12.0f} s")
    if fixed_power > 0:
        print(f"power reduction {(1 - multi_power / fixed_power) * 100.0:.2f} % "
              f"(battery life x{fixed_power / multi_power:.3f})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ratekit",
        description="Energy-budgeted multi-rate LQG controller synthesis toolkit")
    parser.add_argument("--version", action="version",
                        version=f"ratekit {__version__} "
                                f"(kernels: {_kernels.DEFAULT_BACKEND})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("precompute", help="build and persist the off-line tables")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_precompute)

    p = sub.add_parser("synthesize", help="pick a multi-rate controller from tables")
    p.add_argument("--tables", required=True)
    p.add_argument("--pattern", required=True, help="comma-separated level fractions")
    p.add_argument("--budget-energy", type=float, required=True, help="joules per window")
    p.add_argument("--budget-window", type=float, required=True, help="window seconds")
    p.add_argument("--algo", default="approach1",
                   choices=["exhaustive", "approach1", "approach2"])
    p.add_argument("--backend", default="auto", choices=["auto", "numba", "numpy"])
    p.add_argument("--strict", action="store_true",
                   help="exit 2 when no candidate fits the budget")
    p.add_argument("--out")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("simulate", help="run the on-line regulation loop")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out")
    p.add_argument("--emit-plotdata", metavar="DIR")
    p.add_argument("--backend", default="auto", choices=["auto", "numba", "numpy"])
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="time the three algorithms across cases")
    p.add_argument("--cases", required=True)
    p.add_argument("--out")
    p.add_argument("--cap", type=int, default=10**8,
                   help="skip full scans when n^k exceeds this")
    p.add_argument("--compare-backends", action="store_true",
                   help="time the jit kernels against the pure-numpy path")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("battery", help="battery discharge comparison")
    p.add_argument("--tables", required=True)
    p.add_argument("--pattern", required=True, help="scenario/pattern JSON file")
    p.add_argument("--capacity", required=True, help="e.g. 1000mAh")
    p.add_argument("--voltage", type=float, required=True)
    p.add_argument("--fixed-ms", type=float, default=50.0)
    p.add_argument("--budget-energy", type=float, default=None,
                   help="joules per window; default matches the fixed rate's cost")
    p.add_argument("--algo", default="approach1",
                   choices=["exhaustive", "approach1", "approach2"])
    p.add_argument("--horizon", type=float, default=None, help="trace horizon seconds")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_battery)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; --help/--version exit 0
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
