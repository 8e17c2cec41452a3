# cli.py
# Command-line front door: run, compare, sweep, costs, plot.
#
#   python cli.py run --scenario scenarios/default.json --out-dir out/run
#   python cli.py compare --replications 100 --out-dir out/compare
#   python cli.py sweep --parameter rel_speed --grid 10,20,40,80,120
#   python cli.py costs --event-log out/run/events.csv --gas-price-gwei 1.897
#   python cli.py plot --kind success_sweep --table out/sweep/sweep.csv

import argparse
import json
import logging
import sys
from pathlib import Path

import pandas as pd

from allowance_module.replay import vehicle_report
from analysis_module.latency import SWEEP_PARAMETERS, sweep
from config import DEFAULT_OUT_DIR, DEFAULT_SCENARIO_PATH, setup_logging
from ledger_module.chain_export import export_chain
from mobility_module.kinematics import latency_bound_table
from reporting_module.costs import EVENT_CONTRACTS, TX_CONTRACTS, count_contract_calls, estimate_costs
from reporting_module.exports import write_csv, write_json, write_manifest
from reporting_module.plots import PLOT_KINDS, emit_plots
from scenario_module.scenario import dump_scenario, load_scenario, with_overrides
from simulation_module.compare import compare, replicate_compare
from simulation_module.engine import run
from utilities_module.errors import BetsError, PlotError, SweepError

logger = logging.getLogger("cli")

# Every subcommand leaves the exact scenario next to its manifest
SCENARIO_COPY = "scenario.json"


def _scenario(args):
    cfg = load_scenario(args.scenario)
    if args.seed is not None:
        cfg = with_overrides(cfg, rng_seed=args.seed)
    return cfg


def cmd_run(args, out_dir: Path):
    cfg = _scenario(args)
    result = run(cfg, record_trajectories=args.trajectories)
    files = [
        write_json(result.summary.to_dict(), out_dir / "summary.json"),
        write_csv(result.event_log(), out_dir / "events.csv"),
        write_csv(vehicle_report(result.ledger.transactions()), out_dir / "vehicle_report.csv"),
    ]
    for name, table in result.tables.items():
        files.append(write_csv(table, out_dir / f"{name}.csv"))

    calls = count_contract_calls((tx.kind.value for tx in result.ledger.transactions()), TX_CONTRACTS)
    files.append(write_csv(estimate_costs(cfg.gas_price_gwei, cfg.usd_per_gwei, call_counts=calls), out_dir / "costs.csv"))

    if args.export_chain:
        chain_dir = Path(args.export_chain)
        export_chain(result.ledger, chain_dir)
        if chain_dir.resolve().is_relative_to(out_dir.resolve()):
            files.append(chain_dir)
    return files, cfg


def cmd_compare(args, out_dir: Path):
    cfg = _scenario(args)
    if args.replications > 1:
        seeds = [cfg.rng_seed + k for k in range(args.replications)]
        table, wins = replicate_compare(cfg, seeds)
        files = [
            write_csv(table, out_dir / "replications.csv"),
            write_json({"replications": len(seeds), "dlt_lower_count": wins}, out_dir / "replications.json"),
        ]
        return files, cfg

    report = compare(cfg)
    files = [
        write_json(report.to_dict(), out_dir / "comparison.json"),
        write_csv(report.table(), out_dir / "comparison.csv"),
        write_csv(report.emission_series(), out_dir / "emission_series.csv"),
    ]
    return files, cfg


def _parse_grid(text: str) -> list:
    try:
        grid = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise SweepError(f"grid must be comma-separated numbers, got '{text}'") from e
    return [int(v) if v.is_integer() else v for v in grid]


def cmd_sweep(args, out_dir: Path):
    cfg = _scenario(args)
    grid = _parse_grid(args.grid)
    table = sweep(args.parameter, grid, cfg, n_trials=args.trials)
    files = [write_csv(table, out_dir / "sweep.csv")]
    if args.parameter == "rel_speed":
        files.append(write_csv(latency_bound_table([cfg.comm_range_r], grid), out_dir / "latency_bound.csv"))
    return files, cfg


def cmd_costs(args, out_dir: Path):
    cfg = _scenario(args)
    gas_price = args.gas_price_gwei if args.gas_price_gwei is not None else cfg.gas_price_gwei
    usd_per_gwei = 1.0 / args.gwei_per_usd if args.gwei_per_usd is not None else cfg.usd_per_gwei

    calls = None
    if args.event_log:
        events = pd.read_csv(args.event_log)
        calls = count_contract_calls(events["kind"], EVENT_CONTRACTS)
    report = estimate_costs(gas_price, usd_per_gwei, call_counts=calls)
    totals = {
        "gas_price_gwei": gas_price,
        "usd_per_gwei": usd_per_gwei,
        "total_ether": float(report["total_ether"].sum()),
        "total_usd": float(report["total_usd"].sum()),
    }
    return [write_csv(report, out_dir / "costs.csv"), write_json(totals, out_dir / "costs.json")], cfg


def cmd_plot(args, out_dir: Path):
    cfg = _scenario(args)
    if args.table is None:
        if args.kind != "latency_bound":
            raise PlotError(f"{args.kind}: --table is required")
        table = latency_bound_table(_parse_grid(args.ranges), _parse_grid(args.speeds))
        return emit_plots(table, args.kind, out_dir), cfg
    try:
        table = pd.read_csv(args.table)
    except (pd.errors.EmptyDataError, FileNotFoundError) as e:
        raise PlotError(f"cannot read table {args.table}: {e}") from e
    return emit_plots(table, args.kind, out_dir), cfg


# Arguments that locate things rather than define the run
_LOCAL_ARGS = {"handler", "command", "out_dir", "log_level", "scenario", "seed"}


def run_arguments(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _LOCAL_ARGS}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bets-sim", description="Vehicle emissions cap-and-trade simulator")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", default=DEFAULT_SCENARIO_PATH, help="scenario JSON file")
    common.add_argument("--seed", type=int, default=None, help="override the scenario rng_seed")
    common.add_argument("--out-dir", default=DEFAULT_OUT_DIR, help="directory for every output file")
    common.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING, ...")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run one scenario")
    p.add_argument("--export-chain", metavar="DIR", default=None, help="write the chain export to DIR")
    p.add_argument("--trajectories", action="store_true", help="also write trajectories.csv")
    p.set_defaults(handler=cmd_run)

    p = sub.add_parser("compare", parents=[common], help="baseline vs dlt-controlled on the same seed")
    p.add_argument("--replications", type=int, default=1, help="number of consecutive seeds")
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("sweep", parents=[common], help="trade success probability over a parameter grid")
    p.add_argument("--parameter", required=True, choices=sorted(SWEEP_PARAMETERS))
    p.add_argument("--grid", required=True, help="comma-separated values (rel_speed in km/h)")
    p.add_argument("--trials", type=int, default=None)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("costs", parents=[common], help="smart-contract execution costs")
    p.add_argument("--event-log", default=None, help="events.csv from a run")
    p.add_argument("--gas-price-gwei", type=float, default=None)
    p.add_argument("--gwei-per-usd", type=float, default=None)
    p.set_defaults(handler=cmd_costs)

    p = sub.add_parser("plot", parents=[common], help="render a figure from a table")
    p.add_argument("--kind", required=True, choices=list(PLOT_KINDS))
    p.add_argument("--table", default=None, help="CSV input; optional for latency_bound")
    p.add_argument("--ranges", default="100,200,300", help="latency_bound without --table: comm ranges in m")
    p.add_argument("--speeds", default="10,20,40,60,80,100,120,140", help="latency_bound without --table: km/h")
    p.set_defaults(handler=cmd_plot)
    return parser


def error_record(e: BetsError) -> dict:
    record = {"type": "error", "error": type(e).__name__, "content": str(e)}
    for attr in ("rule", "tick", "stage"):
        if hasattr(e, attr):
            record[attr] = getattr(e, attr)
    return record


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    try:
        files, cfg = args.handler(args, out_dir)
        files.append(write_json(dump_scenario(cfg), out_dir / SCENARIO_COPY))
        write_manifest(out_dir, args.command, cfg, files, extra={"arguments": run_arguments(args)})
    except BetsError as e:
        logger.error("❌ %s failed: %s", args.command, e)
        record = error_record(e)
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        write_json(record, out_dir / "error.json")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
