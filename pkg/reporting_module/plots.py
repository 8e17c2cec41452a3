# reporting_module/plots.py
# PNG figures from the tables written by sweep, compare and latency-bound runs.

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from utilities_module.errors import PlotError  # noqa: E402

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = {
    "latency_bound": {"comm_range_m", "rel_speed_kmh", "bound_s"},
    "emissions_compare": {"arm", "t", "cumulative_co2_g", "cumulative_nox_g"},
    "success_sweep": {"parameter", "value", "success_estimate", "ci_low", "ci_high"},
}
PLOT_KINDS = tuple(REQUIRED_COLUMNS)


def _validate(table: pd.DataFrame, kind: str) -> None:
    if kind not in REQUIRED_COLUMNS:
        raise PlotError(f"unknown plot kind '{kind}'; choose from {list(PLOT_KINDS)}")
    if table is None or table.empty:
        raise PlotError(f"{kind}: input table is empty")
    missing = REQUIRED_COLUMNS[kind] - set(table.columns)
    if missing:
        raise PlotError(f"{kind}: table is missing columns {sorted(missing)}")


def _latency_bound(table: pd.DataFrame, ax) -> None:
    for r, group in table.groupby("comm_range_m", sort=True):
        group = group.sort_values("rel_speed_kmh")
        ax.plot(group["rel_speed_kmh"], group["bound_s"], marker="o", label=f"r = {r:g} m")
    ax.set_xlabel("Relative speed (km/h)")
    ax.set_ylabel("Upper bound of total latency (s)")
    ax.legend()


def _emissions_compare(table: pd.DataFrame, axes) -> None:
    for arm, group in table.groupby("arm", sort=True):
        hours = group["t"] / 3600.0
        axes[0].plot(hours, group["cumulative_co2_g"] / 1000.0, label=arm)
        axes[1].plot(hours, group["cumulative_nox_g"], label=arm)
    axes[0].set_ylabel("CO2 (kg)")
    axes[1].set_ylabel("NOx proxy (g)")
    for ax in axes:
        ax.set_xlabel("Time (h)")
        ax.legend()


def _success_sweep(table: pd.DataFrame, ax) -> None:
    table = table.sort_values("value")
    ax.plot(table["value"], table["success_estimate"], marker="o")
    ax.fill_between(table["value"], table["ci_low"], table["ci_high"], alpha=0.25)
    ax.set_xlabel(str(table["parameter"].iloc[0]))
    ax.set_ylabel("Trade success probability")
    ax.set_ylim(0.0, 1.05)


def emit_plots(table: pd.DataFrame, kind: str, out_dir) -> list[Path]:
    """Validates the table and writes <out_dir>/<kind>.png. No file on invalid input."""
    _validate(table, kind)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if kind == "emissions_compare":
        fig, axes = plt.subplots(1, 2, figsize=(10, 4))
        _emissions_compare(table, axes)
    else:
        fig, ax = plt.subplots(figsize=(6, 4))
        (_latency_bound if kind == "latency_bound" else _success_sweep)(table, ax)

    path = out_dir / f"{kind}.png"
    try:
        fig.tight_layout()
        # Fixed metadata keeps reruns byte-identical.
        fig.savefig(path, dpi=120, metadata={"Software": None})
    finally:
        plt.close(fig)
    logger.info("✅ Wrote %s", path)
    return [path]
