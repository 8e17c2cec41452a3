# analysis_module/latency.py
# Trade outcomes from contact window, transmission and mining latency, and the
# Monte Carlo estimator of the trade success probability.
#
# A trade completes iff L_trans + L_comp <= L_total; open-ended windows always do.

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
import pandas as pd
from scipy.stats import binomtest

from ledger_module.ledger import MinerPool, draw_comp_latency, expected_comp_latency
from mobility_module.contact import ContactWindow
from mobility_module.kinematics import trans_latency, window_upper_bound
from scenario_module.scenario import ScenarioConfig, with_overrides
from scenario_module.streams import named_stream
from scenario_module.units import kmh_to_ms, ms_to_kmh
from utilities_module.errors import SweepError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TradeAttempt:
    L_total: float
    L_trans: float
    L_comp_draw: float
    succeeded: bool
    open_ended: bool = False
    order_id: Optional[int] = None

    @property
    def latency(self) -> float:
        """Completion latency; nan when the attempt failed before mining."""
        return self.L_trans + self.L_comp_draw


def attempt_trade(
    window: ContactWindow,
    S_B: float,
    R: float,
    pool: Optional[MinerPool],
    rng: np.random.Generator,
    order_id: Optional[int] = None,
) -> TradeAttempt:
    """One trade attempt. pool=None means no ledger confirmation (L_comp = 0)."""
    L_trans = trans_latency(S_B, R)
    if not window.open_ended and L_trans > window.L_total:
        return TradeAttempt(window.L_total, L_trans, math.nan, False, order_id=order_id)

    L_comp = float(draw_comp_latency(pool, rng)) if pool is not None else 0.0
    succeeded = window.open_ended or L_trans + L_comp <= window.L_total
    return TradeAttempt(window.L_total, L_trans, L_comp, bool(succeeded), window.open_ended, order_id)


def closed_form_success(L_total: float, L_trans: float, pool: MinerPool) -> float:
    """1 - exp(-lambda_c M (L_total - L_trans)), zero when L_total < L_trans."""
    if math.isinf(L_total):
        return 1.0
    if L_total < L_trans:
        return 0.0
    return 1.0 - math.exp(-pool.race_rate * (L_total - L_trans))


@dataclass(frozen=True)
class SuccessEstimate:
    estimate: float
    stderr: float
    n_trials: int
    successes: int
    ci_low: float
    ci_high: float
    open_ended_fraction: float = 0.0
    closed_form: Optional[float] = None

    def __iter__(self):
        return iter((self.estimate, self.stderr))


WindowDistribution = Union[float, np.ndarray, list, Callable[[np.random.Generator, int], np.ndarray]]


def _window_samples(window_dist: WindowDistribution, n: int, rng: np.random.Generator) -> tuple[np.ndarray, bool]:
    if callable(window_dist):
        return np.asarray(window_dist(rng, n), dtype=float), False
    values = np.asarray(window_dist, dtype=float)
    if values.ndim == 0:
        return np.full(n, float(values)), True
    if values.size == 0:
        raise SweepError("empty window distribution")
    return rng.choice(values, size=n, replace=True), False


def success_probability(
    window_dist: WindowDistribution,
    S_B: float,
    R: float,
    pool: MinerPool,
    n_trials: int,
    rng: np.random.Generator,
) -> SuccessEstimate:
    """Monte Carlo estimate of Pr(L_trans + L_comp <= L_total).

    window_dist is a constant L_total, observed L_total values (resampled), or a
    sampler rng, n -> array. inf marks an open-ended window.
    """
    if n_trials < 1:
        raise SweepError("n_trials must be >= 1")
    L_trans = trans_latency(S_B, R)
    windows, constant = _window_samples(window_dist, n_trials, rng)
    draws = draw_comp_latency(pool, rng, size=n_trials)

    success = np.isinf(windows) | (L_trans + draws <= windows)
    k = int(success.sum())
    p = k / n_trials
    ci = binomtest(k, n_trials).proportion_ci(confidence_level=0.95, method="wilson")
    return SuccessEstimate(
        estimate=p,
        stderr=math.sqrt(p * (1.0 - p) / n_trials),
        n_trials=n_trials,
        successes=k,
        ci_low=float(ci.low),
        ci_high=float(ci.high),
        open_ended_fraction=float(np.isinf(windows).mean()),
        closed_form=closed_form_success(float(windows[0]), L_trans, pool) if constant else None,
    )


# parameter -> (ScenarioConfig field, converter from grid value)
SWEEP_PARAMETERS = {
    "rel_speed": ("base_rel_speed", lambda v: kmh_to_ms(float(v))),
    "block_size": ("block_size_SB", float),
    "miner_count": ("miner_count_M", int),
    "data_rate": ("data_rate_R", float),
    "power": ("power_Pc", float),
}

SWEEP_COLUMNS = [
    "parameter", "value", "rel_speed_kmh", "L_total_s", "L_trans_s", "expected_comp_latency_s",
    "success_estimate", "stderr", "ci_low", "ci_high", "closed_form",
]


def sweep(parameter: str, grid, base: ScenarioConfig, n_trials: Optional[int] = None) -> pd.DataFrame:
    """Success probability across a grid of one parameter, with the bound
    r / (1.8 v_rel) as L_total.

    Every grid point reuses the same mining substream, so the success column is
    monotone path by path rather than only in expectation.
    """
    if parameter not in SWEEP_PARAMETERS:
        raise SweepError(f"unknown sweep parameter '{parameter}'; choose from {sorted(SWEEP_PARAMETERS)}")
    grid = list(grid)
    if not grid:
        raise SweepError("sweep grid is empty")

    field, convert = SWEEP_PARAMETERS[parameter]
    n_trials = n_trials or base.n_trials
    rows = []
    for value in grid:
        cfg = with_overrides(base, **{field: convert(value)})
        pool = MinerPool.from_config(cfg)
        rel_speed_kmh = ms_to_kmh(cfg.base_rel_speed)
        L_total = window_upper_bound(cfg.comm_range_r, rel_speed_kmh)
        est = success_probability(L_total, cfg.block_size_SB, cfg.data_rate_R, pool, n_trials,
                                  named_stream(base.rng_seed, "mining"))
        rows.append({
            "parameter": parameter,
            "value": value,
            "rel_speed_kmh": rel_speed_kmh,
            "L_total_s": L_total,
            "L_trans_s": trans_latency(cfg.block_size_SB, cfg.data_rate_R),
            "expected_comp_latency_s": expected_comp_latency(pool),
            "success_estimate": est.estimate,
            "stderr": est.stderr,
            "ci_low": est.ci_low,
            "ci_high": est.ci_high,
            "closed_form": est.closed_form,
        })
    logger.info("✅ Sweep over %s: %d grid points, %d trials each", parameter, len(grid), n_trials)
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)
