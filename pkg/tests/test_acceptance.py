# tests/test_acceptance.py
# End-to-end properties of the whole model: miner race law, success
# probability, the latency bound curve, market safety over random histories,
# paired-run ordering and ledger replay.
import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.integrate import quad

from allowance_module.market import AlertState, EmissionsMarket, MarketRule, OrderStatus
from allowance_module.replay import replay_balances
from analysis_module.latency import success_probability
from emissions_module.emissions import EmissionSample
from ledger_module.chain_export import export_chain, load_chain
from ledger_module.ledger import Ledger, MinerPool, expected_comp_latency, miner_race, survival_fastest
from mobility_module.kinematics import trans_latency, window_upper_bound
from scenario_module.scenario import load_scenario, with_overrides
from simulation_module.compare import compare, replicate_compare
from simulation_module.engine import run

POOL = MinerPool(miner_count_M=4, lambda_c=0.5)
N = 100_000


@pytest.fixture(scope="module")
def race_latencies():
    rng = np.random.default_rng(99)
    return np.array([miner_race(POOL, rng)[1] for _ in range(N)])


def test_miner_race_mean(race_latencies):
    # ASSERT
    assert expected_comp_latency(POOL) == 0.5
    stderr = race_latencies.std(ddof=1) / math.sqrt(N)
    assert abs(race_latencies.mean() - 0.5) < 3.0 * stderr


def test_expected_latency_is_the_integral_of_survival():
    integral, _ = quad(lambda w: survival_fastest(POOL, w), 0.0, math.inf)
    assert integral == pytest.approx(expected_comp_latency(POOL), rel=1e-8)


@pytest.mark.parametrize("w", [0.1, 0.5, 1.0])
def test_empirical_survival(race_latencies, w):
    # ACT
    p = survival_fastest(POOL, w)
    empirical = (race_latencies > w).mean()

    # ASSERT
    band = 3.0 * math.sqrt(p * (1.0 - p) / N)
    assert abs(empirical - p) < band


def test_success_probability_reference_case():
    """L_total = 2 s, L_trans = 1 s, lambda_c M = 2 gives 1 - e^-2."""
    # ACT
    est = success_probability(2.0, 6e6, 6e6, POOL, N, np.random.default_rng(4))

    # ASSERT
    assert est.closed_form == pytest.approx(1.0 - math.exp(-2.0))
    assert abs(est.estimate - (1.0 - math.exp(-2.0))) < 3.0 * est.stderr


def test_latency_bound_curve_shape():
    # ACT
    speeds = np.linspace(10.0, 150.0, 29)
    bounds = np.array([window_upper_bound(300.0, v) for v in speeds])

    # ASSERT: strictly decreasing and convex
    assert np.all(np.diff(bounds) < 0)
    assert np.all(np.diff(bounds, 2) > 0)
    assert window_upper_bound(300.0, 50.0) == pytest.approx(300.0 / (1.8 * 50.0), rel=1e-12)


def test_market_safety_over_random_histories():
    """
    Random samples and trades over many short histories never break:
    positive balances at period start, seller solvency after settlement,
    RedAlert exactly when negative, and conservation of the balance sum
    under trades.
    """
    # ARRANGE
    rng = np.random.default_rng(2025)
    rule = MarketRule(160.0, 0.1, 0.02, 5.0)
    violations = []

    for history in range(10_000):
        ids = [f"v{k}" for k in range(int(rng.integers(2, 4)))]
        market = EmissionsMarket(rule, Ledger(8e6), float(rng.uniform(0.5, 20.0)), 900.0)
        for vid in ids:
            market.register_vehicle(vid)
        market.reset_period(0.0, 0)
        if any(acc.balance <= 0 for acc in market.accounts.values()):
            violations.append((history, "start"))

        for tick in range(1, 4):
            t = 900.0 * tick
            for vid in ids:
                sample = EmissionSample(vid, t, float(rng.uniform(120.0, 200.0)), float(rng.uniform(0.0, 30.0)))
                market.apply_emission_control(sample)

            buyers = [vid for vid in ids if market.accounts[vid].balance < 0]
            for buyer in buyers:
                seller = ids[int(rng.integers(len(ids)))]
                if seller == buyer or market.accounts[buyer].balance >= 0:
                    continue
                before = market.total_balance()
                order = market.propose_trade(buyer, seller, float(rng.uniform(0.1, 15.0)), t)
                order = market.confirm_trade(order.order_id, t)
                if order.status == OrderStatus.SELLER_CONFIRMED:
                    _, order = market.settle_trade(order.order_id, bool(rng.random() < 0.8), t)
                if order.status == OrderStatus.SETTLED and market.accounts[seller].balance < 0:
                    violations.append((history, "seller"))
                if abs(market.total_balance() - before) > 1e-9 * max(1.0, abs(before)):
                    violations.append((history, "conservation"))

            for acc in market.accounts.values():
                if (acc.alert_state == AlertState.RED_ALERT) != (acc.balance < 0):
                    violations.append((history, "red alert"))

    # ASSERT
    assert violations == []


@pytest.fixture(scope="module")
def default_cfg():
    return load_scenario(Path(__file__).resolve().parents[1] / "scenarios" / "default.json")


@pytest.mark.parametrize("seed", [1, 2])
def test_default_scenario_dlt_arm_is_cleaner_and_slower(default_cfg, seed):
    """
    On the 120-vehicle scenario the dlt arm emits strictly less CO2 and NOx,
    and its settled trades are never faster than transmission alone and
    slower on average than without ledger confirmation.
    """
    # ACT
    report = compare(with_overrides(default_cfg, rng_seed=seed))

    # ASSERT
    assert report.dlt.total_co2_g < report.baseline.total_co2_g
    assert report.dlt.total_nox_g < report.baseline.total_nox_g
    assert report.dlt.ticks == report.baseline.ticks
    assert report.dlt.alerts[AlertState.RED_ALERT.value] > 0
    assert report.dlt.trades_settled > 0
    assert report.no_ledger.trades_settled > 0
    floor = trans_latency(default_cfg.block_size_SB, default_cfg.data_rate_R)
    assert report.dlt.mean_trade_latency >= floor
    assert report.no_ledger.mean_trade_latency == pytest.approx(floor)
    assert report.latency_overhead_s > 0


@pytest.mark.slow
def test_dlt_arm_wins_on_nearly_every_seed_within_budget(default_cfg):
    """100 paired seeds on the default scenario: at least 95 dlt wins in under two minutes."""
    # ACT
    started = time.perf_counter()
    table, wins = replicate_compare(default_cfg, range(1, 101))
    elapsed = time.perf_counter() - started

    # ASSERT
    assert len(table) == 100
    assert wins >= 95
    assert elapsed < 120.0


@pytest.mark.parametrize("seed", range(100))
def test_exported_chain_replays_to_final_balances(tmp_path, small_cfg, seed):
    # ARRANGE
    result = run(with_overrides(small_cfg, rng_seed=seed, n_vehicles=int(4 + seed % 10)))
    export_chain(result.ledger, tmp_path)

    # ACT
    replayed = replay_balances(load_chain(tmp_path).transactions())

    # ASSERT
    assert replayed == result.summary.final_balances
