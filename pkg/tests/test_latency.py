# tests/test_latency.py
import math

import numpy as np
import pytest

from analysis_module.latency import (
    SWEEP_COLUMNS,
    attempt_trade,
    closed_form_success,
    success_probability,
    sweep,
)
from ledger_module.ledger import MinerPool
from mobility_module.contact import ContactWindow
from utilities_module.errors import SweepError

POOL = MinerPool(miner_count_M=4, lambda_c=0.5)
S_B, R = 8e6, 6e6  # L_trans = 4/3 s


def _window(L_total: float) -> ContactWindow:
    return ContactWindow(("v000", "v001"), 0.0, L_total, 1.0, open_ended=math.isinf(L_total))


def test_window_shorter_than_transmission_fails_without_mining(rng):
    """No miner race is drawn when the payload cannot even be transmitted."""
    # ARRANGE
    state = rng.bit_generator.state

    # ACT
    attempt = attempt_trade(_window(1.0), S_B, R, POOL, rng, order_id=3)

    # ASSERT
    assert not attempt.succeeded
    assert math.isnan(attempt.L_comp_draw)
    assert attempt.order_id == 3
    assert rng.bit_generator.state == state


def test_open_ended_window_always_succeeds(rng):
    attempt = attempt_trade(_window(math.inf), S_B, R, POOL, rng)
    assert attempt.succeeded and attempt.open_ended
    assert attempt.latency == pytest.approx(attempt.L_trans + attempt.L_comp_draw)


def test_without_ledger_confirmation_only_transmission_counts(rng):
    # ACT
    ok = attempt_trade(_window(1.5), S_B, R, None, rng)
    short = attempt_trade(_window(1.3), S_B, R, None, rng)

    # ASSERT
    assert ok.succeeded and ok.L_comp_draw == 0.0
    assert not short.succeeded


def test_closed_form_success():
    assert closed_form_success(1.0, 4.0 / 3.0, POOL) == 0.0
    assert closed_form_success(math.inf, 4.0 / 3.0, POOL) == 1.0
    assert closed_form_success(10.0 / 3.0, 4.0 / 3.0, POOL) == pytest.approx(1.0 - math.exp(-4.0))


def test_monte_carlo_agrees_with_the_closed_form(rng):
    # ARRANGE
    L_total = 2.0

    # ACT
    est = success_probability(L_total, S_B, R, POOL, 20000, rng)

    # ASSERT
    expected = 1.0 - math.exp(-2.0 * (2.0 - 4.0 / 3.0))
    assert est.closed_form == pytest.approx(expected)
    assert abs(est.estimate - expected) < 4.0 * est.stderr
    assert est.ci_low <= est.estimate <= est.ci_high
    estimate, stderr = est
    assert (estimate, stderr) == (est.estimate, est.stderr)


def test_success_probability_resamples_observed_windows(rng):
    # ACT
    est = success_probability(np.array([1.0, math.inf]), S_B, R, POOL, 4000, rng)

    # ASSERT: the 1 s windows never succeed, the open-ended ones always do
    assert est.estimate == pytest.approx(est.open_ended_fraction)
    assert 0.4 < est.open_ended_fraction < 0.6
    assert est.closed_form is None


def test_success_probability_accepts_a_sampler(rng):
    est = success_probability(lambda g, n: np.full(n, 100.0), S_B, R, POOL, 1000, rng)
    assert est.estimate == 1.0


def test_success_probability_needs_trials(rng):
    with pytest.raises(SweepError):
        success_probability(2.0, S_B, R, POOL, 0, rng)


def test_sweep_over_relative_speed_is_monotone(small_cfg):
    """Common random numbers make the estimate fall with speed path by path."""
    # ACT
    table = sweep("rel_speed", [10, 20, 40, 80, 120], small_cfg, n_trials=3000)

    # ASSERT
    assert list(table.columns) == SWEEP_COLUMNS
    assert table["success_estimate"].is_monotonic_decreasing
    assert table["L_total_s"].iloc[0] == pytest.approx(300.0 / 18.0)
    assert table["success_estimate"].iloc[-1] < table["success_estimate"].iloc[0]
    assert (table["ci_low"] <= table["success_estimate"]).all()


@pytest.mark.parametrize("parameter, grid", [
    ("power", [25.0, 50.0, 100.0, 200.0]),
    ("miner_count", [1, 2, 4, 8]),
])
def test_more_mining_power_helps(small_cfg, parameter, grid):
    table = sweep(parameter, grid, small_cfg, n_trials=3000)
    assert table["success_estimate"].is_monotonic_increasing


def test_sweep_rejects_bad_input(small_cfg):
    with pytest.raises(SweepError):
        sweep("weather", [1.0], small_cfg)
    with pytest.raises(SweepError):
        sweep("rel_speed", [], small_cfg)
