# tests/conftest.py
import copy
import os
import sys

import numpy as np
import pytest

# Make the top-level packages importable when pytest runs from any directory
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from scenario_module.scenario import load_scenario  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run tests marked slow")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long replicated runs, skipped unless --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


# A small fleet on a short ring so contacts and trades actually happen.
SMALL_SCENARIO = {
    "schema_version": 1,
    "name": "small-ring",
    "rng_seed": 7,
    "time": {"period_T_h": 2.0, "sample_Ts_h": 0.25, "n_periods": 1},
    "fleet": {"n_vehicles": 8, "initial_balance_B0": 20.0},
    "road": {
        "road_model": "ring-road",
        "circumference_km": 2.0,
        "speed_limit_kmh": 130.0,
        "speed_min_kmh": 30.0,
        "speed_max_kmh": 130.0,
        "redraw_interval_min": 1.0,
    },
    "market": {"threshold_T_cal": 160.0, "penalty_alpha": 0.1, "subsidy_beta": 0.02, "subsidy_cap": 5.0},
    "comms": {"comm_range_r_m": 300.0, "data_rate_R_mbps": 6.0},
    "ledger": {"block_size_SB_bits": 8e6, "miner_count_M": 4, "lambda0": 0.005, "power_Pc_W": 100.0},
    "behavior": {"behavior_policy": "dlt-controlled"},
    "analysis": {"n_trials": 2000},
}


@pytest.fixture
def scenario_doc():
    return copy.deepcopy(SMALL_SCENARIO)


@pytest.fixture
def small_cfg(scenario_doc):
    return load_scenario(scenario_doc)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
