# tests/test_costs.py
import pytest

from reporting_module.costs import (
    COST_COLUMNS,
    EVENT_CONTRACTS,
    GAS_TABLE,
    GWEI_PER_USD,
    TX_CONTRACTS,
    count_contract_calls,
    estimate_costs,
    implied_gas_price_gwei,
)
from simulation_module.engine import SimEventKind
from utilities_module.errors import InvariantError, UnknownContractError


def test_user_authority_cost_at_the_reference_gas_price():
    """159430 gas at 1.897 Gwei is about 0.0723 USD."""
    # ACT
    report = estimate_costs(1.897).set_index("contract_name")

    # ASSERT
    row = report.loc["UserAuthority"]
    assert row["gas"] == 159430
    assert row["ether"] == pytest.approx(159430 * 1.897e-9)
    assert row["usd"] == pytest.approx(0.0723, abs=5e-5)
    assert list(report.reset_index().columns) == COST_COLUMNS


def test_every_contract_is_priced():
    # ACT
    report = estimate_costs(20.0, 1.0 / GWEI_PER_USD)

    # ASSERT
    assert report["contract_name"].tolist() == list(GAS_TABLE)
    assert (report["usd"] > 0).all()
    assert report["total_usd"].sum() == 0.0


def test_implied_gas_price_inverts_the_cost():
    assert implied_gas_price_gwei(0.0723, 159430) == pytest.approx(1.897, rel=1e-3)


def test_call_counts_drive_the_totals():
    # ARRANGE
    calls = count_contract_calls(["Registration", "Sample", "Sample", "Alert", "TradeSettled"])

    # ACT
    report = estimate_costs(1.897, call_counts=calls).set_index("contract_name")

    # ASSERT
    assert calls == {"UserAuthority": 1, "RecordData[1]": 2, "EABTransfer": 1}
    assert report.loc["RecordData[1]", "total_usd"] == pytest.approx(2 * report.loc["RecordData[1]", "usd"])


def test_every_event_and_tx_kind_has_a_mapping():
    assert {k.value for k in SimEventKind} == set(EVENT_CONTRACTS)
    assert set(TX_CONTRACTS.values()) - {None} <= set(GAS_TABLE)


def test_unknown_kinds_and_contracts_are_rejected():
    with pytest.raises(UnknownContractError):
        count_contract_calls(["Teleport"])
    with pytest.raises(UnknownContractError):
        estimate_costs(1.0, call_counts={"Oracle": 1})
    with pytest.raises(InvariantError):
        estimate_costs(0.0)
