# reporting_module/costs.py
# Smart-contract execution cost accounting. Gas figures are fixed per contract;
# gas price and the Gwei/USD rate are user-supplied.

import logging
from dataclasses import dataclass
from typing import Mapping, Optional

import pandas as pd

from ledger_module.ledger import TxKind
from scenario_module.units import gas_to_ether
from utilities_module.errors import InvariantError, UnknownContractError

logger = logging.getLogger(__name__)

# Measured gas per contract call.
GAS_TABLE: dict[str, int] = {
    "UserAuthority": 159430,
    "RecordData[1]": 152443,
    "AlertControl": 213924,
    "Incentive": 224934,
    "RecordData[2]": 276394,
    "EABTransfer": 246374,
}

GWEI_PER_USD = 4_182_471.9949

TX_CONTRACTS: dict[str, Optional[str]] = {
    TxKind.REGISTRATION.value: "UserAuthority",
    TxKind.EMISSION_RECORD.value: "RecordData[1]",
    TxKind.PENALTY.value: "AlertControl",
    TxKind.SUBSIDY.value: "Incentive",
    TxKind.TRADE_BUY.value: "RecordData[2]",
    TxKind.TRADE_SELL.value: "RecordData[2]",
    TxKind.SETTLEMENT.value: "EABTransfer",
    TxKind.BALANCE_RESET.value: None,
}

# Engine event kind -> contract. None: no contract call of its own (alerts are
# raised inside the AlertControl call that applies the penalty).
EVENT_CONTRACTS: dict[str, Optional[str]] = {
    "Registration": "UserAuthority",
    "Sample": "RecordData[1]",
    "Penalty": "AlertControl",
    "Subsidy": "Incentive",
    "TradeProposed": "RecordData[2]",
    "TradeConfirmed": "RecordData[2]",
    "TradeSettled": "EABTransfer",
    "Alert": None,
    "TradeAborted": None,
    "BlockSealed": None,
    "PeriodReset": None,
}


@dataclass(frozen=True)
class GasCostEntry:
    contract_name: str
    gas: int
    ether: float
    usd: float

    @classmethod
    def price(cls, contract_name: str, gas: int, gas_price_gwei: float, usd_per_gwei: float) -> "GasCostEntry":
        if not gas > 0:
            raise InvariantError("gas > 0", f"{contract_name} has non-positive gas {gas}")
        return cls(contract_name, int(gas), gas_to_ether(gas, gas_price_gwei), gas * gas_price_gwei * usd_per_gwei)


def count_contract_calls(kinds, mapping: Mapping[str, Optional[str]] = EVENT_CONTRACTS) -> dict[str, int]:
    """Contract call counts from a sequence of event (or tx) kinds."""
    counts: dict[str, int] = {}
    for kind in kinds:
        if kind not in mapping:
            raise UnknownContractError(f"no contract mapping for kind '{kind}'")
        contract = mapping[kind]
        if contract is not None:
            counts[contract] = counts.get(contract, 0) + 1
    return counts


COST_COLUMNS = ["contract_name", "gas", "ether", "usd", "calls", "total_ether", "total_usd"]


def estimate_costs(
    gas_price_gwei: float,
    usd_per_gwei: float = 1.0 / GWEI_PER_USD,
    entries: Mapping[str, int] = GAS_TABLE,
    call_counts: Optional[Mapping[str, int]] = None,
) -> pd.DataFrame:
    """Per-contract cost of one call, plus run totals when call counts are given.

    ether = gas * gas_price_gwei * 1e-9, usd = gas * gas_price_gwei * usd_per_gwei.
    """
    if not (gas_price_gwei > 0 and usd_per_gwei > 0):
        raise InvariantError("currency rates", "gas_price_gwei and usd_per_gwei must be > 0")
    call_counts = dict(call_counts or {})
    unknown = set(call_counts) - set(entries)
    if unknown:
        raise UnknownContractError(f"contracts missing from the gas table: {sorted(unknown)}")

    rows = []
    for name, gas in entries.items():
        entry = GasCostEntry.price(name, gas, gas_price_gwei, usd_per_gwei)
        calls = call_counts.get(name, 0)
        rows.append({
            "contract_name": entry.contract_name,
            "gas": entry.gas,
            "ether": entry.ether,
            "usd": entry.usd,
            "calls": calls,
            "total_ether": entry.ether * calls,
            "total_usd": entry.usd * calls,
        })
    report = pd.DataFrame(rows, columns=COST_COLUMNS)
    logger.debug("Priced %d contracts at %s Gwei (1 Gwei = %s USD)", len(rows), gas_price_gwei, usd_per_gwei)
    return report


def implied_gas_price_gwei(usd: float, gas: int, usd_per_gwei: float = 1.0 / GWEI_PER_USD) -> float:
    """Gas price at which `gas` units cost `usd`."""
    return usd / (gas * usd_per_gwei)
