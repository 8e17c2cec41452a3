# allowance_module/replay.py
# Rebuilds allowance balances and per-vehicle statements from ledger transactions.

import logging
from typing import Iterable

import pandas as pd

from ledger_module.ledger import LedgerTx, TxKind

logger = logging.getLogger(__name__)


def replay_balances(transactions: Iterable[LedgerTx]) -> dict[str, float]:
    """Reapplies balance-changing txs in chain order to fresh accounts.

    Uses the same float operations in the same order as EmissionsMarket, so the
    result matches the live balances bit for bit.
    """
    balances: dict[str, float] = {}
    for tx in transactions:
        p = tx.payload
        if tx.kind in (TxKind.REGISTRATION, TxKind.BALANCE_RESET):
            balances[p["vehicle_id"]] = p["balance"]
        elif tx.kind == TxKind.PENALTY:
            balances[p["vehicle_id"]] = balances[p["vehicle_id"]] - p["amount"]
        elif tx.kind == TxKind.SUBSIDY:
            balances[p["vehicle_id"]] = balances[p["vehicle_id"]] + p["amount"]
        elif tx.kind == TxKind.SETTLEMENT:
            balances[p["buyer"]] = balances[p["buyer"]] + p["amount"]
            balances[p["seller"]] = balances[p["seller"]] - p["amount"]
    return balances


REPORT_COLUMNS = [
    "period", "vehicle_id", "km", "grams_co2", "mean_epsilon", "penalties", "subsidies",
    "credits_bought", "credits_sold", "speed_alerts", "red_alerts",
]


def vehicle_report(transactions: Iterable[LedgerTx]) -> pd.DataFrame:
    """Per-period statement for every vehicle, built from the chain alone."""
    rows: dict[tuple[int, str], dict] = {}
    period_of_order: dict[int, int] = {}
    current_period = 0

    def row(period: int, vehicle_id: str) -> dict:
        key = (period, vehicle_id)
        if key not in rows:
            rows[key] = {c: 0.0 for c in REPORT_COLUMNS} | {"period": period, "vehicle_id": vehicle_id,
                                                             "speed_alerts": 0, "red_alerts": 0}
        return rows[key]

    for tx in transactions:
        p = tx.payload
        if tx.kind == TxKind.BALANCE_RESET:
            current_period = p["period"]
            row(current_period, p["vehicle_id"])
        elif tx.kind == TxKind.EMISSION_RECORD:
            r = row(p["period"], p["vehicle_id"])
            r["km"] += p["distance_km"]
            r["grams_co2"] += p["grams"]
        elif tx.kind in (TxKind.PENALTY, TxKind.SUBSIDY):
            r = row(p["period"], p["vehicle_id"])
            r["penalties" if tx.kind == TxKind.PENALTY else "subsidies"] += p["amount"]
            alerts = p["alerts"].split(",") if p["alerts"] else []
            r["speed_alerts"] += alerts.count("SpeedAlert")
            r["red_alerts"] += alerts.count("RedAlert")
        elif tx.kind == TxKind.TRADE_BUY:
            period_of_order[p["order_id"]] = current_period
        elif tx.kind == TxKind.SETTLEMENT:
            period = period_of_order.get(p["order_id"], current_period)
            row(period, p["buyer"])["credits_bought"] += p["amount"]
            row(period, p["seller"])["credits_sold"] += p["amount"]

    report = pd.DataFrame(list(rows.values()), columns=REPORT_COLUMNS)
    if report.empty:
        return report
    report["mean_epsilon"] = (report["grams_co2"] / report["km"]).where(report["km"] > 0, 0.0)
    return report.sort_values(["period", "vehicle_id"], kind="stable").reset_index(drop=True)
