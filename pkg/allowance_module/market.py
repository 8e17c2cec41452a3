# allowance_module/market.py
# Cap-and-trade state machine: allowance accounts, period resets, the emission
# control rule (penalty / subsidy / alerts) and the four-step trade protocol.
# Every balance change is backed by a ledger transaction.

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

from config import AUTHORITY_AUTHOR, SYSTEM_AUTHOR
from emissions_module.emissions import EmissionSample
from ledger_module.ledger import Ledger, LedgerTx, TxKind
from utilities_module.errors import InvariantError, StaleSampleError, TradeError, TradeStateError

logger = logging.getLogger(__name__)

# Abort reasons carried on TradeOrder.abort_reason
ABORT_SELLER_SOLVENCY = "Remark 2"
ABORT_WINDOW = "window exceeded"


class AlertState(str, Enum):
    NONE = "None"
    SPEED_ALERT = "SpeedAlert"
    RED_ALERT = "RedAlert"


class OrderStatus(str, Enum):
    PROPOSED = "Proposed"
    SELLER_CONFIRMED = "SellerConfirmed"
    SETTLED = "Settled"
    ABORTED = "Aborted"


@dataclass(frozen=True)
class Alert:
    kind: AlertState
    vehicle_id: str
    t: float
    balance: float


@dataclass(frozen=True)
class AllowanceAccount:
    vehicle_id: str
    balance: float
    last_update: float = 0.0
    alert_state: AlertState = AlertState.NONE


@dataclass(frozen=True)
class TradeOrder:
    order_id: int
    buyer: str
    seller: str
    amount_e: float
    timestamp: float
    status: OrderStatus = OrderStatus.PROPOSED
    abort_reason: Optional[str] = None

    @property
    def is_open(self) -> bool:
        return self.status in (OrderStatus.PROPOSED, OrderStatus.SELLER_CONFIRMED)


@dataclass(frozen=True)
class MarketRule:
    threshold_T_cal: float
    penalty_alpha: float
    subsidy_beta: float
    subsidy_cap: float

    def __post_init__(self):
        if not self.threshold_T_cal > 0:
            raise InvariantError("threshold_T_cal > 0", "the emission cap must be positive")
        if self.penalty_alpha < 0 or self.subsidy_beta < 0 or self.subsidy_cap < 0:
            raise InvariantError("market rates >= 0", "penalty_alpha, subsidy_beta and subsidy_cap must be >= 0")

    @classmethod
    def from_config(cls, cfg) -> "MarketRule":
        return cls(cfg.threshold_T_cal, cfg.penalty_alpha, cfg.subsidy_beta, cfg.subsidy_cap)

    def penalty(self, epsilon: float, distance: float) -> float:
        return self.penalty_alpha * (epsilon - self.threshold_T_cal) * distance

    def subsidy(self, epsilon: float, distance: float) -> float:
        return min(self.subsidy_cap, self.subsidy_beta * (self.threshold_T_cal - epsilon) * distance)

    def is_compliant(self, epsilon: float) -> bool:
        # Only strictly exceeding the cap is a violation.
        return not epsilon > self.threshold_T_cal


def with_balance(account: AllowanceAccount, balance: float, t: float, speed_alert: bool = False) -> AllowanceAccount:
    """New account state; RedAlert exactly when the balance is negative."""
    if balance < 0:
        state = AlertState.RED_ALERT
    elif speed_alert:
        state = AlertState.SPEED_ALERT
    else:
        state = AlertState.NONE
    return replace(account, balance=balance, last_update=t, alert_state=state)


def control_step(account: AllowanceAccount, sample: EmissionSample, rule: MarketRule):
    """Pure emission control: (updated account, tx kind, signed amount, alerts)."""
    if rule.is_compliant(sample.epsilon):
        amount = rule.subsidy(sample.epsilon, sample.distance)
        updated = with_balance(account, account.balance + amount, sample.timestamp)
        kind, alerts = TxKind.SUBSIDY, []
    else:
        amount = rule.penalty(sample.epsilon, sample.distance)
        updated = with_balance(account, account.balance - amount, sample.timestamp, speed_alert=True)
        kind = TxKind.PENALTY
        alerts = [Alert(AlertState.SPEED_ALERT, account.vehicle_id, sample.timestamp, updated.balance)]
    if updated.balance < 0:
        alerts.append(Alert(AlertState.RED_ALERT, account.vehicle_id, sample.timestamp, updated.balance))
    return updated, kind, amount, tuple(alerts)


class EmissionsMarket:
    """Ledger-backed allowance accounts for one fleet."""

    def __init__(self, rule: MarketRule, ledger: Ledger, initial_balance_B0: float, sample_Ts: Optional[float] = None):
        self.rule = rule
        self.ledger = ledger
        self.initial_balance_B0 = initial_balance_B0
        self.sample_Ts = sample_Ts
        self.accounts: dict[str, AllowanceAccount] = {}
        self.orders: dict[int, TradeOrder] = {}
        self.period = 0
        # (t, vehicle_id, balance, event kind, amount)
        self.account_log: list[dict] = []
        self.alert_log: list[dict] = []

    @classmethod
    def from_config(cls, cfg, ledger: Ledger) -> "EmissionsMarket":
        return cls(MarketRule.from_config(cfg), ledger, cfg.initial_balance_B0, cfg.sample_Ts)

    def _log(self, t: float, vehicle_id: str, kind: str, amount: float) -> None:
        self.account_log.append({
            "t": t,
            "period": self.period,
            "vehicle_id": vehicle_id,
            "balance": self.accounts[vehicle_id].balance,
            "event": kind,
            "amount": amount,
        })

    def register_vehicle(self, vehicle_id: str, t: float = 0.0) -> LedgerTx:
        if vehicle_id in self.accounts:
            raise TradeError(f"vehicle {vehicle_id} is already registered")
        tx = self.ledger.submit(TxKind.REGISTRATION, AUTHORITY_AUTHOR, vehicle_id=vehicle_id,
                                balance=self.initial_balance_B0, t=t)
        self.accounts[vehicle_id] = AllowanceAccount(vehicle_id=vehicle_id, balance=self.initial_balance_B0, last_update=t)
        return tx

    def record_sample(self, sample: EmissionSample) -> LedgerTx:
        """Step 1: the vehicle publishes its measurement."""
        return self.ledger.submit(
            TxKind.EMISSION_RECORD,
            sample.vehicle_id,
            vehicle_id=sample.vehicle_id,
            t=sample.timestamp,
            period=self.period,
            epsilon=sample.epsilon,
            distance_km=sample.distance,
            grams=sample.grams,
            flags=",".join(sorted(sample.flags)),
        )

    def reset_period(self, t: float, period: Optional[int] = None, B0: Optional[float] = None) -> dict[str, AllowanceAccount]:
        """Balances back to B0 and alerts cleared; nothing carries across periods."""
        B0 = self.initial_balance_B0 if B0 is None else B0
        if not B0 > 0:
            raise InvariantError("Remark 1", f"initial_balance_B0 must be > 0, got {B0}")
        if any(o.is_open for o in self.orders.values()):
            raise TradeStateError("period reset with open trade orders")

        self.period = self.period if period is None else period
        for vehicle_id, account in self.accounts.items():
            self.accounts[vehicle_id] = AllowanceAccount(vehicle_id=vehicle_id, balance=B0, last_update=t)
            self.ledger.submit(TxKind.BALANCE_RESET, SYSTEM_AUTHOR, vehicle_id=vehicle_id, balance=B0, t=t, period=self.period)
            self._log(t, vehicle_id, TxKind.BALANCE_RESET.value, B0)
        logger.debug("Period %d reset %d accounts at t=%.0f", self.period, len(self.accounts), t)
        return dict(self.accounts)

    def _check_fresh(self, account: AllowanceAccount, sample: EmissionSample) -> None:
        elapsed = sample.timestamp - account.last_update
        if elapsed <= 0:
            raise StaleSampleError(
                f"sample for {sample.vehicle_id} at t={sample.timestamp} is not after last update t={account.last_update}"
            )
        if self.sample_Ts is not None and elapsed > self.sample_Ts * (1 + 1e-9):
            raise StaleSampleError(
                f"sample for {sample.vehicle_id} at t={sample.timestamp} skips an interval (last update t={account.last_update})"
            )

    def apply_emission_control(self, sample: EmissionSample):
        """(updated account, Penalty or Subsidy tx, alerts) for one sample."""
        account = self.accounts[sample.vehicle_id]
        self._check_fresh(account, sample)

        updated, kind, amount, alerts = control_step(account, sample, self.rule)
        self.accounts[sample.vehicle_id] = updated
        tx = self.ledger.submit(
            kind,
            SYSTEM_AUTHOR,
            vehicle_id=sample.vehicle_id,
            amount=amount,
            epsilon=sample.epsilon,
            distance_km=sample.distance,
            t=sample.timestamp,
            period=self.period,
            alerts=",".join(a.kind.value for a in alerts),
        )
        self._log(sample.timestamp, sample.vehicle_id, kind.value, amount if kind == TxKind.SUBSIDY else -amount)
        for alert in alerts:
            self.alert_log.append({
                "t": alert.t,
                "period": self.period,
                "vehicle_id": alert.vehicle_id,
                "alert": alert.kind.value,
                "balance": alert.balance,
            })
        return updated, tx, alerts

    def propose_trade(self, buyer_id: str, seller_id: str, amount: float, t: float) -> TradeOrder:
        buyer = self.accounts[buyer_id]
        if buyer_id == seller_id:
            raise TradeError("buyer and seller must differ")
        if not buyer.balance < 0:
            raise TradeError(f"buyer not in deficit: {buyer_id} balance {buyer.balance}")
        if not amount > 0:
            raise TradeError(f"trade amount must be > 0, got {amount}")

        order = TradeOrder(order_id=len(self.orders), buyer=buyer_id, seller=seller_id, amount_e=amount, timestamp=t)
        self.orders[order.order_id] = order
        self.ledger.submit(TxKind.TRADE_BUY, buyer_id, order_id=order.order_id, buyer=buyer_id,
                           seller=seller_id, amount=amount, t=t)
        return order

    def _require(self, order_id: int, status: OrderStatus) -> TradeOrder:
        order = self.orders[order_id]
        if order.status != status:
            raise TradeStateError(f"order {order_id} is {order.status.value}, expected {status.value}")
        return order

    def _abort(self, order: TradeOrder, reason: str) -> TradeOrder:
        aborted = replace(order, status=OrderStatus.ABORTED, abort_reason=reason)
        self.orders[order.order_id] = aborted
        return aborted

    def confirm_trade(self, order_id: int, t: Optional[float] = None) -> TradeOrder:
        order = self._require(order_id, OrderStatus.PROPOSED)
        seller = self.accounts[order.seller]
        if not order.amount_e <= seller.balance:
            return self._abort(order, ABORT_SELLER_SOLVENCY)

        confirmed = replace(order, status=OrderStatus.SELLER_CONFIRMED)
        self.orders[order_id] = confirmed
        self.ledger.submit(TxKind.TRADE_SELL, order.seller, order_id=order_id, buyer=order.buyer,
                           seller=order.seller, amount=order.amount_e, t=order.timestamp if t is None else t)
        return confirmed

    def settle_trade(self, order_id: int, delivery_succeeded: bool, t: Optional[float] = None):
        """((buyer, seller) accounts, order). Seller solvency is re-checked here because the
        seller may have paid a penalty since confirming."""
        order = self._require(order_id, OrderStatus.SELLER_CONFIRMED)
        t = order.timestamp if t is None else t
        buyer, seller = self.accounts[order.buyer], self.accounts[order.seller]

        if not delivery_succeeded:
            return (buyer, seller), self._abort(order, ABORT_WINDOW)
        if not order.amount_e <= seller.balance:
            return (buyer, seller), self._abort(order, ABORT_SELLER_SOLVENCY)

        buyer = with_balance(buyer, buyer.balance + order.amount_e, t)
        seller = with_balance(seller, seller.balance - order.amount_e, t)
        self.accounts[order.buyer], self.accounts[order.seller] = buyer, seller
        self.ledger.submit(TxKind.SETTLEMENT, SYSTEM_AUTHOR, order_id=order_id, buyer=order.buyer,
                           seller=order.seller, amount=order.amount_e, t=t)
        self._log(t, order.buyer, TxKind.SETTLEMENT.value, order.amount_e)
        self._log(t, order.seller, TxKind.SETTLEMENT.value, -order.amount_e)

        settled = replace(order, status=OrderStatus.SETTLED)
        self.orders[order_id] = settled
        return (buyer, seller), settled

    def balances(self) -> dict[str, float]:
        return {vid: acc.balance for vid, acc in self.accounts.items()}

    def total_balance(self) -> float:
        return sum(acc.balance for acc in self.accounts.values())
