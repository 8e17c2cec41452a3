# simulation_module/engine.py
# Deterministic discrete-time orchestration. Per tick (every sample_Ts):
#   mobility -> sample -> record -> control -> trading -> seal
# Period resets happen at t = kT after that tick's stages; period 0 resets at t = 0.

import json
import logging
import math
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
import pandas as pd

from allowance_module.market import AlertState, EmissionsMarket, OrderStatus
from analysis_module.latency import attempt_trade
from emissions_module.emissions import nox_proxy, sample_fleet
from ledger_module.ledger import Ledger, MinerPool, TxKind
from mobility_module.fleet import Fleet
from scenario_module.scenario import ScenarioConfig
from scenario_module.streams import derive_streams
from utilities_module.errors import BetsError, InvariantError, SimulationError

logger = logging.getLogger(__name__)


class SimEventKind(str, Enum):
    REGISTRATION = "Registration"
    SAMPLE = "Sample"
    PENALTY = "Penalty"
    SUBSIDY = "Subsidy"
    ALERT = "Alert"
    TRADE_PROPOSED = "TradeProposed"
    TRADE_CONFIRMED = "TradeConfirmed"
    TRADE_SETTLED = "TradeSettled"
    TRADE_ABORTED = "TradeAborted"
    BLOCK_SEALED = "BlockSealed"
    PERIOD_RESET = "PeriodReset"


@dataclass(frozen=True)
class SimEvent:
    t: float
    kind: SimEventKind
    subject: str
    data: dict = field(default_factory=dict)

    def to_row(self) -> dict:
        return {
            "t": self.t,
            "kind": self.kind.value,
            "subject": self.subject,
            "data": json.dumps(self.data, sort_keys=True, separators=(",", ":")),
        }


@dataclass(frozen=True)
class SimSummary:
    behavior_policy: str
    ledger_confirmation: bool
    n_vehicles: int
    n_periods: int
    ticks: int
    total_co2_g: float
    total_nox_g: float
    total_km: float
    mean_epsilon: float
    trades_proposed: int
    trades_settled: int
    trades_aborted: int
    mean_trade_latency: Optional[float]
    alerts: dict
    blocks: int
    tx_count: int
    final_balances: dict

    def to_dict(self) -> dict:
        return asdict(self)


EVENT_COLUMNS = ["t", "kind", "subject", "data"]
TABLE_COLUMNS = {
    "samples": ["t", "vehicle_id", "epsilon", "distance_km", "grams", "flags"],
    "account_ledger": ["t", "period", "vehicle_id", "balance", "event", "amount"],
    "alerts": ["t", "period", "vehicle_id", "alert", "balance"],
    "contact_windows": ["t", "vehicle_i", "vehicle_j", "distance_m", "rel_speed_kmh", "L_total_s", "bound_s", "open_ended"],
    "trade_attempts": ["t", "order_id", "buyer", "seller", "amount", "L_total_s", "L_trans_s", "L_comp_s", "succeeded", "status"],
    "emission_series": ["t", "cumulative_co2_g", "cumulative_nox_g"],
}


@dataclass
class SimResult:
    summary: SimSummary
    events: list
    ledger: Ledger
    market: EmissionsMarket
    tables: dict

    def event_log(self) -> pd.DataFrame:
        return pd.DataFrame([e.to_row() for e in self.events], columns=EVENT_COLUMNS)


class Simulation:
    """One run of a scenario. Identical cfg (seed included) gives identical outputs.

    With accounting=False only mobility and sampling run: no accounts, no
    ledger traffic. A baseline arm emits the same grams either way.
    """

    def __init__(self, cfg: ScenarioConfig, record_trajectories: bool = False, accounting: bool = True):
        if not accounting and cfg.behavior_policy != "baseline":
            raise InvariantError("accounting", "only the baseline policy can run without accounting")
        self.cfg = cfg
        self.record_trajectories = record_trajectories
        self.accounting = accounting
        self.streams = derive_streams(cfg)
        self.ledger = Ledger(cfg.block_size_SB)
        self.market = EmissionsMarket.from_config(cfg, self.ledger)
        self.pool = MinerPool.from_config(cfg)
        self.trade_pool = self.pool if cfg.ledger_confirmation else None
        self.fleet = Fleet(cfg, self.streams.mobility)
        self.curve = cfg.curve
        self.horizon = min(cfg.contact_horizon, cfg.sample_Ts)

        self.events: list[SimEvent] = []
        self.tick = 0
        self.total_co2 = 0.0
        self.total_nox = 0.0
        self.total_km = 0.0
        self.latencies: list[float] = []
        self.alert_counts = {AlertState.SPEED_ALERT.value: 0, AlertState.RED_ALERT.value: 0}
        self.trade_counts = {"proposed": 0, "settled": 0, "aborted": 0}
        self.sample_rows: list[dict] = []
        self.window_rows: list[dict] = []
        self.attempt_rows: list[dict] = []
        self.series_rows: list[dict] = []
        self.trajectory_frames: list[pd.DataFrame] = []

    def _emit(self, t: float, kind: SimEventKind, subject: str, **data) -> None:
        self.events.append(SimEvent(t, kind, subject, data))

    @contextmanager
    def _stage(self, stage: str):
        try:
            yield
        except SimulationError:
            raise
        except BetsError as e:
            raise SimulationError(f"{type(e).__name__}: {e}", self.tick, stage) from e

    # --- stages ---
    def _reset(self, t: float, period: int) -> None:
        with self._stage("reset"):
            self.fleet.start_period(t)
            if not self.accounting:
                return
            self.market.reset_period(t, period)
        self._emit(t, SimEventKind.PERIOD_RESET, "all", period=period, balance=self.cfg.initial_balance_B0)

    def _sample(self, t: float, trace):
        samples = sample_fleet(self.fleet.ids, t, trace, self.curve,
                               self.streams.measurement_noise, self.cfg.measurement_noise_sd)
        grams = np.array([s.grams for s in samples])
        self.fleet.add_grams(grams)
        self.total_co2 += float(grams.sum())
        self.total_nox += float(nox_proxy(grams, self.cfg.nox_scale).sum())
        self.total_km += float(sum(s.distance for s in samples))
        for s in samples:
            self.sample_rows.append({
                "t": t,
                "vehicle_id": s.vehicle_id,
                "epsilon": s.epsilon,
                "distance_km": s.distance,
                "grams": s.grams,
                "flags": ",".join(sorted(s.flags)),
            })
            self._emit(t, SimEventKind.SAMPLE, s.vehicle_id, epsilon=s.epsilon, distance_km=s.distance)
        return samples

    def _control(self, t: float, samples) -> float:
        """Applies the emission rule to every sample; returns subsidies minus penalties.

        A tick's events come out grouped: all penalties, then subsidies, then alerts.
        """
        net = 0.0
        grouped = {SimEventKind.PENALTY: [], SimEventKind.SUBSIDY: [], SimEventKind.ALERT: []}
        for idx, sample in enumerate(samples):
            _, tx, alerts = self.market.apply_emission_control(sample)
            amount = tx.payload["amount"]
            if tx.kind == TxKind.PENALTY:
                net -= amount
                grouped[SimEventKind.PENALTY].append((sample.vehicle_id, {"amount": amount, "epsilon": sample.epsilon}))
            else:
                net += amount
                grouped[SimEventKind.SUBSIDY].append((sample.vehicle_id, {"amount": amount, "epsilon": sample.epsilon}))
            for alert in alerts:
                self.alert_counts[alert.kind.value] += 1
                capped = self.fleet.apply_alert(idx, alert)
                grouped[SimEventKind.ALERT].append(
                    (sample.vehicle_id, {"alert": alert.kind.value, "balance": alert.balance, "capped": capped}))
        for kind, entries in grouped.items():
            for subject, data in entries:
                self._emit(t, kind, subject, **data)
        return net

    def _find_seller(self, buyer: int) -> Optional[int]:
        accounts = self.market.accounts
        for j in self.fleet.neighbors(buyer):
            account = accounts[self.fleet.ids[j]]
            if account.balance > 0 and account.alert_state == AlertState.NONE:
                return j
        return None

    def _trading(self, t: float) -> None:
        ids = self.fleet.ids
        accounts = self.market.accounts
        in_deficit = [i for i, vid in enumerate(ids) if accounts[vid].balance < 0]
        for b in self.streams.trading.permutation(in_deficit).tolist():
            buyer_id = ids[b]
            if not accounts[buyer_id].balance < 0:
                continue
            s = self._find_seller(b)
            if s is None:
                continue
            seller_id = ids[s]
            amount = min(self.cfg.trade_target - accounts[buyer_id].balance, accounts[seller_id].balance)

            order = self.market.propose_trade(buyer_id, seller_id, amount, t)
            self.trade_counts["proposed"] += 1
            self._emit(t, SimEventKind.TRADE_PROPOSED, buyer_id, order_id=order.order_id, seller=seller_id, amount=amount)

            order = self.market.confirm_trade(order.order_id, t)
            if order.status == OrderStatus.ABORTED:
                self.trade_counts["aborted"] += 1
                self._emit(t, SimEventKind.TRADE_ABORTED, buyer_id, order_id=order.order_id, reason=order.abort_reason)
                continue
            self._emit(t, SimEventKind.TRADE_CONFIRMED, seller_id, order_id=order.order_id)

            window = self.fleet.contact_window(b, s, self.horizon)
            if window is None:
                raise InvariantError("contact gate", f"{buyer_id} and {seller_id} matched while out of range")
            self.window_rows.append({
                "t": t,
                "vehicle_i": buyer_id,
                "vehicle_j": seller_id,
                "distance_m": window.distance_m,
                "rel_speed_kmh": window.rel_speed_kmh,
                "L_total_s": window.L_total,
                "bound_s": window.bound_Lprime,
                "open_ended": window.open_ended,
            })

            attempt = attempt_trade(window, self.cfg.block_size_SB, self.cfg.data_rate_R, self.trade_pool,
                                    self.streams.mining, order.order_id)
            _, order = self.market.settle_trade(order.order_id, attempt.succeeded, t)
            self.attempt_rows.append({
                "t": t,
                "order_id": order.order_id,
                "buyer": buyer_id,
                "seller": seller_id,
                "amount": amount,
                "L_total_s": attempt.L_total,
                "L_trans_s": attempt.L_trans,
                "L_comp_s": attempt.L_comp_draw,
                "succeeded": attempt.succeeded,
                "status": order.status.value,
            })
            if order.status == OrderStatus.SETTLED:
                self.trade_counts["settled"] += 1
                self.latencies.append(attempt.latency)
                self._emit(t, SimEventKind.TRADE_SETTLED, buyer_id, order_id=order.order_id,
                           amount=amount, latency=attempt.latency)
            else:
                self.trade_counts["aborted"] += 1
                self._emit(t, SimEventKind.TRADE_ABORTED, buyer_id, order_id=order.order_id, reason=order.abort_reason)

    def _seal(self, t: float) -> None:
        if not self.ledger.pending:
            return
        block, latency = self.ledger.seal_block(self.pool, self.streams.mining, t)
        self._emit(t, SimEventKind.BLOCK_SEALED, block.miner_id, height=block.height,
                   txs=len(block.tx_digests), latency=latency)

    def _audit(self, before: float, net: float) -> None:
        after = self.market.total_balance()
        scale = max(1.0, abs(before), abs(after))
        if abs((after - before) - net) > 1e-9 * scale * max(1, self.fleet.n):
            raise InvariantError("conservation", f"sum of balances moved {after - before}, rules account for {net}")

    def _account(self, t: float, period_end: float, samples) -> None:
        with self._stage("record"):
            for s in samples:
                self.market.record_sample(s)
        before = self.market.total_balance()
        with self._stage("control"):
            net = self._control(t, samples)
        # No trading on the period boundary: balances reset right after it.
        if self.cfg.requires_trading and t < period_end - 1e-9:
            with self._stage("trading"):
                self._trading(t)
        with self._stage("audit"):
            self._audit(before, net)
        with self._stage("seal"):
            self._seal(t)

    # --- main loop ---
    def run(self) -> SimResult:
        cfg = self.cfg
        if self.accounting:
            for vid in self.fleet.ids:
                self.market.register_vehicle(vid, 0.0)
                self._emit(0.0, SimEventKind.REGISTRATION, vid)
        self._reset(0.0, 0)

        for period in range(cfg.n_periods):
            t0 = period * cfg.period_T
            period_end = t0 + cfg.period_T
            for k in range(1, cfg.ticks_per_period + 1):
                self.tick += 1
                t = min(t0 + k * cfg.sample_Ts, period_end)
                with self._stage("mobility"):
                    trace = self.fleet.advance(t)
                with self._stage("sample"):
                    samples = self._sample(t, trace)
                if self.accounting:
                    self._account(t, period_end, samples)

                self.series_rows.append({"t": t, "cumulative_co2_g": self.total_co2, "cumulative_nox_g": self.total_nox})
                if self.record_trajectories:
                    self.trajectory_frames.append(self.fleet.trajectory_rows())
                logger.debug("tick %d t=%.0f pending=%d", self.tick, t, len(self.ledger.pending))

            if period + 1 < cfg.n_periods:
                self._reset(period_end, period + 1)

        with self._stage("seal"):
            for block, latency in self.ledger.seal_all(self.pool, self.streams.mining, cfg.n_periods * cfg.period_T):
                self._emit(block.timestamp, SimEventKind.BLOCK_SEALED, block.miner_id, height=block.height,
                           txs=len(block.tx_digests), latency=latency)

        summary = self._summary()
        logger.info("✅ %s run finished: %d ticks, %.1f kg CO2, %d trades settled",
                    cfg.behavior_policy, self.tick, summary.total_co2_g / 1000.0, summary.trades_settled)
        return SimResult(summary, self.events, self.ledger, self.market, self._tables())

    def _summary(self) -> SimSummary:
        return SimSummary(
            behavior_policy=self.cfg.behavior_policy,
            ledger_confirmation=self.cfg.ledger_confirmation,
            n_vehicles=self.cfg.n_vehicles,
            n_periods=self.cfg.n_periods,
            ticks=self.tick,
            total_co2_g=self.total_co2,
            total_nox_g=self.total_nox,
            total_km=self.total_km,
            mean_epsilon=self.total_co2 / self.total_km if self.total_km > 0 else 0.0,
            trades_proposed=self.trade_counts["proposed"],
            trades_settled=self.trade_counts["settled"],
            trades_aborted=self.trade_counts["aborted"],
            mean_trade_latency=math.fsum(self.latencies) / len(self.latencies) if self.latencies else None,
            alerts=dict(self.alert_counts),
            blocks=self.ledger.height,
            tx_count=self.ledger.tx_count,
            final_balances=self.market.balances(),
        )

    def _tables(self) -> dict[str, pd.DataFrame]:
        tables = {
            "samples": pd.DataFrame(self.sample_rows, columns=TABLE_COLUMNS["samples"]),
            "account_ledger": pd.DataFrame(self.market.account_log, columns=TABLE_COLUMNS["account_ledger"]),
            "alerts": pd.DataFrame(self.market.alert_log, columns=TABLE_COLUMNS["alerts"]),
            "contact_windows": pd.DataFrame(self.window_rows, columns=TABLE_COLUMNS["contact_windows"]),
            "trade_attempts": pd.DataFrame(self.attempt_rows, columns=TABLE_COLUMNS["trade_attempts"]),
            "emission_series": pd.DataFrame(self.series_rows, columns=TABLE_COLUMNS["emission_series"]),
        }
        if self.record_trajectories and self.trajectory_frames:
            tables["trajectories"] = pd.concat(self.trajectory_frames, ignore_index=True)
        return tables


def run(cfg: ScenarioConfig, record_trajectories: bool = False, accounting: bool = True) -> SimResult:
    return Simulation(cfg, record_trajectories=record_trajectories, accounting=accounting).run()
