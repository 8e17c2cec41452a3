# mobility_module/kinematics.py
# Vehicle state, the behavior policy, and the closed-form communication bounds.

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import pandas as pd

from allowance_module.market import AlertState
from scenario_module.units import kmh_to_ms, ms_to_kmh
from utilities_module.errors import InvariantError

MODE_FREE = "Free"
MODE_SPEED_CAPPED = "SpeedCapped"

# Constant of the contact-time bound r / (1.8 v) with r in meters and v in km/h.
BOUND_FACTOR = 1.8


@dataclass(frozen=True)
class VehicleState:
    """Point vehicle. position (m) and velocity (m/s) are planar; on a ring road
    arc_position (m) and arc_speed (signed m/s) carry the road coordinates."""

    vehicle_id: str
    position: tuple = (0.0, 0.0)
    velocity: tuple = (0.0, 0.0)
    behavior_mode: str = MODE_FREE
    speed_cap: Optional[float] = None
    cumulative_grams: float = 0.0
    odometer_km: float = 0.0
    clock_s: float = 0.0
    trace: Optional[object] = None
    arc_position: Optional[float] = None
    arc_speed: Optional[float] = None

    @property
    def speed(self) -> float:
        return math.hypot(*self.velocity)

    @property
    def speed_kmh(self) -> float:
        return ms_to_kmh(self.speed)

    @property
    def speed_cap_kmh(self) -> Optional[float]:
        return None if self.speed_cap is None else ms_to_kmh(self.speed_cap)


def distance(i: VehicleState, j: VehicleState) -> float:
    return math.hypot(i.position[0] - j.position[0], i.position[1] - j.position[1])


def window_upper_bound(r: float, rel_speed_kmh: float) -> float:
    """Upper bound on contact time, r / (1.8 v_rel). Zero relative speed is unbounded (inf)."""
    if rel_speed_kmh < 0:
        raise InvariantError("rel_speed >= 0", f"relative speed must be non-negative, got {rel_speed_kmh}")
    if rel_speed_kmh == 0:
        return math.inf
    return r / (BOUND_FACTOR * rel_speed_kmh)


def trans_latency(S_B: float, R: float) -> float:
    """Time to push one block-sized payload over the link, S_B / R."""
    if not (S_B > 0 and R > 0):
        raise InvariantError("S_B > 0 and R > 0", f"got S_B={S_B}, R={R}")
    return S_B / R


def latency_bound_table(ranges, rel_speeds_kmh) -> pd.DataFrame:
    rows = [
        {"comm_range_m": float(r), "rel_speed_kmh": float(v), "bound_s": window_upper_bound(float(r), float(v))}
        for r in ranges
        for v in rel_speeds_kmh
    ]
    return pd.DataFrame(rows, columns=["comm_range_m", "rel_speed_kmh", "bound_s"])


def _is_speed_alert(alert) -> bool:
    kind = getattr(alert, "kind", alert)
    return kind == AlertState.SPEED_ALERT


def apply_behavior_policy(vehicle: VehicleState, alert, policy: str, moderate_target: float = kmh_to_ms(72.0)) -> VehicleState:
    """dlt-controlled vehicles that receive a SpeedAlert above the moderate target
    are capped at it. The baseline policy ignores alerts."""
    if policy != "dlt-controlled" or not _is_speed_alert(alert):
        return vehicle
    if vehicle.speed <= moderate_target:
        return vehicle

    scale = moderate_target / vehicle.speed
    arc_speed = None if vehicle.arc_speed is None else vehicle.arc_speed * scale
    return replace(
        vehicle,
        behavior_mode=MODE_SPEED_CAPPED,
        speed_cap=moderate_target,
        velocity=tuple(float(v) for v in np.asarray(vehicle.velocity) * scale),
        arc_speed=arc_speed,
    )
