# mobility_module/fleet.py
# Vectorized kinematics for the whole fleet.
#
# Each period pre-draws a target-speed schedule (one slot per redraw_interval)
# from the mobility stream. Speeds are piecewise constant between redraw
# boundaries, so positions and distances are integrated exactly. A speed cap
# set by the behavior policy applies from the moment it is set until the
# period reset.

import math

import numpy as np
import pandas as pd

from emissions_module.emissions import SpeedTrace
from mobility_module.contact import ContactWindow, OpenPlane, RingRoad, Trajectory, contact_window
from mobility_module.kinematics import MODE_FREE, MODE_SPEED_CAPPED, VehicleState, apply_behavior_policy
from scenario_module.units import M_PER_KM, ms_to_kmh


def vehicle_ids(n: int) -> list[str]:
    width = max(3, len(str(n - 1)))
    return [f"v{idx:0{width}d}" for idx in range(n)]


class Fleet:
    def __init__(self, cfg, rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng
        self.n = cfg.n_vehicles
        self.ids = vehicle_ids(self.n)
        self.ring = cfg.road_model == "ring-road"
        self.road = RingRoad(cfg.circumference) if self.ring else OpenPlane()

        # Initial placement
        if self.ring:
            self.arc = rng.uniform(0.0, cfg.circumference, self.n)
            self.direction = rng.choice([-1.0, 1.0], self.n) if cfg.two_way else np.ones(self.n)
        else:
            self.xy = rng.uniform(0.0, cfg.plane_size, (self.n, 2))

        self.cap = np.full(self.n, np.inf)
        self.clock = 0.0
        self.period_start = 0.0
        self.odometer_km = np.zeros(self.n)
        self.cumulative_grams = np.zeros(self.n)
        self.last_trace: SpeedTrace | None = None
        self.n_slots = math.ceil(cfg.period_T / cfg.redraw_interval - 1e-9) + 1
        self.targets = np.zeros((self.n_slots, self.n))
        self.stops = np.zeros((self.n_slots, self.n), dtype=bool)
        self.headings = np.zeros((self.n_slots, self.n))

    # --- schedule ---
    def start_period(self, t0: float) -> None:
        cfg = self.cfg
        self.period_start = t0
        self.clock = t0
        self.targets = self.rng.uniform(cfg.speed_min, cfg.speed_max, (self.n_slots, self.n))
        self.stops = self.rng.random((self.n_slots, self.n)) < cfg.stop_probability
        if not self.ring:
            self.headings = self.rng.uniform(0.0, 2.0 * math.pi, (self.n_slots, self.n))
        self.cap[:] = np.inf
        self.odometer_km[:] = 0.0
        self.cumulative_grams[:] = 0.0
        self.last_trace = None

    def _slot(self, t: float) -> int:
        k = math.floor((t - self.period_start) / self.cfg.redraw_interval + 1e-9)
        return min(max(k, 0), self.n_slots - 1)

    def speeds_at(self, t: float) -> np.ndarray:
        """Speeds (m/s) of every vehicle from t until the next redraw boundary."""
        k = self._slot(t)
        speeds = np.minimum(np.minimum(self.targets[k], self.cap), self.cfg.speed_limit)
        return np.where(self.stops[k], 0.0, speeds)

    def _velocity(self, t: float, speeds: np.ndarray) -> np.ndarray:
        if self.ring:
            return (self.direction * speeds)[:, None]
        h = self.headings[self._slot(t)]
        return np.stack([speeds * np.cos(h), speeds * np.sin(h)], axis=1)

    def _breakpoints(self, t_from: float, t_to: float) -> list[float]:
        step = self.cfg.redraw_interval
        k = self._slot(t_from) + 1
        points = [t_from]
        while self.period_start + k * step < t_to - 1e-9:
            points.append(self.period_start + k * step)
            k += 1
        points.append(t_to)
        return points

    # --- motion ---
    def advance(self, t_to: float) -> SpeedTrace:
        """Moves every vehicle from the fleet clock to t_to and returns the speed trace (km/h)."""
        points = self._breakpoints(self.clock, t_to)
        durations, speeds = [], []
        for a, b in zip(points[:-1], points[1:]):
            v = self.speeds_at(a)
            dt = b - a
            if self.ring:
                self.arc = (self.arc + self.direction * v * dt) % self.cfg.circumference
            else:
                self.xy = self.xy + dt * self._velocity(a, v)
            durations.append(dt)
            speeds.append(v)
        self.clock = t_to

        if not durations:
            durations, speeds = [0.0], [np.zeros(self.n)]
        durations_s = np.asarray(durations)
        speeds_ms = np.vstack(speeds)
        self.odometer_km += (speeds_ms * durations_s[:, None]).sum(axis=0) / M_PER_KM
        self.last_trace = SpeedTrace(durations_s=durations_s, speeds_kmh=ms_to_kmh(speeds_ms))
        return self.last_trace

    def add_grams(self, grams: np.ndarray) -> None:
        self.cumulative_grams += grams

    # --- views ---
    def positions_xy(self) -> np.ndarray:
        if self.ring:
            x, y = self.road.position_xy(self.arc)
            return np.stack([x, y], axis=1)
        return self.xy.copy()

    def state(self, idx: int) -> VehicleState:
        speed = float(self.speeds_at(self.clock)[idx])
        capped = bool(np.isfinite(self.cap[idx]))
        trace = None
        if self.last_trace is not None:
            trace = SpeedTrace(self.last_trace.durations_s, self.last_trace.speeds_kmh[:, idx])
        common = dict(
            vehicle_id=self.ids[idx],
            behavior_mode=MODE_SPEED_CAPPED if capped else MODE_FREE,
            speed_cap=float(self.cap[idx]) if capped else None,
            cumulative_grams=float(self.cumulative_grams[idx]),
            odometer_km=float(self.odometer_km[idx]),
            clock_s=self.clock,
            trace=trace,
        )
        if self.ring:
            arc = float(self.arc[idx])
            theta = arc / self.road.radius
            signed = float(self.direction[idx]) * speed
            return VehicleState(
                position=tuple(float(p) for p in self.road.position_xy(arc)),
                velocity=(-signed * math.sin(theta), signed * math.cos(theta)),
                arc_position=arc,
                arc_speed=signed,
                **common,
            )
        h = float(self.headings[self._slot(self.clock)][idx])
        return VehicleState(
            position=(float(self.xy[idx, 0]), float(self.xy[idx, 1])),
            velocity=(speed * math.cos(h), speed * math.sin(h)),
            **common,
        )

    def trajectory(self, idx: int, horizon: float) -> Trajectory:
        """Road-coordinate trajectory over [clock, clock + horizon] under the current caps."""
        points = self._breakpoints(self.clock, self.clock + horizon)
        segments = []
        for a, b in zip(points[:-1], points[1:]):
            velocity = self._velocity(a, self.speeds_at(a))[idx]
            segments.append((b - a, tuple(float(v) for v in velocity)))
        start = (float(self.arc[idx]),) if self.ring else (float(self.xy[idx, 0]), float(self.xy[idx, 1]))
        return Trajectory(self.ids[idx], self.clock, start, tuple(segments))

    def gaps(self, idx: int) -> tuple[np.ndarray, np.ndarray]:
        """(distance to every vehicle, in-range mask for comm_range_r); self excluded."""
        r = self.cfg.comm_range_r
        if self.ring:
            half = self.cfg.circumference / 2.0
            rel = (self.arc - self.arc[idx] + half) % self.cfg.circumference - half
            dist = 2.0 * self.road.radius * np.abs(np.sin(rel / (2.0 * self.road.radius)))
            mask = np.abs(rel) <= self.road.arc_range(r)
        else:
            dist = np.hypot(*(self.xy - self.xy[idx]).T)
            mask = dist <= r
        mask[idx] = False
        return dist, mask

    def neighbors(self, idx: int) -> list[int]:
        """In-range vehicles, nearest first, ties by lowest id."""
        dist, mask = self.gaps(idx)
        candidates = np.flatnonzero(mask)
        return sorted(candidates.tolist(), key=lambda j: (dist[j], j))

    def contact_window(self, i: int, j: int, horizon: float) -> ContactWindow | None:
        return contact_window(self.trajectory(i, horizon), self.trajectory(j, horizon),
                              self.cfg.comm_range_r, self.clock, horizon, road=self.road)

    # --- behavior ---
    def apply_alert(self, idx: int, alert) -> bool:
        """Runs the behavior policy for one alert; True when the vehicle got capped."""
        before = self.state(idx)
        after = apply_behavior_policy(before, alert, self.cfg.behavior_policy, self.cfg.moderate_target)
        if after.speed_cap is not None and after.speed_cap != before.speed_cap:
            self.cap[idx] = after.speed_cap
            return True
        return False

    def trajectory_rows(self) -> pd.DataFrame:
        xy = self.positions_xy()
        return pd.DataFrame({
            "t": self.clock,
            "vehicle_id": self.ids,
            "x": xy[:, 0],
            "y": xy[:, 1],
            "speed_kmh": ms_to_kmh(self.speeds_at(self.clock)),
        })
