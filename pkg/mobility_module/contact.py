# mobility_module/contact.py
# Contact windows between two vehicles, solved analytically per
# constant-velocity segment and stitched across segments.

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from mobility_module.kinematics import VehicleState, window_upper_bound
from scenario_module.units import ms_to_kmh
from utilities_module.errors import MissingTraceError


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-constant velocity in road coordinates, starting at t0.
    segments: ((duration_s, velocity), ...), velocity a tuple matching start."""

    vehicle_id: str
    t0: float
    start: tuple
    segments: tuple

    @property
    def duration_s(self) -> float:
        return float(sum(d for d, _ in self.segments))


@dataclass(frozen=True)
class ContactWindow:
    pair: tuple
    start_t: float
    L_total: float
    bound_Lprime: float
    open_ended: bool = False
    distance_m: float = 0.0
    rel_speed_kmh: float = 0.0


class OpenPlane:
    """Euclidean plane; coordinates are (x, y) meters."""

    name = "open-plane"

    def coords(self, state: VehicleState):
        return np.asarray(state.position, dtype=float), np.asarray(state.velocity, dtype=float)

    def gap(self, rel_pos: np.ndarray) -> float:
        return float(np.hypot(*rel_pos))

    def in_range(self, rel_pos: np.ndarray, r: float) -> bool:
        return self.gap(rel_pos) <= r

    def exit_time(self, rel_pos: np.ndarray, rel_vel: np.ndarray, r: float) -> float:
        """First time |p + u t| exceeds r, starting in range: larger root of
        (u.u) t^2 + 2 (p.u) t + (p.p - r^2) = 0."""
        a = float(rel_vel @ rel_vel)
        if a == 0.0:
            return math.inf
        b = 2.0 * float(rel_pos @ rel_vel)
        c = float(rel_pos @ rel_pos) - r * r
        disc = max(0.0, b * b - 4.0 * a * c)
        return max(0.0, (-b + math.sqrt(disc)) / (2.0 * a))


class RingRoad:
    """Circle of the given circumference; coordinates are (arc position,) with a
    signed arc speed. Distance is the straight chord between the two points."""

    name = "ring-road"

    def __init__(self, circumference: float):
        self.circumference = circumference
        self.radius = circumference / (2.0 * math.pi)

    def coords(self, state: VehicleState):
        if state.arc_position is None or state.arc_speed is None:
            raise MissingTraceError(f"vehicle {state.vehicle_id} has no ring-road coordinates")
        return np.array([state.arc_position], dtype=float), np.array([state.arc_speed], dtype=float)

    def wrapped(self, rel_arc: float) -> float:
        """Signed arc gap in [-C/2, C/2)."""
        half = self.circumference / 2.0
        return (rel_arc + half) % self.circumference - half

    def arc_range(self, r: float) -> float:
        """Arc gap at which the chord equals r."""
        if r >= 2.0 * self.radius:
            return math.inf
        return 2.0 * self.radius * math.asin(r / (2.0 * self.radius))

    def chord(self, rel_arc: float) -> float:
        return 2.0 * self.radius * abs(math.sin(self.wrapped(rel_arc) / (2.0 * self.radius)))

    def gap(self, rel_pos: np.ndarray) -> float:
        return self.chord(float(rel_pos[0]))

    def in_range(self, rel_pos: np.ndarray, r: float) -> bool:
        return abs(self.wrapped(float(rel_pos[0]))) <= self.arc_range(r)

    def exit_time(self, rel_pos: np.ndarray, rel_vel: np.ndarray, r: float) -> float:
        s_r = self.arc_range(r)
        w = float(rel_vel[0])
        if w == 0.0 or math.isinf(s_r):
            return math.inf
        g = self.wrapped(float(rel_pos[0]))
        boundary = s_r if w > 0 else -s_r
        return max(0.0, (boundary - g) / w)

    def position_xy(self, arc):
        angle = np.asarray(arc, dtype=float) / self.radius
        return self.radius * np.cos(angle), self.radius * np.sin(angle)


RoadModel = Union[OpenPlane, RingRoad]


def _as_trajectory(vehicle, road: RoadModel, t: float) -> Trajectory:
    if isinstance(vehicle, Trajectory):
        return vehicle
    if vehicle is None:
        raise MissingTraceError("contact_window needs two defined trajectories")
    pos, vel = road.coords(vehicle)
    return Trajectory(vehicle.vehicle_id, t, tuple(pos), ((math.inf, tuple(vel)),))


def _velocity_at(traj: Trajectory, offset: float):
    """(velocity, time left in the segment) at offset seconds after traj.t0."""
    elapsed = 0.0
    for duration, velocity in traj.segments:
        if offset < elapsed + duration:
            return np.asarray(velocity, dtype=float), elapsed + duration - offset
        elapsed += duration
    return None, 0.0


def contact_window(
    i: Union[VehicleState, Trajectory],
    j: Union[VehicleState, Trajectory],
    r: float,
    t: float,
    horizon: float,
    road: Optional[RoadModel] = None,
) -> Optional[ContactWindow]:
    """Connected in-range interval starting at t, or None when out of range at t.

    A window still open at t + horizon is returned open_ended with L_total = inf.
    VehicleState arguments are taken to keep their velocity over the horizon.
    """
    road = road or OpenPlane()
    ti, tj = _as_trajectory(i, road, t), _as_trajectory(j, road, t)
    for traj in (ti, tj):
        if traj.t0 > t or traj.t0 + traj.duration_s < t + horizon - 1e-9:
            raise MissingTraceError(f"trajectory of {traj.vehicle_id} does not cover [{t}, {t + horizon}]")

    # Relative state at t
    rel_pos = np.asarray(ti.start, dtype=float) - np.asarray(tj.start, dtype=float)
    for traj, sign in ((ti, 1.0), (tj, -1.0)):
        offset = 0.0
        for duration, velocity in traj.segments:
            step = min(duration, t - traj.t0 - offset)
            if step <= 0:
                break
            rel_pos = rel_pos + sign * step * np.asarray(velocity, dtype=float)
            offset += step

    if not road.in_range(rel_pos, r):
        return None

    vi, _ = _velocity_at(ti, t - ti.t0)
    vj, _ = _velocity_at(tj, t - tj.t0)
    rel_speed_kmh = 0.0 if vi is None or vj is None else ms_to_kmh(float(np.linalg.norm(vi - vj)))
    pair = (ti.vehicle_id, tj.vehicle_id)
    gap = road.gap(rel_pos)

    elapsed = 0.0
    while elapsed < horizon:
        vi, left_i = _velocity_at(ti, t - ti.t0 + elapsed)
        vj, left_j = _velocity_at(tj, t - tj.t0 + elapsed)
        if vi is None or vj is None:
            break
        step = min(left_i, left_j, horizon - elapsed)
        rel_vel = vi - vj
        exit_in = road.exit_time(rel_pos, rel_vel, r)
        if exit_in <= step:
            return ContactWindow(pair, t, elapsed + exit_in, window_upper_bound(r, rel_speed_kmh),
                                 distance_m=gap, rel_speed_kmh=rel_speed_kmh)
        rel_pos = rel_pos + step * rel_vel
        elapsed += step

    return ContactWindow(pair, t, math.inf, window_upper_bound(r, rel_speed_kmh), open_ended=True,
                         distance_m=gap, rel_speed_kmh=rel_speed_kmh)
