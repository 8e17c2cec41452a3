# emissions_module/emissions.py
# Speed-dependent CO2 surrogate and per-interval sampling.
#
# Curve: eps(v) = a/v + b + c*v^2 grams/km with v in km/h. The a/v term covers
# stop-and-go driving, b the rolling load and c*v^2 aerodynamic drag. With the
# default calibration (a=3000, b=80, c=0.005) the minimum sits at ~66.9 km/h.

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from scenario_module.units import s_to_h
from utilities_module.errors import EmissionDomainError, InvariantError, MissingTraceError

# Moderate-speed band (km/h) where the curve minimum must fall.
MODERATE_BAND_KMH = (64.0, 97.0)

FLAG_ALL_IDLE = "all_idle"
FLAG_NOISY = "noisy"


@dataclass(frozen=True)
class EmissionCurve:
    coeff_a: float = 3000.0
    coeff_b: float = 80.0
    coeff_c: float = 0.005
    idle_reference_speed_kmh: float = 8.0
    idle_reference_minutes: float = 10.0
    idle_rate_g_per_h: Optional[float] = None

    def __post_init__(self):
        if min(self.coeff_a, self.coeff_b, self.coeff_c) <= 0:
            raise InvariantError("emission curve", "coeff_a, coeff_b and coeff_c must all be > 0")
        low, high = MODERATE_BAND_KMH
        if not (low <= self.optimal_speed_kmh <= high):
            raise InvariantError(
                "emission curve",
                f"minimum-emission speed {self.optimal_speed_kmh:.1f} km/h is outside [{low}, {high}] km/h",
            )

    @property
    def optimal_speed_kmh(self) -> float:
        """v* = (a / 2c)^(1/3), where d/dv (a/v + b + c v^2) = 0."""
        return (self.coeff_a / (2.0 * self.coeff_c)) ** (1.0 / 3.0)


@dataclass(frozen=True)
class SpeedTrace:
    """Piecewise-constant speeds. speeds_kmh is (segments,) for one vehicle or
    (segments, vehicles) for a fleet; durations_s is always (segments,)."""

    durations_s: np.ndarray
    speeds_kmh: np.ndarray

    @property
    def duration_s(self) -> float:
        return float(np.sum(self.durations_s))


@dataclass(frozen=True)
class EmissionSample:
    vehicle_id: str
    timestamp: float
    epsilon: float
    distance: float
    grams: float = 0.0
    flags: frozenset = field(default_factory=frozenset)

    @property
    def all_idle(self) -> bool:
        return FLAG_ALL_IDLE in self.flags


def emission_rate(curve: EmissionCurve, speed):
    """grams-CO2-per-km at speed (km/h). Accepts a float or a numpy array."""
    if isinstance(speed, (int, float)):
        if speed <= 0:
            raise EmissionDomainError(f"emission_rate needs speed > 0 km/h, got {speed}; use idle_rate for stops")
        return curve.coeff_a / speed + curve.coeff_b + curve.coeff_c * speed * speed

    v = np.asarray(speed, dtype=float)
    if np.any(v <= 0):
        raise EmissionDomainError("emission_rate needs every speed > 0 km/h; use idle_rate for stops")
    return curve.coeff_a / v + curve.coeff_b + curve.coeff_c * v * v


def idle_rate(curve: EmissionCurve) -> float:
    """Idling flow in grams/hour. By default 10 min of idling emits as much as
    driving 1 km at 8 km/h."""
    if curve.idle_rate_g_per_h is not None:
        return curve.idle_rate_g_per_h
    grams_per_reference_km = emission_rate(curve, curve.idle_reference_speed_kmh)
    return grams_per_reference_km * 60.0 / curve.idle_reference_minutes


def idle_grams(curve: EmissionCurve, duration_s: float) -> float:
    return idle_rate(curve) * s_to_h(duration_s)


def idle_equivalent_epsilon(curve: EmissionCurve) -> float:
    """Per-km value reported for an interval without any distance."""
    return emission_rate(curve, curve.idle_reference_speed_kmh)


def nox_proxy(grams_co2, nox_scale: float):
    return grams_co2 * nox_scale


def integrate_trace(trace: SpeedTrace, curve: EmissionCurve):
    """Integrates grams, km and idle seconds over a trace.

    Returns scalars for a single-vehicle trace and per-vehicle arrays for a
    fleet trace.
    """
    durations = np.asarray(trace.durations_s, dtype=float)
    speeds = np.asarray(trace.speeds_kmh, dtype=float)
    if np.any(speeds < 0) or np.any(durations < 0):
        raise EmissionDomainError("speed trace contains negative speeds or durations")
    if speeds.ndim == 2:
        durations = durations[:, None]

    moving = speeds > 0
    km = np.where(moving, speeds * s_to_h(durations), 0.0)
    driving = np.where(moving, emission_rate(curve, np.where(moving, speeds, 1.0)) * km, 0.0)
    idle_s = np.where(moving, 0.0, np.broadcast_to(durations, speeds.shape))
    grams = driving + idle_rate(curve) * s_to_h(idle_s)

    totals = grams.sum(axis=0), km.sum(axis=0), idle_s.sum(axis=0)
    if speeds.ndim == 1:
        return tuple(float(x) for x in totals)
    return totals


def make_sample(
    vehicle_id: str,
    timestamp: float,
    grams: float,
    km: float,
    interval_s: float,
    curve: EmissionCurve,
    noise_factor: Optional[float] = None,
) -> EmissionSample:
    if interval_s == 0:
        # Cumulative emissions restart from zero at each period start.
        return EmissionSample(vehicle_id=vehicle_id, timestamp=timestamp, epsilon=0.0, distance=0.0)

    flags = set()
    if km > 0:
        epsilon = grams / km
    else:
        epsilon = idle_equivalent_epsilon(curve)
        flags.add(FLAG_ALL_IDLE)
    if noise_factor is not None:
        epsilon = epsilon * max(0.0, noise_factor)
        flags.add(FLAG_NOISY)

    return EmissionSample(
        vehicle_id=vehicle_id,
        timestamp=timestamp,
        epsilon=float(epsilon),
        distance=float(km),
        grams=float(grams),
        flags=frozenset(flags),
    )


def _noise_factors(rng: Optional[np.random.Generator], noise_sd: float, size: int):
    if rng is None or noise_sd <= 0:
        return [None] * size
    return list(1.0 + noise_sd * rng.standard_normal(size))


def sample_emissions(vehicle, interval: float, curve: EmissionCurve, noise_rng=None, noise_sd: float = 0.0) -> EmissionSample:
    """Average grams/km of one vehicle over the elapsed sampling interval.

    The vehicle must carry a speed trace (vehicle.trace) covering exactly the
    interval; its clock (vehicle.clock_s) is the sample timestamp.
    """
    if interval == 0:
        return make_sample(vehicle.vehicle_id, vehicle.clock_s, 0.0, 0.0, 0.0, curve)

    trace = getattr(vehicle, "trace", None)
    if trace is None:
        raise MissingTraceError(f"vehicle {vehicle.vehicle_id} has no speed trace")
    if abs(trace.duration_s - interval) > 1e-6 * max(1.0, interval):
        raise MissingTraceError(
            f"vehicle {vehicle.vehicle_id} trace covers {trace.duration_s:.3f} s, interval is {interval:.3f} s"
        )

    grams, km, _ = integrate_trace(trace, curve)
    noise = _noise_factors(noise_rng, noise_sd, 1)[0]
    return make_sample(vehicle.vehicle_id, vehicle.clock_s, grams, km, interval, curve, noise)


def sample_fleet(vehicle_ids, timestamp: float, trace: SpeedTrace, curve: EmissionCurve, noise_rng=None, noise_sd: float = 0.0):
    """Vectorized sampling for a whole fleet sharing one segment grid."""
    grams, km, _ = integrate_trace(trace, curve)
    noise = _noise_factors(noise_rng, noise_sd, len(vehicle_ids))
    return [
        make_sample(vid, timestamp, float(g), float(k), trace.duration_s, curve, n)
        for vid, g, k, n in zip(vehicle_ids, grams, km, noise)
    ]
