# tests/test_emissions.py
import numpy as np
import pytest

from emissions_module.emissions import (
    FLAG_ALL_IDLE,
    EmissionCurve,
    SpeedTrace,
    emission_rate,
    idle_grams,
    idle_rate,
    integrate_trace,
    make_sample,
    sample_emissions,
    sample_fleet,
)
from mobility_module.kinematics import VehicleState
from utilities_module.errors import EmissionDomainError, InvariantError, MissingTraceError

CURVE = EmissionCurve()


def test_emission_rate_matches_the_curve():
    """eps(v) = a/v + b + c v^2 at a few speeds, scalar and vectorized."""
    # ACT
    scalar = emission_rate(CURVE, 30.0)
    vector = emission_rate(CURVE, np.array([30.0, 60.0, 120.0]))

    # ASSERT
    assert scalar == pytest.approx(184.5)
    assert vector == pytest.approx([184.5, 148.0, 177.0])


def test_minimum_emission_speed_is_moderate():
    # ACT
    v_star = CURVE.optimal_speed_kmh
    grid = np.linspace(10.0, 140.0, 1301)

    # ASSERT
    assert v_star == pytest.approx(66.94, abs=0.01)
    assert grid[np.argmin(emission_rate(CURVE, grid))] == pytest.approx(v_star, abs=0.1)


def test_emission_rate_rejects_non_positive_speed():
    with pytest.raises(EmissionDomainError):
        emission_rate(CURVE, 0.0)
    with pytest.raises(EmissionDomainError):
        emission_rate(CURVE, np.array([10.0, -1.0]))


def test_curve_with_minimum_outside_the_moderate_band_is_rejected():
    # c = 0.05 puts the minimum near 31 km/h
    with pytest.raises(InvariantError):
        EmissionCurve(coeff_c=0.05)


def test_default_idle_rate():
    """10 minutes idling = 1 km at 8 km/h."""
    # ACT
    per_hour = idle_rate(CURVE)

    # ASSERT
    assert per_hour == pytest.approx(455.32 * 6.0)
    assert idle_grams(CURVE, 600.0) == pytest.approx(455.32)


def test_integrate_trace_at_constant_speed():
    # ARRANGE: 15 minutes at 60 km/h
    trace = SpeedTrace(np.array([900.0]), np.array([60.0]))

    # ACT
    grams, km, idle_s = integrate_trace(trace, CURVE)

    # ASSERT
    assert km == pytest.approx(15.0)
    assert grams == pytest.approx(15.0 * 148.0)
    assert idle_s == 0.0


def test_grams_per_hour_grow_with_speed():
    """a + b v + c v^3 is increasing, so a faster hour always emits more."""
    # ARRANGE
    speeds = np.array([20.0, 40.0, 66.9, 90.0, 130.0])
    trace = SpeedTrace(np.array([3600.0]), speeds[None, :])

    # ACT
    grams, _, _ = integrate_trace(trace, CURVE)

    # ASSERT
    assert np.all(np.diff(grams) > 0)


def test_all_idle_interval_reports_idle_equivalent():
    # ARRANGE
    trace = SpeedTrace(np.array([300.0, 600.0]), np.array([0.0, 0.0]))
    grams, km, _ = integrate_trace(trace, CURVE)

    # ACT
    sample = make_sample("v000", 900.0, grams, km, 900.0, CURVE)

    # ASSERT
    assert sample.distance == 0.0
    assert FLAG_ALL_IDLE in sample.flags
    assert sample.epsilon == pytest.approx(emission_rate(CURVE, 8.0))


def test_zero_length_interval_gives_zero_sample():
    sample = make_sample("v000", 0.0, 0.0, 0.0, 0.0, CURVE)
    assert sample.epsilon == 0.0 and sample.distance == 0.0


def test_sample_emissions_needs_a_trace():
    # ARRANGE
    vehicle = VehicleState("v001", clock_s=900.0)

    # ACT / ASSERT
    with pytest.raises(MissingTraceError):
        sample_emissions(vehicle, 900.0, CURVE)


def test_sample_emissions_averages_over_the_interval():
    # ARRANGE: half the interval at 60 km/h, half stopped
    trace = SpeedTrace(np.array([450.0, 450.0]), np.array([60.0, 0.0]))
    vehicle = VehicleState("v002", clock_s=900.0, trace=trace)

    # ACT
    sample = sample_emissions(vehicle, 900.0, CURVE)

    # ASSERT
    expected_grams = 7.5 * 148.0 + idle_grams(CURVE, 450.0)
    assert sample.distance == pytest.approx(7.5)
    assert sample.epsilon == pytest.approx(expected_grams / 7.5)
    assert sample.timestamp == 900.0


def test_sample_emissions_rejects_a_trace_of_the_wrong_length():
    trace = SpeedTrace(np.array([600.0]), np.array([60.0]))
    with pytest.raises(MissingTraceError):
        sample_emissions(VehicleState("v003", trace=trace), 900.0, CURVE)


def test_fleet_noise_is_reproducible():
    # ARRANGE
    trace = SpeedTrace(np.array([900.0]), np.array([[50.0, 80.0, 110.0]]))
    ids = ["v000", "v001", "v002"]

    # ACT
    first = sample_fleet(ids, 900.0, trace, CURVE, np.random.default_rng(3), 0.05)
    second = sample_fleet(ids, 900.0, trace, CURVE, np.random.default_rng(3), 0.05)
    clean = sample_fleet(ids, 900.0, trace, CURVE)

    # ASSERT
    assert [s.epsilon for s in first] == [s.epsilon for s in second]
    assert [s.epsilon for s in first] != [s.epsilon for s in clean]
    assert [s.vehicle_id for s in clean] == ids


def test_emission_curve_lies_below_its_chords():
    # ARRANGE
    rng = np.random.default_rng(31)
    v1 = rng.uniform(5.0, 200.0, 1000)
    v2 = rng.uniform(5.0, 200.0, 1000)
    w = rng.uniform(0.0, 1.0, 1000)

    # ACT
    on_curve = emission_rate(CURVE, w * v1 + (1.0 - w) * v2)
    chord = w * emission_rate(CURVE, v1) + (1.0 - w) * emission_rate(CURVE, v2)

    # ASSERT
    assert np.all(on_curve <= chord + 1e-9)


def test_emission_rate_rises_above_the_optimal_speed():
    speeds = np.linspace(CURVE.optimal_speed_kmh, 250.0, 200)
    assert np.all(np.diff(emission_rate(CURVE, speeds)) > 0)


def test_splitting_a_trace_does_not_change_its_grams():
    """Summing per-segment integrals equals integrating the whole trace at once."""
    # ARRANGE
    rng = np.random.default_rng(8)
    durations = rng.uniform(1.0, 120.0, 60)
    speeds = np.where(rng.random(60) < 0.15, 0.0, rng.uniform(5.0, 140.0, 60))

    # ACT
    whole, whole_km, _ = integrate_trace(SpeedTrace(durations, speeds), CURVE)
    pieces = [integrate_trace(SpeedTrace(durations[k:k + 1], speeds[k:k + 1]), CURVE) for k in range(60)]

    # ASSERT
    assert sum(p[0] for p in pieces) == pytest.approx(whole, rel=1e-9)
    assert sum(p[1] for p in pieces) == pytest.approx(whole_km, rel=1e-9)


def test_two_speed_interval_reports_the_distance_weighted_rate():
    # ARRANGE: 450 s at 40 km/h (5 km), 450 s at 120 km/h (15 km)
    trace = SpeedTrace(np.array([450.0, 450.0]), np.array([40.0, 120.0]))
    vehicle = VehicleState("v004", clock_s=900.0, trace=trace)

    # ACT
    sample = sample_emissions(vehicle, 900.0, CURVE)

    # ASSERT
    expected = (5.0 * emission_rate(CURVE, 40.0) + 15.0 * emission_rate(CURVE, 120.0)) / 20.0
    assert sample.distance == pytest.approx(20.0)
    assert sample.epsilon == pytest.approx(expected)
    assert sample.epsilon == pytest.approx(173.5)
