import numpy as np
import pytest

from physics.energy import (
    BatteryState,
    OrbitParams,
    Phase,
    SolarParams,
    battery_step,
    charging_power,
    orbit_time,
    phase_of,
    shadow_half_angle,
    solar_energy,
    time_to_shadow,
    time_to_sun,
    total_energy,
    wrap_angle,
)
from utils.utils_errors import InvalidParameterError, PreconditionError

OMEGA = 7.29e-5
OP = OrbitParams(R_e=6.378e6, h_s=1.0e6, omega_dot=OMEGA)
SP = SolarParams(eta_s=0.19, psi=500.0, B=4.0)


def scalar_half_angle(R_e, h_s, phi):
    import math

    if phi > math.asin(R_e / (R_e + h_s)):
        return 0.0
    num = R_e**2 * math.cos(phi) ** 2 - (2 * R_e * h_s + h_s**2) * math.sin(phi) ** 2
    arg = num / ((R_e + h_s) * math.cos(phi))
    return math.asin(max(-1.0, min(1.0, arg)))


def test_shadow_vanishes_beyond_threshold():
    threshold = np.arcsin(6378 / 7378)
    assert threshold == pytest.approx(1.04408, abs=1e-5)
    for phi in np.linspace(threshold + 1e-6, np.pi / 2, 50):
        assert shadow_half_angle(OrbitParams(phi_sun=float(phi))) == 0.0
    assert shadow_half_angle(OrbitParams(phi_sun=np.deg2rad(70))) == 0.0


def test_shadow_half_angle_matches_scalar_oracle():
    for phi in [0.0, 0.3, 0.5, 0.9, 1.0, 1.04]:
        assert shadow_half_angle(OrbitParams(phi_sun=phi)) == pytest.approx(
            scalar_half_angle(6.378e6, 1.0e6, phi), abs=1e-12
        )


def test_shadow_half_angle_is_finite_and_in_range():
    for phi in np.linspace(0.0, 1.5, 200):
        value = shadow_half_angle(OrbitParams(phi_sun=float(phi)))
        assert np.isfinite(value)
        assert 0.0 <= value <= np.pi / 2


def test_phase_rules():
    assert phase_of(0.0, 0.0) is Phase.SUN
    assert phase_of(2.5, 0.0) is Phase.SUN
    assert phase_of(0.0, 0.4) is Phase.SHADOW
    assert phase_of(0.4, 0.4) is Phase.SUN
    assert phase_of(-0.4, 0.4) is Phase.SUN


def test_time_to_shadow_examples():
    assert time_to_shadow(-np.pi, np.pi / 4, OP) == pytest.approx((3 * np.pi / 4) / OMEGA)
    assert time_to_shadow(0.0, 0.0, OP) == pytest.approx(2 * np.pi / OMEGA)
    assert time_to_shadow(0.0, 0.0, OrbitParams(phi_sun=2.0)) == pytest.approx(2 * np.pi / OMEGA)


def test_time_to_shadow_from_sunlit_side():
    theta_0 = 1.0
    assert time_to_shadow(theta_0, theta_0, OP) == pytest.approx((2 * np.pi - 2.0) / OMEGA)
    assert time_to_shadow(1.5, theta_0, OP) == pytest.approx((2 * np.pi - 1.0 - 1.5) / OMEGA)


def test_time_to_shadow_needs_sunlight():
    with pytest.raises(PreconditionError):
        time_to_shadow(0.0, 0.5, OP)


def test_time_to_sun_examples():
    theta_0 = 0.6
    assert time_to_sun(theta_0 - 1e-12, theta_0, OP) == pytest.approx(0.0, abs=1e-6)
    assert time_to_sun(-theta_0 + 1e-12, theta_0, OP) == pytest.approx(2 * theta_0 / OMEGA)
    assert time_to_sun(0.0, theta_0, OP) == pytest.approx(theta_0 / OMEGA)
    with pytest.raises(PreconditionError):
        time_to_sun(1.0, theta_0, OP)


def test_phase_and_duration_consistency():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        theta_0 = float(rng.uniform(0.0, np.pi / 2))
        theta = wrap_angle(float(rng.uniform(-np.pi, np.pi)))
        if phase_of(theta, theta_0) is Phase.SUN:
            end = theta + time_to_shadow(theta, theta_0, OP) * OMEGA
            assert wrap_angle(end) == pytest.approx(-theta_0, abs=1e-9)
        else:
            end = theta + time_to_sun(theta, theta_0, OP) * OMEGA
            assert end == pytest.approx(theta_0, abs=1e-9)


def test_orbit_time_adds_other_phase():
    theta_0 = 0.5
    full_shadow = 2 * theta_0 / OMEGA
    full_sun = (2 * np.pi - 2 * theta_0) / OMEGA
    assert orbit_time(2.0, theta_0, OP) == pytest.approx(time_to_shadow(2.0, theta_0, OP) + full_shadow)
    assert orbit_time(0.1, theta_0, OP) == pytest.approx(time_to_sun(0.1, theta_0, OP) + full_sun)


def test_solar_energy_cases():
    vertical = OrbitParams(phi_sun=np.pi / 2)
    assert solar_energy(0.0, 60.0, SP, vertical, lambda t: 0.3 + OMEGA * t) == pytest.approx(22_800.0, rel=1e-12)
    edge_on = OrbitParams(phi_sun=0.0)
    assert solar_energy(0.0, 60.0, SP, edge_on, lambda t: np.zeros_like(t)) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(InvalidParameterError):
        solar_energy(0.0, 60.0, SP, vertical, lambda t: t, steps=8)


def test_charging_power():
    assert charging_power(100.0, 10.0) == 10.0
    assert charging_power(0.0, 10.0) == 0.0
    with pytest.raises(InvalidParameterError):
        charging_power(1.0, 0.0)


def test_battery_step_cases():
    full = BatteryState(500.0, 9e4)
    same = battery_step(full, 0.0, 0.0, 0.0, 0.0, 0.0, Phase.SUN, 60.0)
    assert same.state.energy == 500.0

    capped = battery_step(full, 1e6, 0.0, 0.0, 0.0, 0.0, Phase.SUN, 60.0)
    assert capped.state.energy == 9e4

    drained = battery_step(BatteryState(100.0, 9e4), 0.0, 0.0, 0.0, 1.0, 0.0, Phase.SUN, 60.0)
    assert drained.state.energy == pytest.approx(40.0)
    assert drained.raw_energy == pytest.approx(40.0)

    empty = battery_step(BatteryState(100.0, 9e4), 0.0, 0.0, 0.0, 5.0, 0.0, Phase.SHADOW, 60.0)
    assert empty.state.energy == 0.0
    assert empty.raw_energy == pytest.approx(-200.0)


def test_battery_ignores_solar_in_shadow():
    step = battery_step(BatteryState(100.0, 9e4), 50.0, 0.0, 0.0, 0.0, 0.0, Phase.SHADOW, 60.0)
    assert step.state.energy == 100.0


def test_total_energy_cases():
    assert total_energy(0.0, 0.0, 0.0, 0.0, 10.0) == 0.0
    assert total_energy(0.0, 10.0, 0.0, 0.0, 100.0) == 1000.0
    assert total_energy(0.1, 0.0, 0.0, 0.5, 10.0) == pytest.approx(-4.0)


def test_wrap_angle_range():
    for a in np.linspace(-20, 20, 401):
        w = wrap_angle(float(a))
        assert -np.pi <= w < np.pi
        assert np.cos(w) == pytest.approx(np.cos(a), abs=1e-9)
