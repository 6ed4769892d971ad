"""
energy.py - orbital sunlight/shadow geometry, solar charging and the LEO battery.

Angles follow the rotation angle theta_rot measured from the midpoint of the
shaded arc, wrapped to [-pi, pi). A satellite is in sunlight when
|theta_rot| >= theta_0, the shadow half-angle.
"""

#####################################
# Import Modules
#####################################

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid

from utils.utils_errors import InvalidParameterError, PreconditionError

TWO_PI = 2.0 * np.pi

#####################################
# Domain Types
#####################################


class Phase(str, Enum):
    SUN = "sun"
    SHADOW = "shadow"


@dataclass(frozen=True)
class OrbitParams:
    """Earth radius and altitude in metres, sun angle phi, rotation rate in rad/s."""

    R_e: float = 6.378e6
    h_s: float = 1.0e6
    phi_sun: float = 0.5
    omega_dot: float = 7.29e-5

    def __post_init__(self):
        if self.R_e <= 0 or self.h_s <= 0 or self.omega_dot <= 0:
            raise InvalidParameterError(f"R_e, h_s and omega_dot must be > 0: {self}")

    @property
    def orbit_radius(self) -> float:
        return self.R_e + self.h_s


@dataclass(frozen=True)
class SolarParams:
    """Panel efficiency eta_s, light intensity psi (W/m^2), panel area B (m^2)."""

    eta_s: float = 0.19
    psi: float = 500.0
    B: float = 4.0

    def __post_init__(self):
        if not 0.0 < self.eta_s <= 1.0 or self.psi <= 0 or self.B <= 0:
            raise InvalidParameterError(f"invalid solar parameters: {self}")


@dataclass(frozen=True)
class BatteryState:
    """Stored energy (J), capacity (J) and orbital rotation angle (rad)."""

    energy: float
    E_b: float = 9.0e4
    theta_rot: float = 0.0

    def __post_init__(self):
        if self.E_b <= 0:
            raise InvalidParameterError(f"battery capacity must be > 0, got {self.E_b}")
        if not 0.0 <= self.energy <= self.E_b:
            raise InvalidParameterError(f"battery energy {self.energy} outside [0, {self.E_b}]")

    @property
    def fraction(self) -> float:
        return self.energy / self.E_b


@dataclass(frozen=True)
class BatteryStep:
    """Result of one battery update: the new state and the unclamped energy."""

    state: BatteryState
    raw_energy: float


def wrap_angle(angle: float) -> float:
    """Wrap to [-pi, pi)."""
    return float((angle + np.pi) % TWO_PI - np.pi)


#####################################
# Shadow geometry
#####################################


def shadow_half_angle(op: OrbitParams) -> float:
    """
    Half-angle of the shaded arc.

    Zero when phi exceeds asin(R_e / (R_e + h_s)). The asin argument is used
    as written, with R_e squared in the numerator, and clamped to [-1, 1].
    """
    R_e, h_s, phi = op.R_e, op.h_s, op.phi_sun
    if phi > np.arcsin(R_e / (R_e + h_s)):
        return 0.0
    numerator = R_e**2 * np.cos(phi) ** 2 - (2.0 * R_e * h_s + h_s**2) * np.sin(phi) ** 2
    argument = numerator / ((R_e + h_s) * np.cos(phi))
    return float(np.arcsin(np.clip(argument, -1.0, 1.0)))


def phase_of(theta_rot: float, theta_0: float) -> Phase:
    """Sunlight iff |theta_rot| >= theta_0 (boundary inclusive)."""
    return Phase.SUN if abs(theta_rot) >= theta_0 else Phase.SHADOW


def time_to_shadow(theta_rot: float, theta_0: float, op: OrbitParams) -> float:
    """Remaining sunlit time until the satellite reaches -theta_0."""
    if phase_of(theta_rot, theta_0) is not Phase.SUN:
        raise PreconditionError(f"time_to_shadow called in shadow (theta_rot={theta_rot}, theta_0={theta_0})")
    if theta_rot >= 0.0:
        return (TWO_PI - theta_0 - theta_rot) / op.omega_dot
    return (-theta_0 - theta_rot) / op.omega_dot


def time_to_sun(theta_rot: float, theta_0: float, op: OrbitParams) -> float:
    """Remaining shaded time until the satellite reaches +theta_0."""
    if phase_of(theta_rot, theta_0) is not Phase.SHADOW:
        raise PreconditionError(f"time_to_sun called in sunlight (theta_rot={theta_rot}, theta_0={theta_0})")
    return (theta_0 - theta_rot) / op.omega_dot


def orbit_time(theta_rot: float, theta_0: float, op: OrbitParams) -> float:
    """
    T_sun + T_shd: the remaining time of the current phase plus the full
    length of the other phase, both from the remaining-time formulas.
    """
    if phase_of(theta_rot, theta_0) is Phase.SUN:
        full_shadow = 2.0 * theta_0 / op.omega_dot
        return time_to_shadow(theta_rot, theta_0, op) + full_shadow
    full_sun = (TWO_PI - 2.0 * theta_0) / op.omega_dot
    return time_to_sun(theta_rot, theta_0, op) + full_sun


#####################################
# Solar charging
#####################################


def solar_energy(
    t: float,
    delta: float,
    sp: SolarParams,
    op: OrbitParams,
    theta_rot_fn: Callable[[np.ndarray], np.ndarray],
    steps: int = 64,
) -> float:
    """
    Panel energy over [t, t + delta], trapezoid rule with `steps` intervals.

    theta_rot_fn maps an array of times to rotation angles.
    """
    if delta <= 0:
        raise InvalidParameterError(f"delta must be > 0, got {delta}")
    if steps < 64:
        raise InvalidParameterError(f"need at least 64 quadrature steps, got {steps}")
    tau = np.linspace(t, t + delta, steps + 1)
    cos_phi_sq = np.cos(op.phi_sun) ** 2
    integrand = np.sqrt(np.clip(1.0 - cos_phi_sq * np.cos(theta_rot_fn(tau)) ** 2, 0.0, None))
    return float(sp.eta_s * sp.psi * sp.B * trapezoid(integrand, tau))


def charging_power(E_sol: float, T_sun: float) -> float:
    """Solar charging power E_sol / T_sun."""
    if T_sun <= 0:
        raise InvalidParameterError(f"T_sun must be > 0, got {T_sun}")
    return E_sol / T_sun


#####################################
# Battery and total energy
#####################################


def battery_step(
    bs: BatteryState,
    p_in: float,
    p_harvest_sum: float,
    p_ris: float,
    p_tr: float,
    p_cons: float,
    phase: Phase,
    duration: float,
) -> BatteryStep:
    """
    Advance the battery by `duration` seconds.

    Solar input counts only in sunlight. The stored energy is capped at E_b and
    floored at 0; the unclamped value is returned for the depletion penalty.
    """
    if duration < 0:
        raise InvalidParameterError(f"duration must be >= 0, got {duration}")
    solar = p_in if phase is Phase.SUN else 0.0
    net = solar + p_harvest_sum - p_ris - (p_tr + p_cons)
    raw = bs.energy + net * duration
    stored = min(bs.E_b, max(0.0, raw))
    return BatteryStep(state=replace(bs, energy=stored), raw_energy=raw)


def total_energy(p_ris: float, p_tr: float, p_cons: float, p_harvest_sum: float, T_total: float) -> float:
    """Energy over the orbit time; may be negative when harvesting exceeds consumption."""
    if T_total <= 0:
        raise InvalidParameterError(f"T_total must be > 0, got {T_total}")
    return (p_ris + p_tr + p_cons - p_harvest_sum) * T_total
