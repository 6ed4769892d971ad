"""
leo_ris_env.py - multi-agent LEO MF-RIS environment.

One agent per LEO satellite. Each slot an agent picks its MF-RIS configuration
(theta, alpha, beta per element) and K transmit beamformers; the environment
returns the next per-agent states and a penalized energy-efficiency reward.

Agent state layout (length 2NK + 2):
    [Re g_{l,1,1}, Im g_{l,1,1}, ..., Re g_{l,K,N}, Im g_{l,K,N}, battery fraction, sunlight flag]

Raw action layout (length 3M + 2NK):
    [theta pre-activations (M), alpha pre-activations (M), beta pre-activations (M),
     Re w_{1,1}, Im w_{1,1}, ..., Re w_{K,N}, Im w_{K,N}]
"""

#####################################
# Import Modules
#####################################

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import numpy.typing as npt
from scipy.special import expit

from physics.channel import (
    INTERFERENCE_MODES,
    ChannelParams,
    ChannelRealization,
    SteeringAngles,
    combined_channels,
    draw_realization,
    place_users,
    rate,
    sinr_matrix,
)
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
    total_energy,
    wrap_angle,
)
from physics.mfris import (
    HarvestParams,
    MfRisConfig,
    RisPowerParams,
    config_diagonal,
    config_matrix,
    harvested_power,
    quantize_config,
    received_rf_powers,
    reflecting_power_consumption,
    ris_output_power,
    ris_power_consumption,
)
from utils.utils_errors import InvalidParameterError, PreconditionError
from utils.utils_logger import logger
from utils.utils_numerics import make_rng, sample_cgauss

ABLATIONS: tuple[str, ...] = ("full", "fixed_eh", "no_eh", "no_amplify", "reflect_only", "no_ris")

#####################################
# Domain Types
#####################################


@dataclass(frozen=True)
class Scenario:
    """Everything that defines one simulated system. Powers in W, times in s, lengths in m."""

    L: int = 2
    K: int = 4
    N: int = 4
    M_h: int = 4
    M_v: int = 4
    channel: ChannelParams = field(default_factory=ChannelParams)
    harvest: HarvestParams = field(default_factory=HarvestParams)
    ris_power: RisPowerParams = field(default_factory=RisPowerParams)
    orbit: OrbitParams = field(default_factory=OrbitParams)
    solar: SolarParams = field(default_factory=SolarParams)
    battery_capacity: float = 9.0e4
    beta_max: float = 10.0
    levels: tuple[int, int, int] = (2, 10, 8)
    sigma_sq: float = 1e-10
    P_cons: float = 90.0
    P_budget: float = 120.0
    R_min: float = 0.5
    rho: tuple[float, float, float, float] = (1.0, 10.0, 10.0, 0.01)
    delta: float = 60.0
    element_on_fraction: float = 1.0
    ablation: str = "full"
    fixed_alpha: float = 0.5
    interference_mode: str = "as_written"
    quantize_actions: bool = False
    distance_scale: float = 1.0e5
    ris_distance: float = 2.0
    ris_angles: SteeringAngles = field(
        default_factory=lambda: SteeringAngles(np.pi / 3, np.pi / 4, np.pi / 6, np.pi / 3)
    )
    user_spread: float = 2.0e5
    user_positions: tuple[tuple[float, float, float], ...] | None = None
    ee_scale: float = 1.0e9
    energy_floor: float = 1.0
    state_scale: float | None = None

    def __post_init__(self):
        if min(self.L, self.K, self.N, self.M_h, self.M_v) < 1:
            raise InvalidParameterError("L, K, N, M_h and M_v must all be >= 1")
        if self.ablation not in ABLATIONS:
            raise InvalidParameterError(f"unknown ablation '{self.ablation}', expected one of {ABLATIONS}")
        if self.interference_mode not in INTERFERENCE_MODES:
            raise InvalidParameterError(f"unknown interference mode '{self.interference_mode}'")
        if not 0.0 < self.element_on_fraction <= 1.0:
            raise InvalidParameterError(f"element_on_fraction must lie in (0, 1], got {self.element_on_fraction}")
        if not 0.0 <= self.fixed_alpha <= 1.0:
            raise InvalidParameterError(f"fixed_alpha must lie in [0, 1], got {self.fixed_alpha}")
        if len(self.rho) != 4 or min(self.rho) < 0:
            raise InvalidParameterError(f"rho must be four non-negative weights, got {self.rho}")
        if self.sigma_sq <= 0 or self.delta <= 0 or self.energy_floor <= 0:
            raise InvalidParameterError("sigma_sq, delta and energy_floor must be > 0")
        if self.distance_scale <= 0 or self.ris_distance <= 0 or self.ee_scale <= 0:
            raise InvalidParameterError("distance_scale, ris_distance and ee_scale must be > 0")
        if self.user_positions is not None and len(self.user_positions) != self.K:
            raise InvalidParameterError(f"expected {self.K} user positions, got {len(self.user_positions)}")

    @property
    def M(self) -> int:
        return self.M_h * self.M_v

    @property
    def state_dim(self) -> int:
        return 2 * self.N * self.K + 2

    @property
    def action_dim(self) -> int:
        return 3 * self.M + 2 * self.N * self.K

    @property
    def P_avail(self) -> float:
        """Transmit power left by the budget after circuit power."""
        return max(0.0, self.P_budget - self.P_cons)

    @property
    def assignment(self) -> npt.NDArray[np.int64]:
        """Round-robin user -> LEO association."""
        return np.arange(self.K) % self.L

    def served_users(self, l: int) -> npt.NDArray[np.int64]:
        return np.flatnonzero(self.assignment == l)

    @property
    def resolved_state_scale(self) -> float:
        """Multiplier on channel entries in the state, O(1) inputs at nadir distance."""
        if self.state_scale is not None:
            return self.state_scale
        nadir = self.orbit.h_s / self.distance_scale
        return 1.0 / math.sqrt(self.channel.path_gain(nadir))


@dataclass(frozen=True)
class AgentAction:
    """Decoded action of one agent."""

    theta: npt.NDArray[np.float64]
    alpha: npt.NDArray[np.float64]
    beta: npt.NDArray[np.float64]
    w: npt.NDArray[np.complex128]
    beta_max: float = 10.0
    levels: tuple[int, int, int] = (2, 10, 8)

    @property
    def ris_config(self) -> MfRisConfig:
        return MfRisConfig(self.alpha, self.beta, self.theta, self.beta_max, self.levels)

    @property
    def transmit_power(self) -> float:
        return float(np.sum(self.w.real**2 + self.w.imag**2))


@dataclass(frozen=True)
class RewardBreakdown:
    """Scaled EE, the four hinge penalties and their unhinged values, and the reward."""

    ee: float
    c: tuple[float, float, float, float]
    c_raw: tuple[float, float, float, float]
    reward: float


@dataclass
class SlotMetrics:
    """Raw per-slot quantities, indexed by agent (and user where relevant)."""

    slot: int
    rates: npt.NDArray[np.float64]
    g: npt.NDArray[np.complex128]
    ee: npt.NDArray[np.float64]
    p_tr: npt.NDArray[np.float64]
    p_out: npt.NDArray[np.float64]
    p_ris: npt.NDArray[np.float64]
    p_harvest: npt.NDArray[np.float64]
    p_in: npt.NDArray[np.float64]
    orbit_time: npt.NDArray[np.float64]
    e_tot_raw: npt.NDArray[np.float64]
    e_tot: npt.NDArray[np.float64]
    battery: npt.NDArray[np.float64]
    battery_raw: npt.NDArray[np.float64]
    phase: list[Phase]
    channel_quality: npt.NDArray[np.float64]

    @property
    def rate_sum(self) -> npt.NDArray[np.float64]:
        return self.rates.sum(axis=1)


#####################################
# Action decoding
#####################################


def decode_action(
    raw,
    sc: Scenario,
    active_mask: npt.NDArray[np.bool_] | None = None,
) -> AgentAction:
    """
    Map an unconstrained actor output to a feasible action.

    theta = pi (tanh x + 1) wrapped into [0, 2pi), alpha = logistic(x),
    beta = beta_max logistic(x). Beamformers are scaled down onto the power
    sphere only when they exceed P_budget - P_cons. Quantization comes first;
    ablation overrides and switched-off elements (alpha = 1, beta = 0) are
    applied after it and stay exact.
    """
    raw = np.asarray(raw, dtype=np.float64)
    M, N, K = sc.M, sc.N, sc.K
    if raw.shape != (sc.action_dim,):
        raise InvalidParameterError(f"raw action must have length {sc.action_dim}, got {raw.shape}")
    theta = np.mod(np.pi * (np.tanh(raw[:M]) + 1.0), 2.0 * np.pi)
    alpha = expit(raw[M : 2 * M])
    beta = sc.beta_max * expit(raw[2 * M : 3 * M])
    if sc.quantize_actions:
        q = quantize_config(MfRisConfig(alpha, beta, theta, sc.beta_max, sc.levels))
        theta, alpha, beta = q.theta, q.alpha, q.beta
    w_flat = raw[3 * M :].reshape(K, N, 2)
    w = w_flat[..., 0] + 1j * w_flat[..., 1]

    power = float(np.sum(w.real**2 + w.imag**2))
    if power > sc.P_avail:
        w = w * math.sqrt(sc.P_avail / power) if power > 0 else w

    if sc.ablation == "fixed_eh":
        alpha = np.full(M, sc.fixed_alpha)
    elif sc.ablation == "no_eh":
        alpha = np.ones(M)
    elif sc.ablation == "no_amplify":
        beta = np.minimum(beta, 1.0)
    elif sc.ablation == "reflect_only":
        alpha = np.ones(M)
        beta = np.ones(M)
    elif sc.ablation == "no_ris":
        alpha = np.ones(M)
        beta = np.zeros(M)

    if active_mask is not None:
        alpha = np.where(active_mask, alpha, 1.0)
        beta = np.where(active_mask, beta, 0.0)

    return AgentAction(theta, alpha, beta, w, sc.beta_max, sc.levels)


def random_raw_action(sc: Scenario, rng: np.random.Generator) -> npt.NDArray[np.float64]:
    """Raw vector whose decoding is uniform-ish over the feasible set."""
    ris_part = rng.uniform(-3.0, 3.0, size=3 * sc.M)
    w_part = rng.standard_normal(2 * sc.N * sc.K)
    w_part *= math.sqrt(rng.uniform() * sc.P_avail / max(float(np.sum(w_part**2)), 1e-300))
    return np.concatenate([ris_part, w_part])


#####################################
# Reward pieces
#####################################


def raw_penalties(
    rates,
    p_ris: float,
    p_harvest_sum: float,
    p_tr: float,
    p_cons: float,
    P_budget: float,
    battery_raw: float,
    R_min: float,
) -> tuple[float, float, float, float]:
    """Unhinged constraint gaps: rate, RIS self-sustainability, power budget, battery."""
    rates = np.asarray(rates, dtype=np.float64)
    return (
        float(np.sum(R_min - rates)),
        p_ris - p_harvest_sum,
        p_tr + p_cons - P_budget,
        -battery_raw,
    )


def penalties(
    rates,
    p_ris: float,
    p_harvest_sum: float,
    p_tr: float,
    p_cons: float,
    P_budget: float,
    battery_raw: float,
    R_min: float = 0.5,
) -> tuple[float, float, float, float]:
    """Hinge penalties C_1..C_4, each >= 0."""
    raw = raw_penalties(rates, p_ris, p_harvest_sum, p_tr, p_cons, P_budget, battery_raw, R_min)
    return tuple(max(0.0, c) for c in raw)


def build_state(g_l, battery_fraction: float, in_sun: bool, scale: float) -> npt.NDArray[np.float64]:
    """Flatten (K, N) combined channels, real/imag interleaved, then battery and phase."""
    g_l = np.asarray(g_l, dtype=np.complex128) * scale
    flat = np.stack([g_l.real, g_l.imag], axis=-1).ravel()
    return np.concatenate([flat, [battery_fraction, 1.0 if in_sun else 0.0]])


#####################################
# Environment
#####################################


class LeoRisEnv:
    """Multi-agent environment; one instance belongs to one execution stream."""

    def __init__(self, scenario: Scenario):
        self.sc = scenario
        self.theta_0 = shadow_half_angle(scenario.orbit)
        self.rng: np.random.Generator | None = None
        self.slot = 0
        self.time = 0.0
        self.thetas = np.zeros(scenario.L)
        self.batteries: list[BatteryState] = []
        self.user_positions = np.zeros((scenario.K, 3))
        self.active_masks = np.ones((scenario.L, scenario.M), dtype=bool)
        self.realization: ChannelRealization | None = None
        self.theta_diag = np.zeros((scenario.L, scenario.M), dtype=np.complex128)
        logger.debug(f"Environment built: L={scenario.L} K={scenario.K} N={scenario.N} M={scenario.M}, theta_0={self.theta_0:.4f}")

    def reset(self, seed: int) -> list[npt.NDArray[np.float64]]:
        """Full batteries, evenly spaced orbital phases, fresh users and channels."""
        sc = self.sc
        self.rng = make_rng(seed)
        self.slot = 0
        self.time = 0.0
        self.thetas = np.array([wrap_angle(-np.pi + 2.0 * np.pi * l / sc.L) for l in range(sc.L)])
        self.batteries = [BatteryState(sc.battery_capacity, sc.battery_capacity, float(th)) for th in self.thetas]

        if sc.user_positions is not None:
            self.user_positions = np.asarray(sc.user_positions, dtype=np.float64)
        else:
            self.user_positions = place_users(
                self.thetas, sc.assignment, sc.orbit.R_e, sc.user_spread, self.rng
            )

        self.active_masks = np.ones((sc.L, sc.M), dtype=bool)
        if sc.element_on_fraction < 1.0:
            count = max(1, math.ceil(round(sc.element_on_fraction * sc.M, 9)))
            for l in range(sc.L):
                on = self.rng.choice(sc.M, size=count, replace=False)
                self.active_masks[l] = False
                self.active_masks[l, on] = True

        neutral = MfRisConfig.neutral(sc.M, sc.beta_max, sc.levels)
        self.theta_diag = np.tile(config_diagonal(neutral), (sc.L, 1)) * self.active_masks
        if sc.ablation == "no_ris":
            self.theta_diag[:] = 0.0
        self.realization = self._draw_channels()
        return self._states()

    def decode_action(self, raw) -> list[AgentAction] | AgentAction:
        """Decode one raw vector per agent; a single vector decodes for agent 0."""
        raw = np.asarray(raw, dtype=np.float64)
        if raw.ndim == 1:
            return decode_action(raw, self.sc, self.active_masks[0])
        return [decode_action(raw[l], self.sc, self.active_masks[l]) for l in range(self.sc.L)]

    def step(
        self, actions: Sequence[AgentAction]
    ) -> tuple[list[npt.NDArray[np.float64]], list[RewardBreakdown], SlotMetrics]:
        """Apply one action per agent, evaluate the slot, advance the orbit."""
        if self.rng is None or self.realization is None:
            raise PreconditionError("step() called before reset()")
        sc = self.sc
        if len(actions) != sc.L:
            raise InvalidParameterError(f"expected {sc.L} actions, got {len(actions)}")
        real = self.realization

        theta_diag = np.stack([config_diagonal(a.ris_config) for a in actions])
        w_all = np.stack([a.w for a in actions])
        g = combined_channels(real, theta_diag)
        rates = rate(sinr_matrix(g, w_all, sc.sigma_sq, sc.interference_mode))
        rates = np.atleast_2d(rates).reshape(sc.L, sc.K)
        w_sum = w_all.sum(axis=(0, 1))

        metrics = SlotMetrics(
            slot=self.slot,
            rates=rates,
            g=g,
            ee=np.zeros(sc.L),
            p_tr=np.zeros(sc.L),
            p_out=np.zeros(sc.L),
            p_ris=np.zeros(sc.L),
            p_harvest=np.zeros(sc.L),
            p_in=np.zeros(sc.L),
            orbit_time=np.zeros(sc.L),
            e_tot_raw=np.zeros(sc.L),
            e_tot=np.zeros(sc.L),
            battery=np.zeros(sc.L),
            battery_raw=np.zeros(sc.L),
            phase=[],
            channel_quality=np.sum(np.abs(g) ** 2, axis=(1, 2)),
        )
        rewards: list[RewardBreakdown] = []

        for l, action in enumerate(actions):
            rewards.append(self._evaluate_agent(l, action, real, w_sum, rates, metrics))

        self.theta_diag = theta_diag
        self._advance()
        self.realization = self._draw_channels()
        logger.debug(f"slot {metrics.slot}: rewards={[round(r.reward, 4) for r in rewards]}")
        return self._states(), rewards, metrics

    #####################################
    # Internals
    #####################################

    def _evaluate_agent(self, l, action, real, w_sum, rates, metrics: SlotMetrics) -> RewardBreakdown:
        sc = self.sc
        theta_l = float(self.thetas[l])
        cfg = action.ris_config
        p_tr = action.transmit_power

        noise = sample_cgauss(self.rng, sc.M, sc.ris_power.sigma_m_sq)
        if sc.ablation == "no_ris":
            p_harvest = 0.0
            p_out = 0.0
            p_ris = 0.0
        elif sc.ablation == "reflect_only":
            p_harvest = 0.0
            p_out = 0.0
            p_ris = reflecting_power_consumption(int(self.active_masks[l].sum()), sc.levels, sc.ris_power)
        else:
            p_rf = received_rf_powers(real.H[l], w_sum, cfg.alpha, noise)
            p_harvest = float(np.sum(harvested_power(p_rf, sc.harvest)))
            p_out = ris_output_power(config_matrix(cfg), real.H[l], action.w, sc.ris_power.sigma_m_sq)
            active = int(self.active_masks[l].sum())
            p_ris = ris_power_consumption(cfg, p_out, sc.ris_power, active)

        phase = phase_of(theta_l, self.theta_0)
        p_in = 0.0
        if phase is Phase.SUN:
            omega = sc.orbit.omega_dot
            start = self.time
            e_sol = solar_energy(
                start, sc.delta, sc.solar, sc.orbit, lambda tau: theta_l + omega * (tau - start)
            )
            # T_sun reaches 0 exactly on the shadow boundary
            p_in = charging_power(e_sol, max(time_to_shadow(theta_l, self.theta_0, sc.orbit), sc.delta))

        step = battery_step(self.batteries[l], p_in, p_harvest, p_ris, p_tr, sc.P_cons, phase, sc.delta)
        self.batteries[l] = step.state

        t_orbit = max(orbit_time(theta_l, self.theta_0, sc.orbit), sc.delta)
        e_tot_raw = total_energy(p_ris, p_tr, sc.P_cons, p_harvest, t_orbit)
        e_tot = max(e_tot_raw, sc.energy_floor)
        if e_tot_raw < sc.energy_floor:
            logger.debug(f"agent {l} slot {self.slot}: E_tot {e_tot_raw:.4g} J floored at {sc.energy_floor} J")

        ee = sc.ee_scale * float(np.sum(rates[l])) / e_tot
        c_raw = raw_penalties(
            rates[l, sc.served_users(l)], p_ris, p_harvest, p_tr, sc.P_cons, sc.P_budget, step.raw_energy, sc.R_min
        )
        c = tuple(max(0.0, v) for v in c_raw)
        reward = ee - sum(rho * v for rho, v in zip(sc.rho, c))

        metrics.ee[l] = ee
        metrics.p_tr[l] = p_tr
        metrics.p_out[l] = p_out
        metrics.p_ris[l] = p_ris
        metrics.p_harvest[l] = p_harvest
        metrics.p_in[l] = p_in
        metrics.orbit_time[l] = t_orbit
        metrics.e_tot_raw[l] = e_tot_raw
        metrics.e_tot[l] = e_tot
        metrics.battery[l] = step.state.energy
        metrics.battery_raw[l] = step.raw_energy
        metrics.phase.append(phase)
        return RewardBreakdown(ee=ee, c=c, c_raw=c_raw, reward=reward)

    def _advance(self) -> None:
        sc = self.sc
        self.thetas = np.array([wrap_angle(th + sc.orbit.omega_dot * sc.delta) for th in self.thetas])
        self.batteries = [
            BatteryState(b.energy, b.E_b, float(th)) for b, th in zip(self.batteries, self.thetas)
        ]
        self.time += sc.delta
        self.slot += 1

    def _draw_channels(self) -> ChannelRealization:
        sc = self.sc
        return draw_realization(
            self.thetas,
            self.user_positions,
            sc.orbit.orbit_radius,
            sc.M_h,
            sc.M_v,
            sc.N,
            sc.ris_angles,
            sc.ris_distance,
            sc.distance_scale,
            sc.channel,
            self.rng,
        )

    def _states(self) -> list[npt.NDArray[np.float64]]:
        sc = self.sc
        g = combined_channels(self.realization, self.theta_diag)
        scale = sc.resolved_state_scale
        return [
            build_state(
                g[l],
                self.batteries[l].fraction,
                phase_of(float(self.thetas[l]), self.theta_0) is Phase.SUN,
                scale,
            )
            for l in range(sc.L)
        ]
