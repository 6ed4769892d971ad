"""
utils_config.py - environment getters and experiment config files.

Two layers:
- Process settings come from .env through load_dotenv() and small getters.
- Experiment configs are dotenv-format files with dotted keys, for example

      schema_version=1
      experiment.algorithm=femad
      scenario.L=2
      train.lr_actor=0.001
      fl.group_size=2

  They are read with dotenv_values (nothing leaks into os.environ). Unknown
  keys and bad values raise ConfigError anchored to the offending line.
"""

#####################################
# Import Modules
#####################################

from __future__ import annotations

import math
import os
import pathlib
import re
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Mapping

from dotenv import dotenv_values, load_dotenv

from agents.ddpg import TrainConfig
from envs.leo_ris_env import ABLATIONS, Scenario
from physics.channel import INTERFERENCE_MODES, ChannelParams, SteeringAngles
from physics.energy import OrbitParams, SolarParams
from physics.mfris import HarvestParams, RisPowerParams
from utils.utils_errors import ConfigError, FemadError
from utils.utils_logger import logger
from utils.utils_numerics import db_to_linear, dbm_to_watt

#####################################
# Load Environment Variables
#####################################

load_dotenv()

SCHEMA_VERSION = 1
ALGORITHMS: tuple[str, ...] = ("femad", "maddpg", "ddpg_central", "random")

#####################################
# Getter Functions for .env Variables
#####################################


def get_output_dir() -> pathlib.Path:
    """Fetch the root folder for run outputs from environment or use default."""
    out = pathlib.Path(os.getenv("FEMAD_OUTPUT_DIR", "runs"))
    logger.info(f"Output root: {out}")
    return out


def get_default_config_path() -> pathlib.Path:
    """Fetch the experiment config path from environment or use default."""
    path = pathlib.Path(os.getenv("FEMAD_CONFIG", "configs/desk.env"))
    logger.info(f"Experiment config: {path}")
    return path


def get_workers() -> int:
    """Fetch the number of parallel seed workers from environment or use default."""
    workers = int(os.getenv("FEMAD_WORKERS", 1))
    logger.info(f"Workers: {workers}")
    return workers


#####################################
# Value parsers
#####################################


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got '{text}'")


def _parse_list(item: Callable[[str], Any]) -> Callable[[str], tuple]:
    def parse(text: str) -> tuple:
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if not parts:
            raise ValueError("expected a comma-separated list")
        return tuple(item(p) for p in parts)

    return parse


def _parse_optional_float(text: str) -> float | None:
    return None if text.strip().lower() in ("", "none", "auto") else float(text)


def _parse_optional_list(text: str) -> tuple[float, ...] | None:
    return None if text.strip().lower() in ("", "none") else _parse_list(float)(text)


def _choice(options: tuple[str, ...]) -> Callable[[str], str]:
    def parse(text: str) -> str:
        value = text.strip()
        if value not in options:
            raise ValueError(f"expected one of {options}, got '{value}'")
        return value

    return parse


#####################################
# Schema: key -> (parser, default text)
#####################################

SCHEMA: dict[str, tuple[Callable[[str], Any], str]] = {
    "schema_version": (int, str(SCHEMA_VERSION)),
    "experiment.algorithm": (_choice(ALGORITHMS), "femad"),
    "experiment.episodes": (int, "150"),
    "experiment.slots": (int, "200"),
    "experiment.seeds": (_parse_list(int), "0,1,2"),
    "experiment.output_dir": (str, ""),
    "experiment.summary_window": (float, "0.1"),
    "scenario.L": (int, "2"),
    "scenario.K": (int, "4"),
    "scenario.N": (int, "4"),
    "scenario.M_h": (int, "4"),
    "scenario.M_v": (int, "4"),
    "scenario.h0_db": (float, "-20"),
    "scenario.k0": (float, "2.2"),
    "scenario.beta0_db": (float, "3"),
    "scenario.wavelength": (float, "0.12"),
    "scenario.d_elem": (float, "0.06"),
    "scenario.sigma_dbm": (float, "-70"),
    "scenario.sigma_m_dbm": (float, "-70"),
    "scenario.Z": (float, "0.024"),
    "scenario.a": (float, "150"),
    "scenario.q": (float, "0.014"),
    "scenario.P_pin": (float, "0.00033"),
    "scenario.P_C": (float, "10"),
    "scenario.xi_amp": (float, "1.1"),
    "scenario.P_cons": (float, "90"),
    "scenario.P_budget": (float, "120"),
    "scenario.beta_max": (float, "10"),
    "scenario.levels": (_parse_list(int), "2,10,8"),
    "scenario.battery_capacity": (float, "90000"),
    "scenario.eta_s": (float, "0.19"),
    "scenario.psi": (float, "500"),
    "scenario.B": (float, "4"),
    "scenario.R_e": (float, "6378000"),
    "scenario.h_s": (float, "1000000"),
    "scenario.phi_sun": (float, "0.5"),
    "scenario.omega_dot": (float, "7.29e-5"),
    "scenario.R_min": (float, "0.5"),
    "scenario.rho": (_parse_list(float), "1,10,10,0.01"),
    "scenario.delta": (float, "60"),
    "scenario.element_on_fraction": (float, "1.0"),
    "scenario.ablation": (_choice(ABLATIONS), "full"),
    "scenario.fixed_alpha": (float, "0.5"),
    "scenario.interference_mode": (_choice(INTERFERENCE_MODES), "as_written"),
    "scenario.quantize_actions": (_parse_bool, "false"),
    "scenario.distance_scale": (float, "100000"),
    "scenario.ris_distance": (float, "2"),
    "scenario.ris_angles": (_parse_list(float), "1.0471975511965976,0.7853981633974483,0.5235987755982988,1.0471975511965976"),
    "scenario.user_spread": (float, "200000"),
    "scenario.ee_scale": (float, "1e9"),
    "scenario.energy_floor": (float, "1"),
    "scenario.state_scale": (_parse_optional_float, "auto"),
    "train.lr_actor": (float, "0.001"),
    "train.lr_critic": (float, "0.0005"),
    "train.gamma": (float, "0.99"),
    "train.tau": (float, "0.005"),
    "train.batch_size": (int, "64"),
    "train.buffer_size": (int, "100000"),
    "train.noise_sigma": (float, "0.1"),
    "train.noise_decay": (float, "0.999"),
    "train.hidden": (_parse_list(int), "256,256"),
    "train.optimizer": (_choice(("sgd", "adam")), "sgd"),
    "train.reward_scale": (float, "0.01"),
    "train.grad_clip": (float, "10"),
    "fl.group_size": (int, "0"),
    "fl.period": (int, "5"),
    "fl.slice_fraction": (float, "0.5"),
    "fl.include_target_actor": (_parse_bool, "false"),
    "fl.xi": (_parse_optional_list, "none"),
}

#####################################
# Experiment config
#####################################


@dataclass(frozen=True)
class ExperimentConfig:
    """A parsed experiment: scenario, learner settings, FL settings and run plan."""

    algorithm: str
    episodes: int
    slots: int
    seeds: tuple[int, ...]
    output_dir: pathlib.Path | None
    summary_window: float
    scenario: Scenario
    train: TrainConfig
    fl_group_size: int
    fl_period: int
    fl_slice_fraction: float
    fl_include_target_actor: bool
    fl_xi: tuple[float, ...] | None
    values: Mapping[str, str] = field(default_factory=dict)
    path: pathlib.Path | None = None

    @property
    def effective_group_size(self) -> int:
        """0 means one group with every LEO."""
        return self.fl_group_size or self.scenario.L


_KEY_LINE = re.compile(r"^\s*(?:export\s+)?([^=#\s]+)\s*=")


def _key_lines(path: pathlib.Path) -> dict[str, int]:
    lines: dict[str, int] = {}
    for number, text in enumerate(path.read_text().splitlines(), start=1):
        match = _KEY_LINE.match(text)
        if match:
            lines[match.group(1)] = number
    return lines


def _build(values: Mapping[str, str], path: pathlib.Path | None, lines: Mapping[str, int]) -> ExperimentConfig:
    parsed: dict[str, Any] = {}
    for key, (parser, default) in SCHEMA.items():
        text = values.get(key, default)
        try:
            parsed[key] = parser(text)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad value for '{key}': {e}", path, lines.get(key)) from e

    if parsed["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(
            f"unsupported schema_version {parsed['schema_version']} (expected {SCHEMA_VERSION})",
            path,
            lines.get("schema_version"),
        )

    def p(key: str):
        return parsed[f"scenario.{key}"]

    def section_error(section: str, error: Exception) -> ConfigError:
        first = min((n for k, n in lines.items() if k.startswith(section + ".")), default=None)
        return ConfigError(f"invalid {section} settings: {error}", path, first)

    try:
        levels = p("levels")
        rho = p("rho")
        angles = p("ris_angles")
        if len(levels) != 3 or len(rho) != 4 or len(angles) != 4:
            raise ValueError("levels needs 3 values, rho and ris_angles need 4")
        scenario = Scenario(
            L=p("L"),
            K=p("K"),
            N=p("N"),
            M_h=p("M_h"),
            M_v=p("M_v"),
            channel=ChannelParams(
                h0=db_to_linear(p("h0_db")),
                k0=p("k0"),
                beta0=db_to_linear(p("beta0_db")),
                wavelength=p("wavelength"),
                d_elem=p("d_elem"),
            ),
            harvest=HarvestParams(Z=p("Z"), a=p("a"), q=p("q")),
            ris_power=RisPowerParams(
                P_pin=p("P_pin"), P_C=p("P_C"), xi_amp=p("xi_amp"), sigma_m_sq=dbm_to_watt(p("sigma_m_dbm"))
            ),
            orbit=OrbitParams(R_e=p("R_e"), h_s=p("h_s"), phi_sun=p("phi_sun"), omega_dot=p("omega_dot")),
            solar=SolarParams(eta_s=p("eta_s"), psi=p("psi"), B=p("B")),
            battery_capacity=p("battery_capacity"),
            beta_max=p("beta_max"),
            levels=tuple(levels),
            sigma_sq=dbm_to_watt(p("sigma_dbm")),
            P_cons=p("P_cons"),
            P_budget=p("P_budget"),
            R_min=p("R_min"),
            rho=tuple(rho),
            delta=p("delta"),
            element_on_fraction=p("element_on_fraction"),
            ablation=p("ablation"),
            fixed_alpha=p("fixed_alpha"),
            interference_mode=p("interference_mode"),
            quantize_actions=p("quantize_actions"),
            distance_scale=p("distance_scale"),
            ris_distance=p("ris_distance"),
            ris_angles=SteeringAngles(*angles),
            user_spread=p("user_spread"),
            ee_scale=p("ee_scale"),
            energy_floor=p("energy_floor"),
            state_scale=p("state_scale"),
        )
    except (FemadError, ValueError) as e:
        raise section_error("scenario", e) from e

    try:
        train = TrainConfig(
            lr_actor=parsed["train.lr_actor"],
            lr_critic=parsed["train.lr_critic"],
            gamma=parsed["train.gamma"],
            tau=parsed["train.tau"],
            batch_size=parsed["train.batch_size"],
            buffer_size=parsed["train.buffer_size"],
            noise_sigma=parsed["train.noise_sigma"],
            noise_decay=parsed["train.noise_decay"],
            hidden=tuple(parsed["train.hidden"]),
            optimizer=parsed["train.optimizer"],
            reward_scale=parsed["train.reward_scale"],
            grad_clip=parsed["train.grad_clip"],
        )
    except (FemadError, ValueError) as e:
        raise section_error("train", e) from e

    group_size = parsed["fl.group_size"]
    if group_size < 0 or not 0.0 < parsed["fl.slice_fraction"] <= 1.0 or parsed["fl.period"] < 1:
        raise section_error("fl", ValueError("need group_size >= 0, period >= 1, slice_fraction in (0, 1]"))
    xi = parsed["fl.xi"]
    if xi is not None and len(xi) != scenario.L:
        raise ConfigError(f"fl.xi needs {scenario.L} weights, got {len(xi)}", path, lines.get("fl.xi"))

    if parsed["experiment.episodes"] < 1 or parsed["experiment.slots"] < 1:
        raise section_error("experiment", ValueError("episodes and slots must be >= 1"))
    window = parsed["experiment.summary_window"]
    if not 0.0 < window <= 0.5:
        raise ConfigError("summary_window must lie in (0, 0.5]", path, lines.get("experiment.summary_window"))

    return ExperimentConfig(
        algorithm=parsed["experiment.algorithm"],
        episodes=parsed["experiment.episodes"],
        slots=parsed["experiment.slots"],
        seeds=tuple(parsed["experiment.seeds"]),
        output_dir=pathlib.Path(parsed["experiment.output_dir"]) if parsed["experiment.output_dir"] else None,
        summary_window=window,
        scenario=scenario,
        train=train,
        fl_group_size=group_size,
        fl_period=parsed["fl.period"],
        fl_slice_fraction=parsed["fl.slice_fraction"],
        fl_include_target_actor=parsed["fl.include_target_actor"],
        fl_xi=xi,
        values=dict(values),
        path=path,
    )


def load_experiment_config(
    path: pathlib.Path | str,
    overrides: Mapping[str, str] | None = None,
) -> ExperimentConfig:
    """Parse a config file, apply string overrides, and validate everything."""
    path = pathlib.Path(path)
    if not path.exists():
        raise ConfigError("config file not found", path)
    lines = _key_lines(path)
    raw = dotenv_values(path)
    for key, text in raw.items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown key '{key}'", path, lines.get(key))
        if text is None:
            raise ConfigError(f"key '{key}' has no value", path, lines.get(key))
    if "schema_version" not in raw:
        raise ConfigError("missing schema_version", path, 1)

    values = dict(raw)
    for key, text in (overrides or {}).items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown override key '{key}'", path)
        values[key] = text
    config = _build(values, path, lines)
    logger.info(
        f"Loaded {path}: algorithm={config.algorithm}, L={config.scenario.L}, K={config.scenario.K}, "
        f"N={config.scenario.N}, M={config.scenario.M}, episodes={config.episodes}, slots={config.slots}, "
        f"seeds={list(config.seeds)}"
    )
    return config


def default_experiment_config(**overrides: str) -> ExperimentConfig:
    """Config built from schema defaults only, with dotted keys passed as name__sub."""
    values = {key.replace("__", "."): value for key, value in overrides.items()}
    for key in values:
        if key not in SCHEMA:
            raise ConfigError(f"unknown key '{key}'")
    return _build(values, None, {})


def with_overrides(config: ExperimentConfig, overrides: Mapping[str, str]) -> ExperimentConfig:
    """Rebuild a config with some dotted keys replaced."""
    values = {**config.values, **overrides}
    for key in overrides:
        if key not in SCHEMA:
            raise ConfigError(f"unknown key '{key}'", config.path)
    rebuilt = _build(values, config.path, _key_lines(config.path) if config.path else {})
    return replace(rebuilt, values=values)


def element_grid(M: int) -> tuple[int, int]:
    """Most square (M_h, M_v) factorization with M_h >= M_v."""
    if M < 1:
        raise ConfigError(f"number of elements must be >= 1, got {M}")
    m_v = max(d for d in range(1, int(math.isqrt(M)) + 1) if M % d == 0)
    return M // m_v, m_v
