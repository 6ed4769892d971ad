"""
mfris.py - multi-functional RIS: element configuration, energy harvesting, power accounting.

Each element m splits the incident signal: (1 - alpha_m) goes to the harvester,
alpha_m * sqrt(beta_m) * exp(j theta_m) is reflected/refracted with gain.
"""

#####################################
# Import Modules
#####################################

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt
from scipy.special import expit

from utils.utils_errors import InvalidParameterError
from utils.utils_numerics import CMatrix, CVector, SeededRng, as_cmatrix, sample_cgauss

TWO_PI = 2.0 * np.pi

#####################################
# Domain Types
#####################################


@dataclass(frozen=True)
class MfRisConfig:
    """Per-element (alpha, beta, theta) plus amplification and quantization limits."""

    alpha: npt.NDArray[np.float64]
    beta: npt.NDArray[np.float64]
    theta: npt.NDArray[np.float64]
    beta_max: float = 10.0
    levels: tuple[int, int, int] = (2, 10, 8)

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=np.float64)
        beta = np.asarray(self.beta, dtype=np.float64)
        theta = np.asarray(self.theta, dtype=np.float64)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "theta", theta)
        if not (alpha.shape == beta.shape == theta.shape) or alpha.ndim != 1:
            raise InvalidParameterError(
                f"alpha/beta/theta must be 1-D of equal length: {alpha.shape}, {beta.shape}, {theta.shape}"
            )
        if self.beta_max <= 0:
            raise InvalidParameterError(f"beta_max must be > 0, got {self.beta_max}")
        if np.any((alpha < 0) | (alpha > 1)) or not np.all(np.isfinite(alpha)):
            raise InvalidParameterError("alpha must lie in [0, 1]")
        if np.any((beta < 0) | (beta > self.beta_max)) or not np.all(np.isfinite(beta)):
            raise InvalidParameterError(f"beta must lie in [0, {self.beta_max}]")
        if np.any((theta < 0) | (theta >= TWO_PI)) or not np.all(np.isfinite(theta)):
            raise InvalidParameterError("theta must lie in [0, 2pi)")

    @property
    def num_elements(self) -> int:
        return int(self.alpha.shape[0])

    @classmethod
    def neutral(cls, M: int, beta_max: float = 10.0, levels=(2, 10, 8)) -> "MfRisConfig":
        """Pure pass-through: alpha = 1, beta = 1, theta = 0."""
        return cls(np.ones(M), np.full(M, min(1.0, beta_max)), np.zeros(M), beta_max, tuple(levels))


@dataclass(frozen=True)
class HarvestParams:
    """Logistic harvester: max power Z (W), steepness a (1/W), threshold q (W)."""

    Z: float = 0.024
    a: float = 150.0
    q: float = 0.014
    Omega: float | None = field(default=None)

    def __post_init__(self):
        if self.Z < 0 or self.a <= 0 or self.q <= 0:
            raise InvalidParameterError(f"need Z >= 0, a > 0, q > 0; got {self.Z}, {self.a}, {self.q}")
        expected = float(expit(-self.a * self.q))
        if self.Omega is None:
            object.__setattr__(self, "Omega", expected)
        elif not np.isclose(self.Omega, expected, rtol=1e-12, atol=0.0):
            raise InvalidParameterError(f"Omega {self.Omega} inconsistent with a, q (expected {expected})")
        if not 0.0 < self.Omega < 1.0:
            raise InvalidParameterError(f"Omega must lie in (0, 1), got {self.Omega}")


@dataclass(frozen=True)
class RisPowerParams:
    """PIN diode power, conversion circuit power, inverse amplifier efficiency, RIS noise power."""

    P_pin: float = 0.33e-3
    P_C: float = 10.0
    xi_amp: float = 1.1
    sigma_m_sq: float = 1e-10

    def __post_init__(self):
        if min(self.P_pin, self.P_C, self.xi_amp, self.sigma_m_sq) < 0:
            raise InvalidParameterError(f"RIS power parameters must be >= 0: {self}")


#####################################
# Configuration matrices
#####################################


def config_diagonal(cfg: MfRisConfig) -> CVector:
    """Diagonal of Theta: alpha_m sqrt(beta_m) exp(j theta_m)."""
    return cfg.alpha * np.sqrt(cfg.beta) * np.exp(1j * cfg.theta)


def config_matrix(cfg: MfRisConfig) -> CMatrix:
    """Theta as an M x M diagonal matrix."""
    return np.diag(config_diagonal(cfg))


def eh_matrix(m: int, alpha_m: float, M: int) -> CMatrix:
    """EH coefficient matrix T_m: zeros except 1 - alpha_m at (m, m)."""
    if not 0.0 <= alpha_m <= 1.0:
        raise InvalidParameterError(f"alpha_m must lie in [0, 1], got {alpha_m}")
    if not 0 <= m < M:
        raise InvalidParameterError(f"element index {m} out of range for M = {M}")
    T = np.zeros((M, M), dtype=np.complex128)
    T[m, m] = 1.0 - alpha_m
    return T


def quantize_config(cfg: MfRisConfig) -> MfRisConfig:
    """Snap alpha, beta, theta to uniform grids of L_alpha, L_beta, L_theta levels."""
    L_alpha, L_beta, L_theta = cfg.levels
    alpha = np.round(cfg.alpha * (L_alpha - 1)) / (L_alpha - 1)
    beta = np.round(cfg.beta / cfg.beta_max * (L_beta - 1)) / (L_beta - 1) * cfg.beta_max
    step = TWO_PI / L_theta
    theta = np.mod(np.round(cfg.theta / step), L_theta) * step
    return MfRisConfig(alpha, np.minimum(beta, cfg.beta_max), theta, cfg.beta_max, cfg.levels)


#####################################
# Energy harvesting
#####################################


def received_rf_power(
    m: int,
    H: CMatrix,
    w_sum: CVector,
    alpha_m: float,
    sigma_m_sq: float,
    rng: SeededRng,
) -> float:
    """
    RF power reaching the harvester of element m: ||T_m (H w_sum + n)||^2.

    n is a fresh CN(0, sigma_m^2 I_M) draw; only its m-th entry survives T_m.
    """
    H = as_cmatrix(H, "H")
    w_sum = np.asarray(w_sum, dtype=np.complex128)
    M, N = H.shape
    if w_sum.shape != (N,):
        raise InvalidParameterError(f"w_sum must have length {N}, got {w_sum.shape}")
    T = eh_matrix(m, alpha_m, M)
    noise = sample_cgauss(rng, M, sigma_m_sq)
    incident = H @ w_sum + noise
    return float(np.sum(np.abs(T @ incident) ** 2))


def received_rf_powers(
    H: CMatrix,
    w_sum: CVector,
    alpha: npt.NDArray[np.float64],
    noise: CVector,
) -> npt.NDArray[np.float64]:
    """Per-element RF power with one shared noise draw: (1 - alpha_m)^2 |H_m w_sum + n_m|^2."""
    incident = H @ w_sum + noise
    return (1.0 - alpha) ** 2 * (incident.real**2 + incident.imag**2)


def harvested_power(P_RF, hp: HarvestParams):
    """Non-linear harvested power (Upsilon - Z Omega) / (1 - Omega), in [0, Z]."""
    P_RF = np.asarray(P_RF, dtype=np.float64)
    if np.any(P_RF < 0):
        raise InvalidParameterError("received RF power must be >= 0")
    upsilon = hp.Z * expit(hp.a * (P_RF - hp.q))
    result = np.clip((upsilon - hp.Z * hp.Omega) / (1.0 - hp.Omega), 0.0, hp.Z)
    return float(result) if result.ndim == 0 else result


#####################################
# RIS power accounting
#####################################


def ris_output_power(theta_mat: CMatrix, H: CMatrix, w, sigma_m_sq: float) -> float:
    """Output power sum_k ||Theta H w_k||^2 + M sigma_m^2 ||Theta||_F^2; w is (K, N)."""
    theta_mat = as_cmatrix(theta_mat, "theta_mat")
    H = as_cmatrix(H, "H")
    w = np.atleast_2d(np.asarray(w, dtype=np.complex128))
    M, N = H.shape
    if theta_mat.shape != (M, M) or w.shape[1] != N:
        raise InvalidParameterError(
            f"dimension mismatch: theta {theta_mat.shape}, H {H.shape}, w {w.shape}"
        )
    out = theta_mat @ H @ w.T
    signal = float(np.sum(out.real**2 + out.imag**2))
    frob = float(np.sum(np.abs(theta_mat) ** 2))
    return signal + M * sigma_m_sq * frob


def pin_diode_count(levels: tuple[int, int, int]) -> float:
    """log2 L_alpha + log2 L_beta + 2 log2 L_theta."""
    if min(levels) < 2:
        raise InvalidParameterError(f"every quantization level must be >= 2, got {levels}")
    L_alpha, L_beta, L_theta = levels
    return float(np.log2(L_alpha) + np.log2(L_beta) + 2.0 * np.log2(L_theta))


def ris_power_consumption(
    cfg: MfRisConfig,
    P_O: float,
    rp: RisPowerParams,
    active_elements: int | None = None,
) -> float:
    """
    MF-RIS consumption: half the PIN diode count per element times P_pin,
    plus the conversion circuit and the amplifier (xi * P_O).

    active_elements defaults to every element of cfg.
    """
    count = cfg.num_elements if active_elements is None else active_elements
    return 0.5 * pin_diode_count(cfg.levels) * count * rp.P_pin + rp.P_C + rp.xi_amp * P_O


def reflecting_power_consumption(num_elements: int, levels: tuple[int, int, int], rp: RisPowerParams) -> float:
    """Phase-only surface: log2 L_theta PIN diodes per element, no converter, no amplifier."""
    if num_elements < 0:
        raise InvalidParameterError(f"num_elements must be >= 0, got {num_elements}")
    if levels[2] < 2:
        raise InvalidParameterError(f"L_theta must be >= 2, got {levels[2]}")
    return float(np.log2(levels[2])) * num_elements * rp.P_pin
