"""
channel.py - Rician channels, orbital link geometry, combined channels, SINR and rate.

Array conventions (one time slot):
    H  (L, M, N)  LEO l -> its own MF-RIS
    h  (L, K, N)  LEO l -> user k
    r  (L, K, M)  MF-RIS l -> user k
    g  (L, K, N)  combined channel, row-semantic (already conjugated)
    w  (L, K, N)  beamformer of LEO l for user k
"""

#####################################
# Import Modules
#####################################

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
import numpy.typing as npt

from utils.utils_errors import InvalidParameterError
from utils.utils_numerics import (
    CMatrix,
    CVector,
    SeededRng,
    as_cmatrix,
    as_cvector,
    kron,
    sample_cgauss,
)

SteeringMode = Literal["sin_sin", "sin_cos"]
InterferenceMode = Literal["as_written", "all_users"]
INTERFERENCE_MODES: tuple[str, ...] = ("as_written", "all_users")

#####################################
# Domain Types
#####################################


@dataclass(frozen=True)
class SteeringAngles:
    """Vertical/horizontal angle of arrival and of departure, radians."""

    phi_r: float
    theta_r: float
    phi_t: float
    theta_t: float

    def __post_init__(self):
        if not np.all(np.isfinite([self.phi_r, self.theta_r, self.phi_t, self.theta_t])):
            raise InvalidParameterError(f"steering angles must be finite: {self}")


@dataclass(frozen=True)
class ChannelParams:
    """
    Large-scale channel constants.

    h0 is the linear path loss at unit distance, k0 the path-loss exponent,
    beta0 the linear Rician factor, wavelength and d_elem in metres.
    """

    h0: float = 0.01
    k0: float = 2.2
    beta0: float = 10 ** 0.3
    wavelength: float = 0.12
    d_elem: float = 0.06

    def __post_init__(self):
        if self.h0 <= 0 or self.k0 <= 0:
            raise InvalidParameterError(f"h0 and k0 must be > 0, got {self.h0}, {self.k0}")
        if self.beta0 < 0:
            raise InvalidParameterError(f"beta0 must be >= 0, got {self.beta0}")
        if self.wavelength <= 0 or self.d_elem <= 0:
            raise InvalidParameterError("wavelength and d_elem must be > 0")

    def path_gain(self, distance: float) -> float:
        """Linear power gain h0 * d^-k0."""
        return self.h0 * distance ** (-self.k0)


@dataclass(frozen=True)
class ChannelRealization:
    """All channel arrays of one slot."""

    H: npt.NDArray[np.complex128]
    h: npt.NDArray[np.complex128]
    r: npt.NDArray[np.complex128]

    @property
    def dims(self) -> tuple[int, int, int, int]:
        """(L, K, N, M)."""
        num_leo, num_users, num_antennas = self.h.shape
        return num_leo, num_users, num_antennas, self.r.shape[2]


#####################################
# Steering vectors and LoS matrices
#####################################


def steering_vector(
    n: int,
    phi: float,
    theta: float,
    params: ChannelParams,
    mode: SteeringMode = "sin_sin",
) -> CVector:
    """Uniform linear array response, entry i = exp(-j 2pi/lambda i d f(phi, theta))."""
    if n < 1:
        raise InvalidParameterError(f"array size must be >= 1, got {n}")
    if mode == "sin_sin":
        spatial = np.sin(phi) * np.sin(theta)
    elif mode == "sin_cos":
        spatial = np.sin(phi) * np.cos(theta)
    else:
        raise InvalidParameterError(f"unknown steering mode '{mode}'")
    phase = 2.0 * np.pi / params.wavelength * params.d_elem * spatial
    return np.exp(-1j * phase * np.arange(n))


def los_matrix(
    M_h: int,
    M_v: int,
    N: int,
    angles: SteeringAngles,
    params: ChannelParams,
    M: int | None = None,
) -> CMatrix:
    """
    LoS matrix of the LEO -> MF-RIS link.

    The vertical arrival vector (M_v, sin*sin), the horizontal arrival vector
    (M_h, sin*cos) and the departure vector (N, sin*cos) are chained with
    Kronecker products in that order and the MN-long result fills the M x N
    matrix row-major.
    """
    if M is not None and M_h * M_v != M:
        raise InvalidParameterError(f"M_h * M_v = {M_h * M_v} does not match M = {M}")
    vertical = steering_vector(M_v, angles.phi_r, angles.theta_r, params, "sin_sin")
    horizontal = steering_vector(M_h, angles.phi_r, angles.theta_r, params, "sin_cos")
    departure = steering_vector(N, angles.phi_t, angles.theta_t, params, "sin_cos")
    return kron(kron(vertical, horizontal), departure).reshape(M_h * M_v, N)


def rician(
    los: npt.NDArray[np.complex128],
    distance: float,
    params: ChannelParams,
    rng: SeededRng,
) -> npt.NDArray[np.complex128]:
    """Rician fading around a LoS array of any shape; NLoS entries unit-variance."""
    if distance <= 0:
        raise InvalidParameterError(f"distance must be > 0, got {distance}")
    los = np.asarray(los, dtype=np.complex128)
    nlos = sample_cgauss(rng, los.shape, 1.0)
    k_los = np.sqrt(params.beta0 / (params.beta0 + 1.0))
    k_nlos = np.sqrt(1.0 / (params.beta0 + 1.0))
    return np.sqrt(params.path_gain(distance)) * (k_los * los + k_nlos * nlos)


#####################################
# Orbital link geometry
#####################################


def satellite_position(theta_rot: float, orbit_radius: float) -> npt.NDArray[np.float64]:
    """
    Position on a circular orbit in the x-y plane, sunlight along +x.

    theta_rot = 0 is the midpoint of the shaded arc, i.e. the anti-sun point.
    """
    u = theta_rot + np.pi
    return orbit_radius * np.array([np.cos(u), np.sin(u), 0.0])


def satellite_frame(theta_rot: float) -> npt.NDArray[np.float64]:
    """Rows: along-track, cross-track, nadir unit vectors."""
    u = theta_rot + np.pi
    along = np.array([-np.sin(u), np.cos(u), 0.0])
    nadir = -np.array([np.cos(u), np.sin(u), 0.0])
    cross = np.cross(nadir, along)
    return np.stack([along, cross, nadir])


def link_angles(
    sat_pos: npt.NDArray[np.float64],
    frame: npt.NDArray[np.float64],
    target: npt.NDArray[np.float64],
) -> tuple[float, float, float]:
    """(off-nadir angle, azimuth, distance in metres) of a target seen from a satellite."""
    rel = np.asarray(target, dtype=np.float64) - sat_pos
    distance = float(np.linalg.norm(rel))
    if distance <= 0:
        raise InvalidParameterError("target coincides with the satellite")
    local = frame @ rel
    phi = float(np.arccos(np.clip(local[2] / distance, -1.0, 1.0)))
    theta = float(np.arctan2(local[1], local[0]))
    return phi, theta, distance


def place_users(
    sat_thetas: npt.NDArray[np.float64],
    assignment: npt.NDArray[np.int64],
    earth_radius: float,
    spread: float,
    rng: SeededRng,
) -> npt.NDArray[np.float64]:
    """
    Put each user on the Earth's surface near the sub-satellite point of its LEO.

    Offsets are uniform in a square of side 2*spread in the local tangent plane.
    """
    users = np.empty((len(assignment), 3))
    for k, leo in enumerate(assignment):
        frame = satellite_frame(float(sat_thetas[leo]))
        sub_point = -frame[2] * earth_radius
        offset = rng.uniform(-spread, spread, size=2)
        point = sub_point + offset[0] * frame[0] + offset[1] * frame[1]
        users[k] = point * (earth_radius / np.linalg.norm(point))
    return users


def draw_realization(
    sat_thetas: npt.NDArray[np.float64],
    user_positions: npt.NDArray[np.float64],
    orbit_radius: float,
    M_h: int,
    M_v: int,
    N: int,
    ris_angles: SteeringAngles,
    ris_distance: float,
    distance_scale: float,
    params: ChannelParams,
    rng: SeededRng,
) -> ChannelRealization:
    """
    Draw every channel of one slot.

    LoS parts are fixed by the geometry; NLoS parts are redrawn on each call.
    User-link distances are divided by distance_scale before path loss; the
    on-board LEO -> MF-RIS distance is used as given.
    """
    num_leo = len(sat_thetas)
    num_users = len(user_positions)
    M = M_h * M_v
    H = np.empty((num_leo, M, N), dtype=np.complex128)
    h = np.empty((num_leo, num_users, N), dtype=np.complex128)
    r = np.empty((num_leo, num_users, M), dtype=np.complex128)
    H_los = los_matrix(M_h, M_v, N, ris_angles, params, M)
    for l in range(num_leo):
        H[l] = rician(H_los, ris_distance, params, rng)
        pos = satellite_position(float(sat_thetas[l]), orbit_radius)
        frame = satellite_frame(float(sat_thetas[l]))
        for k in range(num_users):
            phi, theta, dist = link_angles(pos, frame, user_positions[k])
            dist = dist / distance_scale
            h[l, k] = rician(steering_vector(N, phi, theta, params, "sin_sin"), dist, params, rng)
            r[l, k] = rician(steering_vector(M, phi, theta, params, "sin_sin"), dist, params, rng)
    return ChannelRealization(H=H, h=h, r=r)


#####################################
# Combined channel, SINR, rate
#####################################


def combined_channel(h: CVector, r: CVector, theta_mat: CMatrix, H: CMatrix) -> CVector:
    """g = h^H + r^H Theta H as a length-N row vector."""
    h = as_cvector(h, "h")
    r = as_cvector(r, "r")
    theta_mat = as_cmatrix(theta_mat, "theta_mat")
    H = as_cmatrix(H, "H")
    M, N = H.shape
    if h.shape[0] != N or r.shape[0] != M or theta_mat.shape != (M, M):
        raise InvalidParameterError(
            f"dimension mismatch: h {h.shape}, r {r.shape}, theta {theta_mat.shape}, H {H.shape}"
        )
    return h.conj() + r.conj() @ theta_mat @ H


def combined_channels(realization: ChannelRealization, theta_diag: npt.NDArray) -> npt.NDArray:
    """All g_{l,k} at once; theta_diag is (L, M), the diagonals of every Theta_l."""
    # r^H Theta H = sum_m conj(r_m) * theta_m * H[m, :]
    weighted = realization.r.conj() * theta_diag[:, None, :]
    return realization.h.conj() + np.einsum("lkm,lmn->lkn", weighted, realization.H)


def _validate_sinr_inputs(g_all, w_all, sigma_sq: float, interference_mode: str):
    g_all = np.asarray(g_all, dtype=np.complex128)
    w_all = np.asarray(w_all, dtype=np.complex128)
    if g_all.ndim != 3 or g_all.shape != w_all.shape:
        raise InvalidParameterError(
            f"g and w must both be (L, K, N), got {g_all.shape} and {w_all.shape}"
        )
    if sigma_sq <= 0:
        raise InvalidParameterError(f"noise power must be > 0, got {sigma_sq}")
    if interference_mode not in INTERFERENCE_MODES:
        raise InvalidParameterError(f"unknown interference mode '{interference_mode}'")
    return g_all, w_all


def sinr_matrix(
    g_all,
    w_all,
    sigma_sq: float,
    interference_mode: InterferenceMode = "as_written",
) -> npt.NDArray[np.float64]:
    """
    SINR of every (l, k) pair, shape (L, K).

    The inter-LEO term sums |g_{l',k} w_{l',k'}|^2 over l' != l and k' != k in
    "as_written" mode and over every k' in "all_users" mode.
    """
    g_all, w_all = _validate_sinr_inputs(g_all, w_all, sigma_sq, interference_mode)
    # power[l, k, j] = |g_{l,k} . w_{l,j}|^2
    power = np.abs(np.einsum("lkn,ljn->lkj", g_all, w_all)) ** 2
    desired = np.einsum("lkk->lk", power)
    row_total = power.sum(axis=2)
    intra = row_total - desired
    per_leo = row_total if interference_mode == "all_users" else intra
    inter = per_leo.sum(axis=0, keepdims=True) - per_leo
    return desired / (intra + inter + sigma_sq)


def sinr(
    g_all,
    w_all,
    sigma_sq: float,
    l: int,
    k: int,
    interference_mode: InterferenceMode = "as_written",
) -> float:
    """SINR of user k served by LEO l."""
    return float(sinr_matrix(g_all, w_all, sigma_sq, interference_mode)[l, k])


def rate(gamma):
    """Achievable rate log2(1 + gamma) in bits/s/Hz."""
    gamma_arr = np.asarray(gamma, dtype=np.float64)
    if np.any(gamma_arr < 0):
        raise InvalidParameterError("SINR must be >= 0")
    result = np.log2(1.0 + gamma_arr)
    return float(result) if result.ndim == 0 else result
