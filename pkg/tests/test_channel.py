import numpy as np
import pytest

from physics.channel import (
    ChannelParams,
    SteeringAngles,
    combined_channel,
    combined_channels,
    draw_realization,
    link_angles,
    los_matrix,
    place_users,
    rate,
    rician,
    satellite_frame,
    satellite_position,
    sinr,
    sinr_matrix,
    steering_vector,
)
from utils.utils_errors import InvalidParameterError
from utils.utils_numerics import make_rng, sample_cgauss

PARAMS = ChannelParams(wavelength=0.12, d_elem=0.06)


def sinr_loop_oracle(g, w, sigma_sq, mode="as_written"):
    L, K, _ = g.shape
    out = np.zeros((L, K))
    for l in range(L):
        for k in range(K):
            desired = abs(g[l, k] @ w[l, k]) ** 2
            intra = sum(abs(g[l, k] @ w[l, j]) ** 2 for j in range(K) if j != k)
            inter = 0.0
            for lp in range(L):
                if lp == l:
                    continue
                for j in range(K):
                    if mode == "all_users" or j != k:
                        inter += abs(g[lp, k] @ w[lp, j]) ** 2
            out[l, k] = desired / (intra + inter + sigma_sq)
    return out


def test_steering_vector_half_wavelength_flip():
    v = steering_vector(2, np.pi / 2, np.pi / 2, PARAMS, "sin_sin")
    np.testing.assert_allclose(v, [1, -1], atol=1e-12)


def test_steering_vector_zero_angle_is_ones():
    np.testing.assert_array_equal(steering_vector(5, 0.0, 1.3, PARAMS), np.ones(5))


def test_steering_vector_matches_scalar_exponential():
    phi, theta = np.pi / 4, np.pi / 3
    v = steering_vector(4, phi, theta, PARAMS, "sin_sin")
    for i in range(4):
        expected = np.exp(-1j * 2 * np.pi / PARAMS.wavelength * i * PARAMS.d_elem * np.sin(phi) * np.sin(theta))
        assert v[i] == pytest.approx(expected, rel=1e-14)


def test_steering_vector_rejects_empty_array():
    with pytest.raises(InvalidParameterError):
        steering_vector(0, 0.1, 0.1, PARAMS)


def test_los_matrix_trivial_cases():
    zero = SteeringAngles(0.0, 0.0, 0.0, 0.0)
    np.testing.assert_array_equal(los_matrix(1, 1, 1, zero, PARAMS), [[1]])
    np.testing.assert_array_equal(los_matrix(2, 3, 4, zero, PARAMS), np.ones((6, 4)))


def test_los_matrix_is_rank_one():
    rng = np.random.default_rng(5)
    angles = SteeringAngles(*rng.uniform(0, np.pi, size=4))
    H = los_matrix(2, 2, 2, angles, PARAMS)
    for i in range(4):
        for j in range(i + 1, 4):
            minor = H[i, 0] * H[j, 1] - H[i, 1] * H[j, 0]
            assert abs(minor) < 1e-12


def test_los_matrix_dimension_mismatch():
    with pytest.raises(InvalidParameterError):
        los_matrix(2, 2, 2, SteeringAngles(0.1, 0.2, 0.3, 0.4), PARAMS, M=5)


def test_rician_pure_los_limit():
    params = ChannelParams(h0=0.01, k0=2.2, beta0=1e12)
    los = np.exp(1j * np.arange(6))
    out = rician(los, 3.0, params, make_rng(0))
    np.testing.assert_allclose(out, np.sqrt(0.01 * 3.0**-2.2) * los, rtol=1e-5)


def test_rician_unit_pathloss():
    params = ChannelParams(h0=1.0, k0=3.7)
    assert params.path_gain(1.0) == 1.0


def test_rician_rejects_non_positive_distance():
    with pytest.raises(InvalidParameterError):
        rician(np.ones(2), 0.0, PARAMS, make_rng(0))


def test_rician_without_los_is_uncorrelated_with_los():
    params = ChannelParams(h0=1.0, beta0=0.0)
    los = np.exp(1j * 0.3 * np.arange(8))
    rng = make_rng(1)
    corr = np.mean([np.vdot(los, rician(los, 1.0, params, rng)) / 8 for _ in range(4000)])
    assert abs(corr) < 0.05


def test_combined_channel_direct_path_only():
    rng = make_rng(2)
    h = sample_cgauss(rng, 3, 1.0)
    r = sample_cgauss(rng, 4, 1.0)
    H = sample_cgauss(rng, (4, 3), 1.0)
    np.testing.assert_array_equal(combined_channel(h, r, np.zeros((4, 4)), H), h.conj())


def test_combined_channel_scalar_case():
    g = combined_channel([1], [1], [[2]], [[3]])
    np.testing.assert_array_equal(g, [7])


def test_combined_channel_matches_loop_oracle():
    rng = make_rng(3)
    N, M = 4, 8
    h = sample_cgauss(rng, N, 1.0)
    r = sample_cgauss(rng, M, 1.0)
    H = sample_cgauss(rng, (M, N), 1.0)
    theta = np.diag(sample_cgauss(rng, M, 1.0))
    expected = np.array(
        [np.conj(h[n]) + sum(np.conj(r[i]) * theta[i, j] * H[j, n] for i in range(M) for j in range(M)) for n in range(N)]
    )
    np.testing.assert_allclose(combined_channel(h, r, theta, H), expected, rtol=1e-12)


def test_combined_channel_dimension_mismatch():
    with pytest.raises(InvalidParameterError):
        combined_channel(np.ones(3), np.ones(4), np.eye(4), np.ones((4, 2)))


def test_combined_channels_agree_with_single_link():
    rng = make_rng(4)
    sat_thetas = np.array([-np.pi, 0.3])
    users = place_users(sat_thetas, np.array([0, 1, 0]), 6.378e6, 2e5, rng)
    real = draw_realization(sat_thetas, users, 7.378e6, 2, 2, 3, SteeringAngles(1.0, 0.7, 0.5, 1.0), 2.0, 1e5, PARAMS, rng)
    diag = sample_cgauss(rng, (2, 4), 1.0)
    g = combined_channels(real, diag)
    for l in range(2):
        for k in range(3):
            np.testing.assert_allclose(
                g[l, k], combined_channel(real.h[l, k], real.r[l, k], np.diag(diag[l]), real.H[l]), rtol=1e-12
            )
    assert real.dims == (2, 3, 3, 4)


def test_sinr_single_link_has_no_interference():
    g = np.array([[[1.0 + 1j, 0.5]]])
    w = np.array([[[0.2, 1j]]])
    expected = abs(g[0, 0] @ w[0, 0]) ** 2 / 1e-3
    assert sinr(g, w, 1e-3, 0, 0) == pytest.approx(expected, rel=1e-14)


def test_sinr_zero_beamformer():
    rng = make_rng(5)
    g = sample_cgauss(rng, (2, 2, 3), 1.0)
    w = sample_cgauss(rng, (2, 2, 3), 1.0)
    w[1, 0] = 0.0
    assert sinr(g, w, 1e-2, 1, 0) == 0.0


@pytest.mark.parametrize("mode", ["as_written", "all_users"])
def test_sinr_matches_loop_oracle(mode):
    rng = make_rng(6)
    for _ in range(100):
        g = sample_cgauss(rng, (2, 3, 4), 1.0)
        w = sample_cgauss(rng, (2, 3, 4), 1.0)
        np.testing.assert_allclose(sinr_matrix(g, w, 0.1, mode), sinr_loop_oracle(g, w, 0.1, mode), rtol=1e-10)


@pytest.mark.parametrize("mode", ["as_written", "all_users"])
def test_common_phase_on_one_leo_leaves_every_sinr_unchanged(mode):
    rng = make_rng(7)
    g = sample_cgauss(rng, (3, 3, 2), 1.0)
    w = sample_cgauss(rng, (3, 3, 2), 1.0)
    rotated = w.copy()
    rotated[1] *= np.exp(0.7j)
    np.testing.assert_allclose(sinr_matrix(g, rotated, 0.05, mode), sinr_matrix(g, w, 0.05, mode), rtol=1e-12)


def test_more_noise_never_raises_a_rate():
    rng = make_rng(8)
    for _ in range(20):
        g = sample_cgauss(rng, (2, 3, 4), 1.0)
        w = sample_cgauss(rng, (2, 3, 4), 1.0)
        quiet = rate(sinr_matrix(g, w, 1e-3))
        loud = rate(sinr_matrix(g, w, 1e-1))
        assert np.all(loud <= quiet)


def test_sinr_rejects_bad_noise():
    with pytest.raises(InvalidParameterError):
        sinr_matrix(np.ones((1, 1, 1)), np.ones((1, 1, 1)), 0.0)


def test_rate_values():
    assert rate(0.0) == 0.0
    assert rate(1.0) == 1.0
    assert rate(3.0) == 2.0
    with pytest.raises(InvalidParameterError):
        rate(-0.5)


def test_rate_is_strictly_increasing():
    gammas = np.concatenate([[0.0], np.logspace(-12, 6, 400)])
    assert np.all(np.diff(rate(gammas)) > 0)


def test_nadir_user_is_straight_below():
    theta = 0.7
    R_e, R = 6.378e6, 7.378e6
    pos = satellite_position(theta, R)
    frame = satellite_frame(theta)
    phi, _, dist = link_angles(pos, frame, -frame[2] * R_e)
    assert phi == pytest.approx(0.0, abs=1e-7)
    assert dist == pytest.approx(R - R_e)
    np.testing.assert_allclose(frame @ frame.T, np.eye(3), atol=1e-12)


def test_users_sit_on_earth_surface():
    users = place_users(np.array([0.0, 2.0]), np.array([0, 1, 0, 1]), 6.378e6, 2e5, make_rng(9))
    np.testing.assert_allclose(np.linalg.norm(users, axis=1), 6.378e6, rtol=1e-12)
