import numpy as np
import pytest

from utils.utils_errors import ConfigError, InvalidParameterError
from utils.utils_numerics import (
    as_cmatrix,
    as_cvector,
    db_to_linear,
    dbm_to_watt,
    frob_norm_sq,
    hermitian,
    kron,
    make_rng,
    sample_cgauss,
)


def test_kron_hand_expansion():
    np.testing.assert_array_equal(kron([1, -1], [1, 1j]), [1, 1j, -1, -1j])


def test_kron_unit_left_factor_is_identity():
    v = np.array([2 - 1j, 0.5, 3j])
    np.testing.assert_array_equal(kron([1], v), v)


def test_kron_matches_double_loop():
    rng = make_rng(7)
    a = sample_cgauss(rng, 3, 1.0)
    b = sample_cgauss(rng, 4, 1.0)
    expected = np.empty(12, dtype=np.complex128)
    for i in range(3):
        for j in range(4):
            expected[i * 4 + j] = a[i] * b[j]
    np.testing.assert_allclose(kron(a, b), expected, rtol=1e-15, atol=0)


def test_kron_is_bilinear():
    rng = make_rng(9)
    a1, a2 = sample_cgauss(rng, 3, 1.0), sample_cgauss(rng, 3, 1.0)
    b1, b2 = sample_cgauss(rng, 2, 1.0), sample_cgauss(rng, 2, 1.0)
    s, t = 0.7 - 1.3j, -2.1 + 0.4j
    np.testing.assert_allclose(kron(s * a1 + t * a2, b1), s * kron(a1, b1) + t * kron(a2, b1), rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(kron(a1, s * b1 + t * b2), s * kron(a1, b1) + t * kron(a1, b2), rtol=1e-12, atol=1e-12)


def test_hermitian():
    np.testing.assert_array_equal(hermitian(np.eye(3)), np.eye(3))
    np.testing.assert_array_equal(hermitian([[1j]]), [[-1j]])


def test_frob_norm_sq():
    assert frob_norm_sq(np.zeros((3, 2))) == 0.0
    assert frob_norm_sq(np.ones((2, 2))) == 4.0
    m = sample_cgauss(make_rng(3), (5, 4), 2.0)
    expected = sum(abs(m[i, j]) ** 2 for i in range(5) for j in range(4))
    assert frob_norm_sq(m) == pytest.approx(expected, rel=1e-14)


def test_frob_norm_sq_ignores_conjugate_transpose():
    m = sample_cgauss(make_rng(10), (4, 6), 1.5)
    assert frob_norm_sq(hermitian(m)) == pytest.approx(frob_norm_sq(m), rel=1e-14)


def test_validation_rejects_bad_shapes_and_nan():
    with pytest.raises(InvalidParameterError):
        as_cvector(np.zeros((2, 2)))
    with pytest.raises(InvalidParameterError):
        as_cmatrix(np.zeros(3))
    with pytest.raises(InvalidParameterError):
        as_cvector([1.0, np.nan])


def test_sample_cgauss_zero_variance():
    np.testing.assert_array_equal(sample_cgauss(make_rng(1), 8, 0.0), np.zeros(8))


def test_sample_cgauss_is_deterministic():
    np.testing.assert_array_equal(sample_cgauss(make_rng(42), 16, 1.0), sample_cgauss(make_rng(42), 16, 1.0))


def test_sample_cgauss_second_moment():
    x = sample_cgauss(make_rng(0), 100_000, 1.0)
    assert 0.98 <= np.mean(np.abs(x) ** 2) <= 1.02


def test_sample_cgauss_negative_variance():
    with pytest.raises(InvalidParameterError):
        sample_cgauss(make_rng(0), 4, -1.0)


def test_unit_helpers():
    assert db_to_linear(-20) == pytest.approx(0.01)
    assert db_to_linear(3) == pytest.approx(1.9952623, rel=1e-7)
    assert dbm_to_watt(-70) == pytest.approx(1e-10)
    assert dbm_to_watt(30) == pytest.approx(1.0)


def test_config_error_is_line_anchored():
    err = ConfigError("unknown key 'x'", "configs/a.env", 4)
    assert str(err).startswith("configs/a.env:4: ")
    assert isinstance(err, ValueError)
