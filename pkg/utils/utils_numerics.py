"""
utils_numerics.py - complex linear algebra primitives and seeded sampling.

Matrices and vectors are plain numpy complex128 arrays. Indexing is row-major:
entry (i, j) of an M x N matrix lives at flat position i*N + j.
"""

#####################################
# Import Modules
#####################################

from __future__ import annotations

import numpy as np
import numpy.typing as npt

from utils.utils_errors import InvalidParameterError

#####################################
# Types
#####################################

CVector = npt.NDArray[np.complex128]
CMatrix = npt.NDArray[np.complex128]
RVector = npt.NDArray[np.float64]
SeededRng = np.random.Generator

#####################################
# Construction and validation
#####################################


def make_rng(seed: int) -> SeededRng:
    """Return a PCG64 generator. Identical seeds give identical streams."""
    return np.random.default_rng(seed % 2**64)


def as_cvector(values, name: str = "vector") -> CVector:
    """Convert to a 1-D complex128 array and check every entry is finite."""
    arr = np.asarray(values, dtype=np.complex128)
    if arr.ndim != 1:
        raise InvalidParameterError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError(f"{name} has non-finite entries")
    return arr


def as_cmatrix(values, name: str = "matrix") -> CMatrix:
    """Convert to a 2-D complex128 array and check every entry is finite."""
    arr = np.asarray(values, dtype=np.complex128)
    if arr.ndim != 2:
        raise InvalidParameterError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError(f"{name} has non-finite entries")
    return arr


#####################################
# Operations
#####################################


def kron(a: CVector, b: CVector) -> CVector:
    """Kronecker product of two vectors: result[i*len(b) + j] = a[i] * b[j]."""
    return np.kron(as_cvector(a, "a"), as_cvector(b, "b"))


def hermitian(m: CMatrix) -> CMatrix:
    """Conjugate transpose."""
    return as_cmatrix(m).conj().T


def frob_norm_sq(m: CMatrix) -> float:
    """Sum of squared magnitudes of all entries."""
    arr = np.asarray(m, dtype=np.complex128)
    return float(np.sum(arr.real**2 + arr.imag**2))


def sample_cgauss(rng: SeededRng, size: int | tuple[int, ...], variance: float) -> CVector:
    """
    Draw circularly symmetric complex Gaussian entries with E[|x|^2] = variance.

    Real and imaginary parts are independent Normal(0, variance/2). The real
    parts are drawn before the imaginary parts so a call consumes a fixed
    amount of the stream for a given size.
    """
    if variance < 0:
        raise InvalidParameterError(f"variance must be >= 0, got {variance}")
    scale = np.sqrt(variance / 2.0)
    real = rng.standard_normal(size)
    imag = rng.standard_normal(size)
    return scale * (real + 1j * imag)


#####################################
# Unit helpers
#####################################


def db_to_linear(value_db: float) -> float:
    """Convert a power ratio in dB to linear scale."""
    return float(10.0 ** (value_db / 10.0))


def dbm_to_watt(value_dbm: float) -> float:
    """Convert a power in dBm to watts."""
    return float(10.0 ** (value_dbm / 10.0) / 1000.0)
