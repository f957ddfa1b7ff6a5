"""Batched Hermitian matrix calculus.

Matrices are numpy arrays whose two trailing axes hold a D x D matrix; any
leading axes index pixels.  An image is therefore one (..., D, D) array of
matrices rather than D^2 separate entry planes, so batched LAPACK and the
closed-form 2 x 2 path work on it directly; the D = 2 path splits out the a,
b, c planes internally.  Every function returning a matrix returns an
exactly Hermitian one (upper and lower triangles are conjugates bit for bit
and the diagonal is real).
"""

import logging
from typing import Optional, Tuple

import numpy as np

from .exceptions import InvalidInputError, MatrixOverflowError, NotPositiveDefiniteError

log = logging.getLogger(__name__)

# Largest eigenvalue whose exponential is still a finite double
EXP_LIMIT = float(np.log(np.finfo(np.float64).max))
DEGENERATE_RTOL = 1e-12
EIGENVALUE_RTOL = 1e-12


def _check_square(m) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise InvalidInputError(f"expected (..., D, D) matrices, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("matrix entries must be finite")
    return m


def _first_pixel(mask: np.ndarray, batched: bool) -> Optional[int]:
    if not batched:
        return None
    return int(np.flatnonzero(mask)[0])


def conj_t(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def hermitize(m) -> np.ndarray:
    """Return (M + M*)/2, which is Hermitian to the last bit."""
    m = np.asarray(m, dtype=np.complex128)
    return 0.5 * (m + conj_t(m))


def trace(m) -> np.ndarray:
    return np.trace(np.asarray(m), axis1=-2, axis2=-1).real


def eigenvalue_floor(m) -> np.ndarray:
    """Smallest eigenvalue accepted by the matrix logarithm, per matrix."""
    m = np.asarray(m)
    d = m.shape[-1]
    return EIGENVALUE_RTOL * np.maximum(trace(m) / d, 1.0)


def _fix_phase(v: np.ndarray) -> np.ndarray:
    # Rotate each eigenvector so its largest-magnitude entry is real positive
    idx = np.argmax(np.abs(v), axis=-2)
    pick = np.take_along_axis(v, idx[..., None, :], axis=-2)
    return v * np.conj(pick / np.abs(pick))


def eig_hermitian(m) -> Tuple[np.ndarray, np.ndarray]:
    """Return (eigvals ascending, unit-norm eigenvectors as columns)."""
    m = hermitize(_check_square(m))
    w, v = np.linalg.eigh(m)
    return w, _fix_phase(v)


def _spectral(w: np.ndarray, v: np.ndarray, fw: np.ndarray) -> np.ndarray:
    return hermitize((v * fw[..., None, :]) @ conj_t(v))


def mat_log(m) -> np.ndarray:
    m = _check_square(m)
    w, v = eig_hermitian(m)
    bad = w[..., 0] <= eigenvalue_floor(m)
    if np.any(bad):
        raise NotPositiveDefiniteError(
            "matrix logarithm requires positive definite matrices",
            _first_pixel(bad, m.ndim > 2),
        )
    return _spectral(w, v, np.log(w))


def mat_exp(m) -> np.ndarray:
    m = _check_square(m)
    w, v = eig_hermitian(m)
    _check_overflow(w[..., -1], m.ndim > 2)
    return _spectral(w, v, np.exp(w))


def _check_overflow(top: np.ndarray, batched: bool) -> None:
    over = top > EXP_LIMIT
    if np.any(over):
        raise MatrixOverflowError(
            f"matrix exponential overflows: eigenvalue above {EXP_LIMIT:.2f}",
            _first_pixel(over, batched),
        )


def mat_power(m, p: float) -> np.ndarray:
    """Fractional power of Hermitian positive definite matrices (p=0.5 for sqrt)."""
    m = _check_square(m)
    w, v = eig_hermitian(m)
    bad = w[..., 0] <= eigenvalue_floor(m)
    if np.any(bad):
        raise NotPositiveDefiniteError(
            "matrix power requires positive definite matrices",
            _first_pixel(bad, m.ndim > 2),
        )
    return _spectral(w, v, w**p)


def mat_sqrt(m) -> np.ndarray:
    return mat_power(m, 0.5)


def _planes_2x2(m) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    m = _check_square(m)
    if m.shape[-1] != 2:
        raise InvalidInputError(f"closed-form path needs 2x2 matrices, got {m.shape[-1]}")
    m = np.asarray(m, dtype=np.complex128)
    # C = [[a, c*], [c, b]]
    c = 0.5 * (m[..., 1, 0] + np.conj(m[..., 0, 1]))
    return m[..., 0, 0].real, m[..., 1, 1].real, c


def _assemble_2x2(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    out = np.empty(np.shape(a) + (2, 2), dtype=np.complex128)
    out[..., 0, 0] = a
    out[..., 1, 1] = b
    out[..., 1, 0] = c
    out[..., 0, 1] = np.conj(c)
    return out


def mat_log_2x2(m) -> np.ndarray:
    """Closed-form logarithm of 2x2 Hermitian positive definite matrices.

    Branchless over the stack.  With delta = sqrt(4|c|^2 + (a-b)^2) and
    eigenvalues l1 >= l2, the result is the mean log-eigenvalue on the
    diagonal plus (a-b)/2 * g, -(a-b)/2 * g and c * g, where
    g = (log l1 - log l2) / delta.  When delta < 1e-12 (a+b) the limit
    g = 2 / (a+b) is used.
    """
    batched = np.ndim(m) > 2
    a, b, c = _planes_2x2(m)
    abs_c2 = c.real**2 + c.imag**2
    det = a * b - abs_c2
    delta = np.sqrt(4.0 * abs_c2 + (a - b) ** 2)
    l1 = 0.5 * (a + b + delta)
    with np.errstate(divide="ignore", invalid="ignore"):
        # Smaller eigenvalue from the determinant avoids cancellation
        l2 = det / l1
        bad = ~((a > 0) & (b > 0) & (l2 > EIGENVALUE_RTOL * np.maximum(0.5 * (a + b), 1.0)))
    if np.any(bad):
        raise NotPositiveDefiniteError(
            "matrix logarithm requires positive definite matrices",
            _first_pixel(bad, batched),
        )
    degenerate = delta < DEGENERATE_RTOL * (a + b)
    safe = np.where(degenerate, 1.0, delta)
    g = np.where(degenerate, 2.0 / (a + b), np.log1p(safe / l2) / safe)
    mean = np.where(degenerate, np.log(0.5 * (a + b)), 0.5 * (np.log(l1) + np.log(l2)))
    half = 0.5 * (a - b) * g
    return _assemble_2x2(mean + half, mean - half, c * g)


def mat_exp_2x2(m) -> np.ndarray:
    """Closed-form exponential of 2x2 Hermitian matrices (inverse of mat_log_2x2)."""
    batched = np.ndim(m) > 2
    a, b, c = _planes_2x2(m)
    delta = np.sqrt(4.0 * (c.real**2 + c.imag**2) + (a - b) ** 2)
    s = 0.5 * (a + b)
    t = 0.5 * delta
    _check_overflow(s + t, batched)
    small = t < 1e-4
    safe = np.where(small, 1.0, t)
    # (e1 - e2) / delta = exp(s) sinh(t) / t
    sinhc = np.where(small, 1.0 + t * t / 6.0, np.sinh(safe) / safe)
    es = np.exp(s)
    h = es * sinhc
    mean = es * np.cosh(t)
    half = 0.5 * (a - b) * h
    return _assemble_2x2(mean + half, mean - half, c * h)


def mat_log_fast(m) -> np.ndarray:
    """Matrix logarithm, taking the closed-form path for 2x2 stacks."""
    if np.shape(m)[-1] == 2:
        return mat_log_2x2(m)
    return mat_log(m)


def mat_exp_fast(m) -> np.ndarray:
    if np.shape(m)[-1] == 2:
        return mat_exp_2x2(m)
    return mat_exp(m)


def midpoint_exp_weights(lam: np.ndarray, q: int) -> np.ndarray:
    """W[i, j] = (1/Q) sum_q exp(u_q lam_i + (1 - u_q) lam_j), u_q = (q - 1/2)/Q.

    The weights are symmetric in (i, j) because the midpoints are symmetric
    about 1/2.
    """
    if q < 1:
        raise InvalidInputError(f"number of rectangles must be >= 1, got {q}")
    u = (np.arange(1, q + 1) - 0.5) / q
    li = lam[..., :, None, None]
    lj = lam[..., None, :, None]
    return np.mean(np.exp(u * li + (1.0 - u) * lj), axis=-1)


def exp_directional_derivative(h, dh, q: int) -> np.ndarray:
    """Q-rectangle approximation of int_0^1 e^{uH} dH e^{(1-u)H} du."""
    h = _check_square(h)
    dh = hermitize(_check_square(dh))
    w, v = eig_hermitian(h)
    _check_overflow(w[..., -1], h.ndim > 2)
    g = conj_t(v) @ dh @ v
    return hermitize(v @ (g * midpoint_exp_weights(w, q)) @ conj_t(v))
