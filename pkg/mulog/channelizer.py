"""Log-channel decomposition of covariance images.

A log-covariance matrix M (D x D Hermitian) is handled as a vector of D^2
real channels.  ``kappa`` is the unitary layout between the two; the
calibrated affine map ``omega`` adds a PCA rotation A, a mean b and a
per-channel noise scale phi so that every channel carries roughly unit
Gaussian noise:

    omega(x) = kappa(A (phi * x) + b)
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy.ndimage import gaussian_filter

from .exceptions import DegenerateCalibrationError, InvalidInputError, NotPositiveDefiniteError
from .hermitian import eigenvalue_floor, mat_log_fast, trace

log = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)
MAD_SCALE = 1.4826
MIN_MAD_PIXELS = 16
LOADING = 1e-6
LOADING_STEPS = 7


@lru_cache(maxsize=None)
def offdiag_pairs(dim: int) -> Tuple[np.ndarray, np.ndarray]:
    """Row/column indices of the upper off-diagonal entries in channel order.

    Pairs are listed superdiagonal by superdiagonal: (0,1), (1,2), ...,
    then (0,2), (1,3), ... and so on up to (0, D-1).
    """
    rows, cols = [], []
    for k in range(1, dim):
        for i in range(dim - k):
            rows.append(i)
            cols.append(i + k)
    return np.array(rows, dtype=int), np.array(cols, dtype=int)


def channel_dim(n_channels: int) -> int:
    d = math.isqrt(n_channels)
    if d < 1 or d * d != n_channels:
        raise InvalidInputError(f"channel count {n_channels} is not a perfect square")
    return d


def kappa(alpha) -> np.ndarray:
    """Map (..., D^2) real vectors to (..., D, D) Hermitian matrices."""
    alpha = np.asarray(alpha, dtype=np.float64)
    d = channel_dim(alpha.shape[-1])
    out = np.zeros(alpha.shape[:-1] + (d, d), dtype=np.complex128)
    idx = np.arange(d)
    out[..., idx, idx] = alpha[..., :d]
    if d > 1:
        rows, cols = offdiag_pairs(d)
        vals = (alpha[..., d::2] + 1j * alpha[..., d + 1 :: 2]) / SQRT2
        out[..., rows, cols] = vals
        out[..., cols, rows] = np.conj(vals)
    return out


def kappa_inv(m) -> np.ndarray:
    """Inverse of kappa; reads the upper triangle."""
    m = np.asarray(m)
    d = m.shape[-1]
    out = np.empty(m.shape[:-2] + (d * d,), dtype=np.float64)
    idx = np.arange(d)
    out[..., :d] = m[..., idx, idx].real
    if d > 1:
        rows, cols = offdiag_pairs(d)
        vals = m[..., rows, cols]
        out[..., d::2] = SQRT2 * vals.real
        out[..., d + 1 :: 2] = SQRT2 * vals.imag
    return out


@dataclass(frozen=True, eq=False)
class ChannelBasis:
    """Calibration (A, b, phi) of the log-channel decomposition."""

    dim: int
    A: np.ndarray
    b: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        n = self.dim * self.dim
        a = np.asarray(self.A, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        phi = np.asarray(self.phi, dtype=np.float64)
        if self.dim < 1 or a.shape != (n, n) or b.shape != (n,) or phi.shape != (n,):
            raise InvalidInputError(
                f"inconsistent basis shapes for D={self.dim}: A{a.shape}, b{b.shape}, phi{phi.shape}"
            )
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and np.all(np.isfinite(phi))):
            raise InvalidInputError("basis entries must be finite")
        if np.max(np.abs(a.T @ a - np.eye(n))) > 1e-10:
            raise InvalidInputError("basis matrix A is not orthogonal")
        if np.any(phi <= 0):
            raise InvalidInputError("channel scales phi must be positive")
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "phi", phi)

    @property
    def channels(self) -> int:
        return self.dim * self.dim

    @classmethod
    def identity(cls, dim: int) -> "ChannelBasis":
        n = dim * dim
        return cls(dim, np.eye(n), np.zeros(n), np.ones(n))


def _check_channels(x: np.ndarray, basis: ChannelBasis) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != basis.channels:
        raise InvalidInputError(f"expected {basis.channels} channels, got {x.shape[-1]}")
    return x


def omega(x, basis: ChannelBasis) -> np.ndarray:
    x = _check_channels(x, basis)
    return kappa((x * basis.phi) @ basis.A.T + basis.b)


def omega_linear(x, basis: ChannelBasis) -> np.ndarray:
    """Linear part of omega (no offset b)."""
    x = _check_channels(x, basis)
    return kappa((x * basis.phi) @ basis.A.T)


def omega_inv(m, basis: ChannelBasis) -> np.ndarray:
    return ((kappa_inv(m) - basis.b) @ basis.A) / basis.phi


def omega_adjoint(m, basis: ChannelBasis) -> np.ndarray:
    """Adjoint of the linear part: <M, omega_linear(x)> = <omega_adjoint(M), x>."""
    return basis.phi * (kappa_inv(m) @ basis.A)


def mad_sigma(channel) -> float:
    """Robust noise std from horizontal pseudo-residuals (u[k+1] - u[k]) / sqrt(2)."""
    channel = np.asarray(channel, dtype=np.float64)
    if channel.size < MIN_MAD_PIXELS or channel.shape[-1] < 2:
        raise InvalidInputError(
            f"noise estimation needs at least {MIN_MAD_PIXELS} pixels and 2 columns, got shape {channel.shape}"
        )
    detail = np.diff(channel, axis=-1) / SQRT2
    return float(MAD_SCALE * np.median(np.abs(detail)))


def calibrate(c, looks: float) -> ChannelBasis:
    """Estimate the channel basis of an already conditioned covariance image."""
    if looks <= 0:
        raise InvalidInputError(f"number of looks must be positive, got {looks}")
    c = np.asarray(c)
    log.info(f"Calibrating log channels on {c.shape[:-2]} pixels (D={c.shape[-1]}, L={looks})")
    return calibrate_from_log(mat_log_fast(c))


def calibrate_from_log(c_log) -> ChannelBasis:
    c_log = np.asarray(c_log)
    d = c_log.shape[-1]
    n_ch = d * d
    alpha = kappa_inv(c_log)
    flat = alpha.reshape(-1, n_ch)
    n = flat.shape[0]
    if n < n_ch + 1:
        raise DegenerateCalibrationError(
            f"{n} pixels cannot calibrate {n_ch} channels; provide at least {n_ch + 1}"
        )

    b = flat.mean(axis=0)
    centered = flat - b
    cov = centered.T @ centered / n
    w, a = np.linalg.eigh(cov)
    w, a = w[::-1], a[:, ::-1]
    if w[0] <= 0 or w[-1] <= 1e-12 * w[0]:
        raise DegenerateCalibrationError(
            "log channels are linearly dependent (constant or rank-deficient image); "
            "condition the input or provide more varied data"
        )
    # Largest-magnitude component of each principal axis is positive
    idx = np.argmax(np.abs(a), axis=0)
    a = a * np.sign(a[idx, np.arange(n_ch)])

    projected = (centered @ a).reshape(alpha.shape)
    phi = np.array([mad_sigma(projected[..., i]) for i in range(n_ch)])
    log.debug(f"Channel noise std (MAD): {np.array2string(phi, precision=4)}")
    if np.any(phi <= 0):
        raise DegenerateCalibrationError(
            f"zero noise estimate on channel {int(np.argmin(phi))}; image too smooth to calibrate"
        )
    return ChannelBasis(d, a, b, phi)


def _positive_definite(c: np.ndarray) -> np.ndarray:
    w = np.linalg.eigvalsh(c)
    return w[..., 0] > eigenvalue_floor(c)


def _local_coherence(c: np.ndarray) -> np.ndarray:
    """|<C_ij>| / sqrt(<C_ii><C_jj>) with Gaussian-weighted local means."""
    spatial = c.ndim - 2
    sigma = [1.0] * spatial + [0.0, 0.0]

    def smooth(plane):
        return gaussian_filter(plane, sigma=sigma, truncate=3.0, mode="reflect")

    s = smooth(c.real) + 1j * smooth(c.imag)
    diag = np.diagonal(s, axis1=-2, axis2=-1).real
    ratio = np.abs(s) / np.sqrt(diag[..., :, None] * diag[..., None, :])
    d = c.shape[-1]
    ratio[..., np.arange(d), np.arange(d)] = 1.0
    return ratio


def condition_input(c, looks: float) -> np.ndarray:
    """Make every pixel of a covariance image positive definite.

    Multilook images that are already positive definite are returned as is.
    Otherwise off-diagonal entries are shrunk by their local coherence and
    any pixel still singular gets a small diagonal loading.
    """
    c = np.asarray(c)
    if c.ndim < 3 or c.shape[-1] != c.shape[-2]:
        raise InvalidInputError(f"expected an image of (D, D) matrices, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise InvalidInputError("covariance image contains non-finite values")
    d = c.shape[-1]
    diag = np.diagonal(c, axis1=-2, axis2=-1).real
    bad = np.any(diag <= 0, axis=-1)
    if np.any(bad):
        pixel = int(np.flatnonzero(bad)[0])
        raise InvalidInputError(f"nonpositive diagonal entry at pixel {pixel}")

    pd = _positive_definite(c)
    if looks >= d and np.all(pd):
        return c

    log.info(
        f"Conditioning input: L={looks}, D={d}, {int(np.count_nonzero(~pd))} non positive definite pixels"
    )
    out = c.astype(np.complex128) * _local_coherence(c)
    pd = _positive_definite(out)
    delta = LOADING
    for _ in range(LOADING_STEPS):
        if np.all(pd):
            return out
        idx = ~pd
        if delta > LOADING:
            log.warning(f"Diagonal loading escalated to {delta:g} on {int(np.count_nonzero(idx))} pixels")
        load = delta * trace(out[idx]) / d
        out[idx] = out[idx] + load[:, None, None] * np.eye(d)
        log.debug(f"Diagonal loading {delta:g} applied to {int(np.count_nonzero(idx))} pixels")
        pd = _positive_definite(out)
        delta *= 10.0
    if not np.all(pd):
        raise NotPositiveDefiniteError(
            "diagonal loading failed to restore positive definiteness",
            int(np.flatnonzero(~pd)[0]),
        )
    return out
