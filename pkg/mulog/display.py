"""Display helpers: scalar maps of covariance images and 8-bit PNG export."""

import logging
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from .exceptions import InvalidInputError
from .hermitian import trace

log = logging.getLogger(__name__)


def _check_image(c) -> np.ndarray:
    c = np.asarray(c)
    if c.ndim < 3 or c.shape[-1] != c.shape[-2]:
        raise InvalidInputError(f"expected an image of (D, D) matrices, got shape {c.shape}")
    return c


def amplitude(c) -> np.ndarray:
    """sqrt(I) for D=1, sqrt(tr C) (span amplitude) otherwise."""
    return np.sqrt(np.maximum(trace(_check_image(c)), 0.0))


def span(c) -> np.ndarray:
    return trace(_check_image(c))


def phase(c, i: int = 0, j: int = 1) -> np.ndarray:
    c = _check_image(c)
    if max(i, j) >= c.shape[-1]:
        raise InvalidInputError(f"entry ({i}, {j}) out of range for D={c.shape[-1]}")
    return np.angle(c[..., i, j])


def coherence(c, i: int = 0, j: int = 1) -> np.ndarray:
    """|C_ij| / sqrt(C_ii C_jj)."""
    c = _check_image(c)
    if max(i, j) >= c.shape[-1]:
        raise InvalidInputError(f"entry ({i}, {j}) out of range for D={c.shape[-1]}")
    return np.abs(c[..., i, j]) / np.sqrt(c[..., i, i].real * c[..., j, j].real)


def pauli_rgb(c) -> np.ndarray:
    """Pauli powers (|HH-VV|^2/2, 2|HV|^2, |HH+VV|^2/2) of lexicographic (HH, sqrt2 HV, VV) covariances."""
    c = _check_image(c)
    if c.shape[-1] != 3:
        raise InvalidInputError(f"Pauli composite needs D=3, got D={c.shape[-1]}")
    hh, cross, vv = c[..., 0, 0].real, c[..., 0, 2].real, c[..., 2, 2].real
    red = 0.5 * (hh + vv) - cross
    green = c[..., 1, 1].real
    blue = 0.5 * (hh + vv) + cross
    return np.stack([red, green, blue], axis=-1)


def to_uint8(img, threshold: Optional[float] = None, gamma: float = 1.0) -> np.ndarray:
    """Saturate at ``threshold`` (default mean + 3 std), gamma-correct, scale to 0..255."""
    img = np.asarray(img, dtype=np.float64)
    if not np.all(np.isfinite(img)):
        raise InvalidInputError("cannot display non-finite values")
    if threshold is None:
        threshold = float(np.mean(img) + 3.0 * np.std(img))
    if threshold <= 0:
        return np.zeros(img.shape, dtype=np.uint8)
    scaled = np.clip(img, 0.0, threshold) / threshold
    return np.round(255.0 * scaled**gamma).astype(np.uint8)


def save_png(path: Path, img, threshold: Optional[float] = None, gamma: float = 1.0) -> None:
    """Write a 2-D map as grayscale or a (H, W, 3) map as RGB (channels saturated separately)."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3 and img.shape[-1] == 3:
        data = np.stack([to_uint8(img[..., k], threshold, gamma) for k in range(3)], axis=-1)
        mode = "RGB"
    elif img.ndim == 2:
        data = to_uint8(img, threshold, gamma)
        mode = "L"
    else:
        raise InvalidInputError(f"cannot export an image of shape {img.shape}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(data).save(path)
    log.info(f"Exported {img.shape[1]}x{img.shape[0]} {mode} image to {path}")
