"""Builtin speckle-free ground truths and speckle simulation."""

import logging
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from .exceptions import InvalidInputError
from .statistics import SeedLike, sample_wishart

log = logging.getLogger(__name__)

MOSAIC_LEVELS = (0.25, 1.0, 4.0, 16.0, 0.5, 2.0, 8.0, 1.5, 3.0, 12.0, 0.75, 6.0, 10.0, 0.35, 5.0, 2.5)
COHERENCE_LEVELS = (0.2, 0.5, 0.8, 0.95)
PHASE_LEVELS = (0.0, np.pi / 4, -np.pi / 2, 3 * np.pi / 4)


def covariance(intensity, coherence, phase, dim: int) -> np.ndarray:
    """Per-pixel covariance with channel intensities ``intensity * linspace(1, 0.5, D)``.

    Entry (i, j) is sqrt(s_i s_j) * coherence^|i-j| * exp(1j * phase * (i - j)),
    positive definite for coherence < 1.
    """
    intensity = np.asarray(intensity, dtype=np.float64)
    coherence = np.broadcast_to(np.asarray(coherence, dtype=np.float64), intensity.shape)
    phase = np.broadcast_to(np.asarray(phase, dtype=np.float64), intensity.shape)
    if np.any(intensity <= 0) or np.any(coherence < 0) or np.any(coherence >= 1):
        raise InvalidInputError("intensity must be positive and coherence in [0, 1)")
    scale = np.linspace(1.0, 0.5, dim) if dim > 1 else np.ones(1)
    s = intensity[..., None] * scale
    i = np.arange(dim)
    lag = i[:, None] - i[None, :]
    amp = np.sqrt(s[..., :, None] * s[..., None, :])
    return amp * coherence[..., None, None] ** np.abs(lag) * np.exp(1j * phase[..., None, None] * lag)


def _blocks(size: int, n: int) -> np.ndarray:
    """Label image of n x n square regions."""
    idx = np.minimum(np.arange(size) * n // size, n - 1)
    return idx[:, None] * n + idx[None, :]


def constant_scene(size: int, dim: int) -> np.ndarray:
    return covariance(np.ones((size, size)), 0.5, np.pi / 6, dim)


def mosaic_scene(size: int, dim: int) -> np.ndarray:
    labels = _blocks(size, 4)
    return covariance(np.asarray(MOSAIC_LEVELS)[labels], 0.5, 0.0, dim)


def points_scene(size: int, dim: int) -> np.ndarray:
    r = np.ones((size, size))
    step = max(size // 8, 4)
    r[step // 2 :: step, step // 2 :: step] = 100.0
    return covariance(r, 0.5, 0.0, dim)


def gradient_scene(size: int, dim: int) -> np.ndarray:
    ramp = np.logspace(-1, 1, size)
    return covariance(np.broadcast_to(ramp, (size, size)), 0.5, 0.0, dim)


def rectangle_scene(size: int, dim: int) -> np.ndarray:
    """1 x size signal: level 1 with a bright rectangle of level 10 on the middle half."""
    r = np.ones((1, size))
    r[0, size // 4 : 3 * size // 4] = 10.0
    return covariance(r, 0.5, 0.0, dim)


def coherence_scene(size: int, dim: int) -> np.ndarray:
    if dim < 2:
        raise InvalidInputError("the coherence scene needs D >= 2")
    labels = _blocks(size, 2)
    return covariance(
        np.ones((size, size)),
        np.asarray(COHERENCE_LEVELS)[labels],
        np.asarray(PHASE_LEVELS)[labels],
        dim,
    )


SCENES: Dict[str, Callable[[int, int], np.ndarray]] = {
    "constant": constant_scene,
    "mosaic": mosaic_scene,
    "points": points_scene,
    "gradient": gradient_scene,
    "rectangle": rectangle_scene,
    "coherence": coherence_scene,
}


def make_scene(name: str, dim: int = 1, size: int = 256) -> np.ndarray:
    """Ground truth Sigma image (height, width, D, D) of a builtin scene."""
    if name not in SCENES:
        raise InvalidInputError(f"unknown scene {name!r}; choose from {', '.join(SCENES)}")
    if dim < 1 or size < 4:
        raise InvalidInputError(f"invalid scene parameters D={dim}, size={size}")
    return SCENES[name](size, dim)


def region_labels(name: str, size: int = 256) -> Optional[np.ndarray]:
    """Region index per pixel for the piecewise-constant scenes."""
    if name == "mosaic":
        return _blocks(size, 4)
    if name == "coherence":
        return _blocks(size, 2)
    return None


def simulate(sigma, looks: float, seed: Optional[SeedLike]) -> np.ndarray:
    """Speckled covariance image drawn around a ground truth image."""
    sigma = np.asarray(sigma)
    c = sample_wishart(sigma, looks, seed)
    log.info(f"Simulated {sigma.shape[0]}x{sigma.shape[1]} image, D={sigma.shape[-1]}, L={looks}")
    return c


def region_means(image, labels: np.ndarray, regions: Optional[Sequence[int]] = None) -> np.ndarray:
    image = np.asarray(image)
    regions = np.unique(labels) if regions is None else regions
    return np.array([image[labels == r].mean(axis=0) for r in regions])
