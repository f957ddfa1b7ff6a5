"""Restoration quality: PSNR with a 99th-quantile peak, SSIM and residual statistics."""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Mapping

import numpy as np
from skimage.metrics import structural_similarity

from .channelizer import mad_sigma
from .exceptions import InvalidInputError
from .hermitian import trace

log = logging.getLogger(__name__)

PEAK_QUANTILE = 0.99
SSIM_MIN_SIZE = 11


@dataclass(frozen=True)
class QualityReport:
    psnr_db: float
    ssim: float
    peak_value: float
    residual_mad: float

    def to_record(self) -> Dict[str, Any]:
        identical = math.isinf(self.psnr_db)
        return {
            "psnr_db": None if identical else self.psnr_db,
            "identical": identical,
            "ssim": self.ssim,
            "peak_value": self.peak_value,
            "residual_mad": self.residual_mad,
        }


def _pair(est, ref):
    est = np.asarray(est, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if est.shape != ref.shape:
        raise InvalidInputError(f"shape mismatch: estimate {est.shape} vs reference {ref.shape}")
    return est, ref


def peak_value(ref) -> float:
    return float(np.quantile(np.asarray(ref, dtype=np.float64), PEAK_QUANTILE))


def psnr_q99(est, ref) -> float:
    """10 log10(peak^2 / MSE), peak = 99th percentile of ref; inf for identical images."""
    est, ref = _pair(est, ref)
    if np.any(ref < 0):
        raise InvalidInputError("reference image must be nonnegative")
    mse = float(np.mean((est - ref) ** 2))
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(peak_value(ref) ** 2 / mse)


def ssim(est, ref) -> float:
    """Single-scale SSIM, 11x11 Gaussian window (std 1.5), dynamic range anchored to the reference."""
    est, ref = _pair(est, ref)
    if est.ndim != 2 or min(est.shape) < SSIM_MIN_SIZE:
        raise InvalidInputError(f"SSIM needs 2-D images of at least {SSIM_MIN_SIZE}x{SSIM_MIN_SIZE}, got {est.shape}")
    return float(
        structural_similarity(
            ref,
            est,
            data_range=peak_value(ref),
            gaussian_weights=True,
            sigma=1.5,
            use_sample_covariance=False,
            K1=0.01,
            K2=0.03,
        )
    )


def comparison_map(c) -> np.ndarray:
    """Amplitude sqrt(I) for D=1 images, trace for D>1."""
    c = np.asarray(c)
    if c.ndim != 4 or c.shape[-1] != c.shape[-2]:
        raise InvalidInputError(f"expected a (height, width, D, D) image, got shape {c.shape}")
    if c.shape[-1] == 1:
        return np.sqrt(np.maximum(c[..., 0, 0].real, 0.0))
    return trace(c)


def evaluate(est, ref) -> QualityReport:
    """Compare two covariance images through their amplitude or trace maps."""
    est_map, ref_map = _pair(comparison_map(est), comparison_map(ref))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.log(est_map / ref_map)
    residual = mad_sigma(ratio) if np.all(np.isfinite(ratio)) else math.nan
    report = QualityReport(
        psnr_db=psnr_q99(est_map, ref_map),
        ssim=ssim(est_map, ref_map),
        peak_value=peak_value(ref_map),
        residual_mad=residual,
    )
    log.debug(f"Quality: {report}")
    return report


def format_table(reports: Mapping[str, QualityReport]) -> str:
    lines = [f"{'image':<24} {'PSNR (dB)':>10} {'SSIM':>7} {'peak':>10} {'res. MAD':>9}"]
    for name, r in reports.items():
        psnr = "inf" if math.isinf(r.psnr_db) else f"{r.psnr_db:.2f}"
        lines.append(f"{name:<24} {psnr:>10} {r.ssim:>7.4f} {r.peak_value:>10.4g} {r.residual_mad:>9.4f}")
    return "\n".join(lines)
