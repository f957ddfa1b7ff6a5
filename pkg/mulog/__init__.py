"""mulog package: speckle reduction of SAR intensity and covariance images.

Exports:
- app: Typer CLI entrypoint (from mulog.cli)
- mulog, run_mulog, midal, homomorphic, MulogOptions: estimators (from mulog.admm)
- tv_denoiser, gauss_denoiser, external_denoiser, DenoiserHandle, TvConfig: denoisers (from mulog.denoise)
- CovContainer, read_container, write_container: file format (from mulog.container)
- evaluate, psnr_q99, ssim: quality metrics (from mulog.metrics)
"""

from .admm import MulogOptions, MulogResult, homomorphic, midal, mulog, run_mulog  # noqa: F401
from .channelizer import ChannelBasis  # noqa: F401
from .cli import app  # noqa: F401
from .container import CovContainer, read_container, write_container  # noqa: F401
from .denoise import DenoiserHandle, TvConfig, external_denoiser, gauss_denoiser, tv_denoiser  # noqa: F401
from .metrics import QualityReport, evaluate, psnr_q99, ssim  # noqa: F401

__all__ = [
    "app",
    "mulog",
    "run_mulog",
    "midal",
    "homomorphic",
    "MulogOptions",
    "MulogResult",
    "ChannelBasis",
    "DenoiserHandle",
    "TvConfig",
    "tv_denoiser",
    "gauss_denoiser",
    "external_denoiser",
    "CovContainer",
    "read_container",
    "write_container",
    "QualityReport",
    "evaluate",
    "psnr_q99",
    "ssim",
]
