"""Gaussian denoisers plugged into the ADMM z-update.

A denoiser maps (real plane, noise std sigma) to a plane of the same shape.
Shipped: isotropic total variation (Chambolle dual iterations) and Gaussian
smoothing.  Any other denoiser can be run as an external command exchanging
dim=1 MULG containers.
"""

import logging
import shlex
import subprocess
import tempfile
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter

from .container import read_plane, write_plane
from .exceptions import ContainerFormatError, DenoiserContractError, InvalidInputError
from .statistics import make_rng

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 600.0
BOUNDARIES = ("reflect", "periodic")

DenoiseFunc = Callable[[np.ndarray, float], np.ndarray]


class DenoiserHandle:
    """Callable wrapper enforcing the plug-in contract.

    Outputs must match the input shape and be finite.  Handles that are not
    reentrant serialize their calls.
    """

    def __init__(
        self,
        func: DenoiseFunc,
        name: str,
        reentrant: bool = True,
        regularizer: Optional[Callable[[np.ndarray, float], float]] = None,
    ) -> None:
        self.func = func
        self.name = name
        self.reentrant = reentrant
        self.regularizer = regularizer
        self._lock = None if reentrant else threading.Lock()

    def __repr__(self) -> str:
        return f"DenoiserHandle({self.name!r}, reentrant={self.reentrant})"

    def __call__(self, plane, sigma: float) -> np.ndarray:
        plane = np.asarray(plane, dtype=np.float64)
        if self._lock is None:
            out = self.func(plane, sigma)
        else:
            with self._lock:
                out = self.func(plane, sigma)
        out = np.asarray(out)
        if out.shape != plane.shape:
            raise DenoiserContractError(
                f"denoiser '{self.name}' returned shape {out.shape} for input {plane.shape}"
            )
        if not np.all(np.isfinite(out)):
            raise DenoiserContractError(f"denoiser '{self.name}' returned non-finite values")
        return out.astype(np.float64, copy=False)


@dataclass(frozen=True)
class TvConfig:
    lambda_scale: float = 0.7
    max_iters: int = 200
    tol: float = 1e-5
    boundary: str = "reflect"

    def __post_init__(self):
        if not self.lambda_scale > 0:
            raise InvalidInputError(f"lambda_scale must be positive, got {self.lambda_scale}")
        if self.max_iters < 1 or self.tol < 0:
            raise InvalidInputError("max_iters must be >= 1 and tol >= 0")
        if self.boundary not in BOUNDARIES:
            raise InvalidInputError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")


def _active_axes(shape: Tuple[int, ...]) -> Tuple[int, ...]:
    return tuple(ax for ax, n in enumerate(shape) if n > 1)


def _grad(u: np.ndarray, axes: Tuple[int, ...], periodic: bool) -> np.ndarray:
    out = np.zeros((len(axes),) + u.shape)
    for k, ax in enumerate(axes):
        if periodic:
            out[k] = np.roll(u, -1, axis=ax) - u
        else:
            diff = np.diff(u, axis=ax)
            idx = [slice(None)] * u.ndim
            idx[ax] = slice(0, -1)
            out[k][tuple(idx)] = diff
    return out


def _div(p: np.ndarray, axes: Tuple[int, ...]) -> np.ndarray:
    # Negative adjoint of _grad; with Neumann boundaries the last slice of p stays zero
    out = np.zeros(p.shape[1:])
    for k, ax in enumerate(axes):
        out += p[k] - np.roll(p[k], 1, axis=ax)
    return out


def total_variation(img, periodic: bool = False) -> float:
    img = np.asarray(img, dtype=np.float64)
    g = _grad(img, _active_axes(img.shape), periodic)
    return float(np.sum(np.sqrt(np.sum(g**2, axis=0))))


def _check_plane(img, sigma: float) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if not np.all(np.isfinite(img)):
        raise InvalidInputError("denoiser input contains non-finite values")
    if not sigma >= 0:
        raise InvalidInputError(f"noise std must be >= 0, got {sigma}")
    return img


def chambolle_tv(img: np.ndarray, weight: float, max_iters: int, tol: float, periodic: bool) -> np.ndarray:
    """argmin_u 1/2 |u - img|^2 + weight * TV(u) by fixed-point iterations on the dual field."""
    axes = _active_axes(img.shape)
    if not axes or weight <= 0:
        return img.copy()
    tau = 1.0 / (4.0 * len(axes))
    p = np.zeros((len(axes),) + img.shape)
    scaled = img / weight
    u = img.copy()
    for it in range(max_iters):
        g = _grad(_div(p, axes) - scaled, axes, periodic)
        norm = np.sqrt(np.sum(g**2, axis=0))
        p = (p + tau * g) / (1.0 + tau * norm)
        u_new = img - weight * _div(p, axes)
        change = np.linalg.norm(u_new - u) / max(np.linalg.norm(u), 1e-12)
        u = u_new
        if tol > 0 and change < tol:
            log.debug(f"TV converged after {it + 1} iterations")
            break
    return u


def tv_denoise(img, sigma: float, cfg: Optional[TvConfig] = None) -> np.ndarray:
    """Isotropic TV with weight lambda_scale * sigma; sigma = 0 is the identity."""
    cfg = cfg or TvConfig()
    img = _check_plane(img, sigma)
    if sigma == 0:
        return img.copy()
    return chambolle_tv(img, cfg.lambda_scale * sigma, cfg.max_iters, cfg.tol, cfg.boundary == "periodic")


def gaussian_smooth_denoiser(img, sigma: float, boundary: str = "reflect") -> np.ndarray:
    """Gaussian blur with spatial std = sigma clipped to [0.5, 3]."""
    img = _check_plane(img, sigma)
    if sigma == 0:
        return img.copy()
    if boundary not in BOUNDARIES:
        raise InvalidInputError(f"boundary must be one of {BOUNDARIES}, got {boundary!r}")
    std = float(np.clip(sigma, 0.5, 3.0))
    return gaussian_filter(img, std, mode="wrap" if boundary == "periodic" else "reflect")


def tv_denoiser(cfg: Optional[TvConfig] = None) -> DenoiserHandle:
    cfg = cfg or TvConfig()
    periodic = cfg.boundary == "periodic"
    return DenoiserHandle(
        lambda img, sigma: tv_denoise(img, sigma, cfg),
        "tv",
        regularizer=lambda img, sigma: cfg.lambda_scale / sigma * total_variation(img, periodic),
    )


def gauss_denoiser() -> DenoiserHandle:
    return DenoiserHandle(gaussian_smooth_denoiser, "gauss")


def _render(template: str, inp: Path, sigma: float, out: Path) -> list:
    tokens = shlex.split(template)
    if not tokens:
        raise InvalidInputError("empty external denoiser command")
    return [
        tok.replace("{input}", str(inp)).replace("{sigma}", repr(float(sigma))).replace("{output}", str(out))
        for tok in tokens
    ]


def external_denoiser(
    template: str, timeout: Optional[float] = DEFAULT_TIMEOUT, concurrent_safe: bool = False
) -> DenoiserHandle:
    """Run ``template`` with {input}, {sigma} and {output} substituted, once per call."""
    _render(template, Path("in"), 0.0, Path("out"))

    def run(plane: np.ndarray, sigma: float) -> np.ndarray:
        with tempfile.TemporaryDirectory(prefix="mulog-ext-") as tmp:
            inp = Path(tmp) / "input.mulg"
            out = Path(tmp) / "output.mulg"
            write_plane(inp, plane)
            cmd = _render(template, inp, sigma, out)
            log.debug(f"Running external denoiser: {' '.join(cmd)}")
            try:
                res = subprocess.run(cmd, check=False, capture_output=True, timeout=timeout)
            except subprocess.TimeoutExpired as e:
                raise DenoiserContractError(f"external denoiser timed out after {timeout}s") from e
            except OSError as e:
                raise DenoiserContractError(f"cannot run external denoiser {cmd[0]!r}: {e}") from e
            if res.returncode != 0:
                stderr = res.stderr.decode("utf-8", errors="replace").strip()[-500:]
                raise DenoiserContractError(f"external denoiser failed (rc={res.returncode}): {stderr}")
            try:
                return read_plane(out)
            except (OSError, ContainerFormatError) as e:
                raise DenoiserContractError(f"external denoiser produced no valid output: {e}") from e

    return DenoiserHandle(run, f"ext:{template}", reentrant=concurrent_safe)


def denoiser_from_spec(
    spec: str, tv: Optional[TvConfig] = None, timeout: Optional[float] = DEFAULT_TIMEOUT
) -> DenoiserHandle:
    """Build a handle from 'tv', 'gauss' or 'ext:<command template>'."""
    if spec == "tv":
        return tv_denoiser(tv)
    if spec == "gauss":
        return gauss_denoiser()
    if spec.startswith("ext:"):
        return external_denoiser(spec[len("ext:") :], timeout=timeout)
    raise InvalidInputError(f"unknown denoiser {spec!r}; use tv, gauss or ext:<command>")


@dataclass
class BoundedAudit:
    name: str
    ratios: Dict[float, float] = field(default_factory=dict)

    @property
    def constant(self) -> float:
        return max(self.ratios.values()) if self.ratios else 0.0


def audit_bounded(
    handle: DenoiserHandle,
    sigmas: Sequence[float] = (0.25, 0.5, 1.0, 2.0),
    shape: Tuple[int, int] = (64, 64),
    seed: int = 0,
) -> BoundedAudit:
    """Empirical |f(x) - x|^2 / (n sigma^2) on white noise of std sigma."""
    rng = make_rng(seed)
    audit = BoundedAudit(handle.name)
    n = int(np.prod(shape))
    for sigma in sigmas:
        x = sigma * rng.standard_normal(shape)
        audit.ratios[float(sigma)] = float(np.sum((handle(x, sigma) - x) ** 2) / (n * sigma**2))
    log.info(f"Bounded-denoiser audit for {handle.name}: constant {audit.constant:.4g}")
    return audit
