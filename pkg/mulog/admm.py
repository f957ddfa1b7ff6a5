"""Plug-and-play ADMM despeckling.

The three estimators share one loop over log-domain channels x, z, d:

    z <- f_sigma(x - d)           per channel, sigma = beta^(-1/2)
    d <- d + z - x
    x <- argmin beta/2 |x - z - d|^2 + data term (per pixel)

``mulog`` runs it on the calibrated log channels of a covariance image,
``midal`` on log intensities, and ``homomorphic`` is the one-shot baseline.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional

import numpy as np

from .channelizer import (
    MIN_MAD_PIXELS,
    ChannelBasis,
    calibrate_from_log,
    condition_input,
    mad_sigma,
    omega,
    omega_inv,
)
from .denoise import DenoiserHandle, tv_denoiser
from .exceptions import InvalidInputError, SolverError
from .fidelity import FidelityProblem, newton_matrix, newton_scalar
from .hermitian import mat_exp_fast, mat_log_fast
from .statistics import digamma, neg_log_likelihood, polygamma
from .utils import JsonLinesLog, iter_blocks, resolve_workers

log = logging.getLogger(__name__)

SCHEDULES = ("fixed", "increasing")
DEFAULT_OUTER_ITERS = 30


@dataclass(frozen=True)
class MulogOptions:
    outer_iters: int = DEFAULT_OUTER_ITERS
    beta: Optional[float] = None
    inner_iters: int = 10
    q: int = 1
    beta_schedule: str = "fixed"
    gamma: float = 1.05
    denoiser: Optional[DenoiserHandle] = None
    warm_start: bool = False
    damping: float = 1.0
    workers: Optional[int] = None
    init_sigma: Optional[float] = None
    diagnostics: Optional[Path] = None

    def __post_init__(self):
        if self.outer_iters < 1 or self.inner_iters < 1:
            raise InvalidInputError("outer_iters and inner_iters must be >= 1")
        if self.beta is not None and not self.beta > 0:
            raise InvalidInputError(f"beta must be positive, got {self.beta}")
        if self.q < 0:
            raise InvalidInputError(f"Q must be >= 0, got {self.q}")
        if self.beta_schedule not in SCHEDULES:
            raise InvalidInputError(f"beta_schedule must be one of {SCHEDULES}, got {self.beta_schedule!r}")
        if self.beta_schedule == "increasing" and not self.gamma > 1:
            raise InvalidInputError(f"gamma must be > 1 for an increasing schedule, got {self.gamma}")
        if not 0 < self.damping <= 1:
            raise InvalidInputError(f"damping must be in (0, 1], got {self.damping}")
        if self.init_sigma is not None and not self.init_sigma >= 0:
            raise InvalidInputError(f"init_sigma must be >= 0, got {self.init_sigma}")


@dataclass
class MulogResult:
    sigma: np.ndarray
    basis: ChannelBasis
    x: np.ndarray
    records: List[dict] = field(default_factory=list)


def _validate_looks(looks: float) -> None:
    if not (np.isfinite(looks) and looks > 0):
        raise InvalidInputError(f"number of looks must be positive, got {looks}")


def _denoise_channels(pool: ThreadPoolExecutor, denoiser: DenoiserHandle, v: np.ndarray, sigma: float) -> np.ndarray:
    futures = [pool.submit(denoiser, v[..., i], sigma) for i in range(v.shape[-1])]
    return np.stack([f.result() for f in futures], axis=-1)


def _residual_mad(residual: np.ndarray) -> Optional[List[float]]:
    if residual[..., 0].size < MIN_MAD_PIXELS or residual.shape[-2] < 2:
        return None
    return [mad_sigma(residual[..., i]) for i in range(residual.shape[-1])]


def _run_admm(
    y: np.ndarray,
    solve_x: Callable[[np.ndarray, float, np.ndarray], np.ndarray],
    data_term: Callable[[np.ndarray], float],
    beta: float,
    init_sigma: float,
    opts: MulogOptions,
    pool: ThreadPoolExecutor,
    diagnostics: JsonLinesLog,
) -> np.ndarray:
    denoiser = opts.denoiser or tv_denoiser()
    x = y.copy()
    z = _denoise_channels(pool, denoiser, y, init_sigma)
    d = z - x
    previous = None
    for it in range(1, opts.outer_iters + 1):
        sigma = beta**-0.5
        z = _denoise_channels(pool, denoiser, x - d, sigma)
        d = d + z - x
        x = solve_x(z + d, beta, x)

        value = data_term(x)
        if denoiser.regularizer is not None:
            value += sum(denoiser.regularizer(x[..., i], sigma) for i in range(x.shape[-1]))
        gap = float(np.linalg.norm(z - x))
        log.info(f"Iteration {it}/{opts.outer_iters}: beta={beta:.4g} objective={value:.6g} |z-x|={gap:.4g}")
        if previous is not None and value > previous:
            log.warning(f"Objective increased at iteration {it} ({previous:.6g} -> {value:.6g})")
        previous = value
        diagnostics.append(
            {
                "iteration": it,
                "beta": beta,
                "sigma": sigma,
                "objective": value,
                "z_minus_x": gap,
                "residual_mad": _residual_mad(y - x),
            }
        )
        if opts.beta_schedule == "increasing":
            beta *= opts.gamma
    return x


def run_mulog(c, looks: float, opts: Optional[MulogOptions] = None) -> MulogResult:
    """Despeckle a (height, width, D, D) covariance image and keep the intermediate state."""
    opts = opts or MulogOptions()
    _validate_looks(looks)
    c = np.asarray(c)
    if c.ndim != 4 or c.shape[-1] != c.shape[-2]:
        raise InvalidInputError(f"expected a (height, width, D, D) image, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise InvalidInputError("covariance image contains non-finite values")
    d = c.shape[-1]

    conditioned = condition_input(c, looks)
    c_log = mat_log_fast(conditioned)
    basis = calibrate_from_log(c_log)
    y = omega_inv(c_log, basis)
    beta = opts.beta if opts.beta is not None else 1.0 + 2.0 / looks
    init_sigma = opts.init_sigma if opts.init_sigma is not None else 1.0
    log.info(f"MuLoG: D={d}, L={looks}, {c.shape[0]}x{c.shape[1]} pixels, beta={beta:.4g}, Q={opts.q}")

    n_ch = d * d
    flat_y = y.reshape(-1, n_ch)

    def solve_x(a: np.ndarray, beta_k: float, x_prev: np.ndarray) -> np.ndarray:
        flat_a = a.reshape(-1, n_ch)
        flat_prev = x_prev.reshape(-1, n_ch)
        futures = []
        for start, stop in iter_blocks(flat_y.shape[0]):
            problem = FidelityProblem(flat_y[start:stop], flat_a[start:stop], beta_k, looks, basis, opts.q)
            x0 = flat_prev[start:stop] if opts.warm_start else None
            futures.append((start, pool.submit(newton_matrix, problem, opts.inner_iters, opts.damping, x0)))
        blocks = []
        for start, fut in futures:
            try:
                blocks.append(fut.result())
            except SolverError as e:
                raise SolverError(e.reason, None if e.pixel is None else start + e.pixel) from e
        return np.concatenate(blocks).reshape(a.shape)

    def data_term(x: np.ndarray) -> float:
        return neg_log_likelihood(x, y, looks, basis)

    diagnostics = JsonLinesLog(opts.diagnostics)
    with ThreadPoolExecutor(max_workers=resolve_workers(opts.workers), thread_name_prefix="mulog") as pool:
        x = _run_admm(y, solve_x, data_term, beta, init_sigma, opts, pool, diagnostics)

    sigma_hat = mat_exp_fast(omega(x, basis))
    assert np.all(np.linalg.eigvalsh(sigma_hat)[..., 0] > 0), "estimate is not positive definite"
    return MulogResult(sigma_hat, basis, x, diagnostics.records)


def mulog(c, looks: float, opts: Optional[MulogOptions] = None) -> np.ndarray:
    return run_mulog(c, looks, opts).sigma


def _log_intensity(intensity) -> np.ndarray:
    i = np.asarray(intensity, dtype=np.float64)
    if i.ndim != 2:
        raise InvalidInputError(f"expected a 2-D intensity image, got shape {i.shape}")
    if not np.all(np.isfinite(i)) or np.any(i <= 0):
        raise InvalidInputError("intensities must be finite and positive")
    return np.log(i)


def midal(intensity, looks: float, opts: Optional[MulogOptions] = None) -> np.ndarray:
    """Univariate ADMM on y = log I with scalar Newton x-updates; returns the reflectivity."""
    opts = opts or MulogOptions()
    _validate_looks(looks)
    y = _log_intensity(intensity)[..., None]
    var = polygamma(1, looks)
    beta = opts.beta if opts.beta is not None else (1.0 + 2.0 / looks) / var
    init_sigma = opts.init_sigma if opts.init_sigma is not None else math.sqrt(var)
    log.info(f"MIDAL: L={looks}, {y.shape[0]}x{y.shape[1]} pixels, beta={beta:.4g}")

    def solve_x(a: np.ndarray, beta_k: float, x_prev: np.ndarray) -> np.ndarray:
        return newton_scalar(y, a, beta_k, looks, opts.inner_iters)

    def data_term(x: np.ndarray) -> float:
        return float(looks * np.sum(x + np.exp(y - x)))

    diagnostics = JsonLinesLog(opts.diagnostics)
    with ThreadPoolExecutor(max_workers=resolve_workers(opts.workers), thread_name_prefix="midal") as pool:
        x = _run_admm(y, solve_x, data_term, beta, init_sigma, opts, pool, diagnostics)
    return np.exp(x[..., 0])


def homomorphic(intensity, looks: float, denoiser: Optional[DenoiserHandle] = None) -> np.ndarray:
    """exp(f(log I) + log L - digamma(L)) with f run at noise std sqrt(polygamma(1, L))."""
    _validate_looks(looks)
    y = _log_intensity(intensity)
    denoiser = denoiser or tv_denoiser()
    sigma = math.sqrt(polygamma(1, looks))
    debias = math.log(looks) - digamma(looks)
    log.info(f"Homomorphic: L={looks}, sigma={sigma:.4g}, debias={debias:.4g}")
    return np.exp(denoiser(y, sigma) + debias)
