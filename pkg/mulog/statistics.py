"""Speckle statistics: gamma and complex Wishart models.

Intensities follow I = R * S with S ~ Gamma(shape=L, scale=1/L); covariance
matrices follow the complex Wishart law C = (1/L) sum_t v_t v_t^H with
v_t ~ CN(0, Sigma).  Log-domain moments use the digamma and polygamma
functions.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy import special

from .channelizer import ChannelBasis, omega
from .exceptions import DomainError, InvalidInputError, NotPositiveDefiniteError
from .hermitian import hermitize, mat_exp_fast, mat_sqrt, trace

log = logging.getLogger(__name__)

SeedLike = Union[int, np.random.Generator]


@dataclass(frozen=True)
class SpeckleModel:
    looks: float
    dim: int = 1

    def __post_init__(self):
        if not self.looks > 0:
            raise DomainError(f"number of looks must be positive, got {self.looks}")
        if self.dim < 1:
            raise DomainError(f"matrix dimension must be >= 1, got {self.dim}")

    @property
    def rank_deficient(self) -> bool:
        return self.looks < self.dim

    @property
    def flavor(self) -> str:
        return "gamma" if self.dim == 1 else "wishart"


@dataclass(frozen=True)
class FTStats:
    """Bias and variance of log-intensity speckle (log I = log R + noise)."""

    bias: float
    variance: float


def _require_positive(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError(f"{name} must be finite and positive")
    return arr


def _scalar_or_array(v):
    return float(v) if np.ndim(v) == 0 else v


def digamma(x):
    return _scalar_or_array(special.digamma(_require_positive(x, "digamma argument")))


def polygamma(m: int, x):
    if int(m) != m or m < 1:
        raise DomainError(f"polygamma order must be an integer >= 1, got {m}")
    return _scalar_or_array(special.polygamma(int(m), _require_positive(x, "polygamma argument")))


def ft_stats(looks: float) -> FTStats:
    _require_positive(looks, "number of looks")
    return FTStats(bias=digamma(looks) - math.log(looks), variance=polygamma(1, looks))


def make_rng(seed: Optional[SeedLike]) -> np.random.Generator:
    """Counter-based Philox stream; a Generator passes through unchanged."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


def sample_gamma_speckle(reflectivity, looks: float, seed: Optional[SeedLike]) -> np.ndarray:
    r = _require_positive(reflectivity, "reflectivity")
    _require_positive(looks, "number of looks")
    rng = make_rng(seed)
    return r * rng.gamma(looks, 1.0 / looks, size=r.shape)


def gamma_logpdf(intensity, reflectivity, looks: float):
    i = _require_positive(intensity, "intensity")
    r = _require_positive(reflectivity, "reflectivity")
    _require_positive(looks, "number of looks")
    val = (
        looks * math.log(looks)
        - special.gammaln(looks)
        + (looks - 1.0) * np.log(i)
        - looks * np.log(r)
        - looks * i / r
    )
    return _scalar_or_array(val)


def fisher_tippett_logpdf(y, x, looks: float):
    """Log-density of y = log I given x = log R."""
    _require_positive(looks, "number of looks")
    t = np.asarray(y, dtype=np.float64) - np.asarray(x, dtype=np.float64)
    val = looks * math.log(looks) - special.gammaln(looks) + looks * t - looks * np.exp(t)
    return _scalar_or_array(val)


def _integer_looks(looks: float) -> int:
    if looks < 1 or int(looks) != looks:
        raise DomainError(f"Wishart sampling needs an integer number of looks >= 1, got {looks}")
    return int(looks)


def sample_white_wishart(
    dim: int, looks: int, shape: Tuple[int, ...], rng: np.random.Generator
) -> np.ndarray:
    """Draw S ~ W(Id, L): (1/L) sum_t g_t g_t^H with g_t circular CN(0, Id)."""
    n = _integer_looks(looks)
    size = tuple(shape) + (n, dim)
    g = (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / math.sqrt(2.0)
    return hermitize(np.einsum("...ti,...tj->...ij", g, np.conj(g)) / n)


def sample_wishart(
    sigma,
    looks: float,
    seed: Optional[SeedLike],
    shape: Optional[Tuple[int, ...]] = None,
    return_white: bool = False,
):
    """Sample speckled covariance matrices around ``sigma``.

    ``sigma`` is a (D, D) matrix or a stack (..., D, D); ``shape`` broadcasts a
    single matrix over a pixel grid.  With ``return_white`` the internal
    W(Id, L) draw S is returned too, C = sigma^(1/2) S sigma^(1/2).
    """
    sigma = np.asarray(sigma)
    if sigma.ndim < 2 or sigma.shape[-1] != sigma.shape[-2]:
        raise InvalidInputError(f"expected (..., D, D) matrices, got shape {sigma.shape}")
    if shape is not None:
        sigma = np.broadcast_to(sigma, tuple(shape) + sigma.shape[-2:])
    d = sigma.shape[-1]
    batch = sigma.shape[:-2]
    rng = make_rng(seed)

    if d == 1:
        r = _require_positive(sigma.real[..., 0, 0], "reflectivity")
        _require_positive(looks, "number of looks")
        white = rng.gamma(looks, 1.0 / looks, size=batch)[..., None, None].astype(np.complex128)
        c = r[..., None, None] * white
        return (c, white) if return_white else c

    try:
        root = mat_sqrt(sigma)
    except NotPositiveDefiniteError as e:
        raise DomainError(f"Sigma must be positive definite: {e}") from e
    white = sample_white_wishart(d, looks, batch, rng)
    c = hermitize(root @ white @ root)
    return (c, white) if return_white else c


def logdet_trace_stats(sigma_log, looks: float, dim: int) -> Tuple[float, float]:
    """Mean and variance of tr(log C) for C ~ W(Sigma, L), given log Sigma."""
    sigma_log = np.asarray(sigma_log)
    if sigma_log.shape[-2:] != (dim, dim):
        raise InvalidInputError(f"expected ({dim}, {dim}) matrices, got shape {sigma_log.shape}")
    if looks < dim:
        raise DomainError(f"log-trace statistics need L >= D, got L={looks}, D={dim}")
    args = looks - np.arange(dim)
    mean = trace(sigma_log) + float(np.sum(special.digamma(args))) - dim * math.log(looks)
    var = float(np.sum(special.polygamma(1, args)))
    return _scalar_or_array(mean), var


def neg_log_likelihood(x, y, looks: float, basis: ChannelBasis) -> float:
    """L sum_k tr(omega(x_k) + exp(omega(y_k)) exp(-omega(x_k))), constants dropped."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise InvalidInputError(f"shape mismatch: x{x.shape} vs y{y.shape}")
    ox = omega(x, basis)
    ey = mat_exp_fast(omega(y, basis))
    emx = mat_exp_fast(-ox)
    cross = np.einsum("...ij,...ji->...", ey, emx).real
    return float(looks * np.sum(trace(ox) + cross))


def log_multigamma(looks: float, dim: int) -> float:
    """Log of the complex multivariate gamma function Gamma_D(L)."""
    args = looks - np.arange(dim)
    return 0.5 * dim * (dim - 1) * math.log(math.pi) + float(np.sum(special.gammaln(args)))


def _logdet_pd(m: np.ndarray, name: str) -> np.ndarray:
    w = np.linalg.eigvalsh(hermitize(m))
    if np.any(w <= 0):
        raise DomainError(f"{name} must be positive definite")
    return np.sum(np.log(w), axis=-1)


def wishart_logpdf(c, sigma, looks: float):
    """Log-density of C ~ W(Sigma, L) with respect to the Lebesgue measure on Hermitian matrices.

    Valid for L > D - 1 (integer or not).
    """
    c = np.asarray(c)
    sigma = np.asarray(sigma)
    d = c.shape[-1]
    if sigma.shape[-1] != d:
        raise InvalidInputError(f"dimension mismatch: C is {d}x{d}, Sigma is {sigma.shape[-1]}x{sigma.shape[-1]}")
    if not looks > d - 1:
        raise DomainError(f"Wishart density needs L > D - 1, got L={looks}, D={d}")
    logdet_c = _logdet_pd(c, "C")
    logdet_s = _logdet_pd(sigma, "Sigma")
    tr_term = trace(np.linalg.solve(sigma, c))
    val = (
        looks * d * math.log(looks)
        + (looks - d) * logdet_c
        - log_multigamma(looks, d)
        - looks * logdet_s
        - looks * tr_term
    )
    return _scalar_or_array(val)


def wishart_density(c, sigma, looks: float):
    return _scalar_or_array(np.exp(wishart_logpdf(c, sigma, looks)))
