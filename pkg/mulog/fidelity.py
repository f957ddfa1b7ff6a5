"""Per-pixel data-fidelity solvers of the ADMM x-update.

Each pixel k minimizes

    beta/2 |x - a|^2 + L tr(omega(x) + exp(omega(y)) exp(-omega(x)))

over its D^2 log channels.  The gradient involves the integral
int_0^1 exp((u-1) omega(x)) exp(omega(y)) exp(-u omega(x)) du, evaluated with
Q midpoint rectangles in the eigenbasis of omega(x).  Q = 0 replaces it by
exp(omega(y) - omega(x)), exact when the two matrices commute.  The diagonal
Hessian approximation can overshoot on ill-conditioned pixels, so steps are
backtracked until they stop climbing the objective.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .channelizer import ChannelBasis, omega, omega_adjoint, omega_linear
from .exceptions import InvalidInputError, MatrixOverflowError, SolverError
from .hermitian import (
    EXP_LIMIT,
    conj_t,
    eig_hermitian,
    hermitize,
    mat_exp_fast,
    midpoint_exp_weights,
    trace,
)

log = logging.getLogger(__name__)

HESSIAN_FLOOR = 1e-12
Q_REFERENCE = 100
MAX_BACKTRACK = 12


@dataclass(frozen=True, eq=False)
class FidelityProblem:
    """A stack of independent per-pixel problems; y and a are (..., D^2)."""

    y: np.ndarray
    a: np.ndarray
    beta: float
    looks: float
    basis: ChannelBasis
    q: int = 1

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        a = np.asarray(self.a, dtype=np.float64)
        if y.shape != a.shape or y.shape[-1] != self.basis.channels:
            raise InvalidInputError(
                f"inconsistent problem shapes y{y.shape}, a{a.shape} for {self.basis.channels} channels"
            )
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(a))):
            raise InvalidInputError("fidelity inputs must be finite")
        if not self.beta > 0 or not self.looks > 0:
            raise InvalidInputError(f"beta and L must be positive, got beta={self.beta}, L={self.looks}")
        if int(self.q) != self.q or self.q < 0:
            raise InvalidInputError(f"Q must be a nonnegative integer, got {self.q}")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "a", a)


def _secant_rise(g0, g1, step) -> np.ndarray:
    """True where the trapezoid estimate of the objective change along the step is not downhill."""
    return ~(0.5 * np.sum((g0 + g1) * step, axis=-1) <= 0)


def newton_scalar(y, a, beta: float, looks: float, iters: int = 10):
    """Newton iterations for beta/2 (x-a)^2 + L (x + exp(y-x)), started at x = y.

    A step whose trapezoid estimate of the objective change is positive is halved
    up to MAX_BACKTRACK times, then dropped.
    """
    y = np.asarray(y, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(a)) and np.isfinite(beta) and np.isfinite(looks)):
        raise InvalidInputError("scalar Newton inputs must be finite")
    if iters < 1:
        raise InvalidInputError(f"iters must be >= 1, got {iters}")

    def grad(x):
        return beta * (x - a) + looks * (1.0 - np.exp(y - x))

    x = np.array(y, copy=True)
    with np.errstate(over="ignore", invalid="ignore"):
        g = grad(x)
        for _ in range(iters):
            step = -g / (beta + looks * np.exp(y - x))
            x_new = x + step
            g_new = grad(x_new)
            for _ in range(MAX_BACKTRACK):
                rise = ~(0.5 * (g + g_new) * step <= 0)
                if not np.any(rise):
                    break
                step = np.where(rise, 0.5 * step, step)
                x_new = x + step
                g_new = grad(x_new)
            held = ~(0.5 * (g + g_new) * step <= 0)
            x = np.where(held, x, x_new)
            g = np.where(held, g, g_new)
    bad = ~np.isfinite(x)
    if np.any(bad):
        raise SolverError("scalar Newton diverged", int(np.flatnonzero(bad)[0]) if x.ndim else None)
    return float(x) if x.ndim == 0 else x


def _rectangle_integral(ox: np.ndarray, ey: np.ndarray, q: int) -> np.ndarray:
    w, v = eig_hermitian(ox)
    over = -w[..., 0] > EXP_LIMIT
    if np.any(over):
        raise MatrixOverflowError("exp(-omega(x)) overflows", int(np.flatnonzero(over)[0]))
    g = conj_t(v) @ ey @ v
    return hermitize(v @ (g * midpoint_exp_weights(-w, q)) @ conj_t(v))


def fidelity_integral(x, y, q: int, basis: ChannelBasis) -> np.ndarray:
    """int_0^1 exp((u-1) omega(x)) exp(omega(y)) exp(-u omega(x)) du, Q rectangles (Q=0: commuting surrogate)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    try:
        if q == 0:
            return mat_exp_fast(omega_linear(y - x, basis))
        return _rectangle_integral(omega(x, basis), mat_exp_fast(omega(y, basis)), q)
    except MatrixOverflowError as e:
        raise SolverError(e.reason, e.pixel) from e


def _grad_hess(x, y, a, beta, looks, q, basis) -> Tuple[np.ndarray, np.ndarray]:
    integral = fidelity_integral(x, y, q, basis)
    d = basis.dim
    eye = np.eye(d)
    grad = beta * (x - a) + looks * omega_adjoint(eye - integral, basis)
    hess = beta + looks * np.abs(omega_adjoint(integral, basis))
    return grad, hess


def nll_gradient(x, y, looks: float, beta: float, a, q: int, basis: ChannelBasis) -> np.ndarray:
    if q < 1:
        raise InvalidInputError(f"gradient evaluation needs Q >= 1, got {q}")
    x = np.asarray(x, dtype=np.float64)
    return _grad_hess(x, np.asarray(y, dtype=np.float64), np.asarray(a, dtype=np.float64), beta, looks, q, basis)[0]


def hessian_diag_approx(x, y, looks: float, beta: float, q: int, basis: ChannelBasis) -> np.ndarray:
    """Quasi-Newton denominator beta + L |omega_adjoint(integral)| per channel."""
    integral = fidelity_integral(x, y, q, basis)
    return beta + looks * np.abs(omega_adjoint(integral, basis))


def objective(x, y, a, beta: float, looks: float, basis: ChannelBasis) -> np.ndarray:
    """Per-pixel value of the x-update objective."""
    x = np.asarray(x, dtype=np.float64)
    ox = omega(x, basis)
    cross = np.einsum("...ij,...ji->...", mat_exp_fast(omega(y, basis)), mat_exp_fast(-ox)).real
    return 0.5 * beta * np.sum((x - np.asarray(a)) ** 2, axis=-1) + looks * (trace(ox) + cross)


def newton_matrix(
    problem: FidelityProblem,
    iters: int = 10,
    damping: float = 1.0,
    x0: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Quasi-Newton solve of every pixel problem; starts from y unless x0 is given.

    Each pixel step is kept only when the trapezoid estimate 0.5 (g + g') . s of
    the objective change is non-positive; otherwise it is halved, at most
    MAX_BACKTRACK times, and a pixel with no acceptable step keeps its iterate.
    """
    if iters < 1:
        raise InvalidInputError(f"iters must be >= 1, got {iters}")
    if not 0 < damping <= 1:
        raise InvalidInputError(f"damping must be in (0, 1], got {damping}")
    p = problem
    shape = p.y.shape
    channels = shape[-1]
    y = p.y.reshape(-1, channels)
    a = p.a.reshape(-1, channels)
    x = np.array(y if x0 is None else np.reshape(x0, (-1, channels)), dtype=np.float64, copy=True)
    floor = HESSIAN_FLOOR * p.beta

    def evaluate(points, idx=None):
        sub_y, sub_a = (y, a) if idx is None else (y[idx], a[idx])
        try:
            return _grad_hess(points, sub_y, sub_a, p.beta, p.looks, p.q, p.basis)
        except SolverError as e:
            if idx is None or e.pixel is None:
                raise
            raise SolverError(e.reason, int(idx[e.pixel])) from e

    grad, hess = evaluate(x)
    shortened = held = 0
    for it in range(iters):
        step = -damping * grad / np.maximum(hess, floor)
        x_new = x + step
        bad = ~np.all(np.isfinite(x_new), axis=-1)
        if np.any(bad):
            raise SolverError(
                f"quasi-Newton iterate not finite after {it + 1} iterations",
                int(np.flatnonzero(bad)[0]),
            )
        g_new, h_new = evaluate(x_new)
        idx = np.flatnonzero(_secant_rise(grad, g_new, step))
        shortened += idx.size
        for _ in range(MAX_BACKTRACK):
            if idx.size == 0:
                break
            step[idx] *= 0.5
            x_new[idx] = x[idx] + step[idx]
            g_new[idx], h_new[idx] = evaluate(x_new[idx], idx)
            idx = idx[_secant_rise(grad[idx], g_new[idx], step[idx])]
        if idx.size:
            held += idx.size
            x_new[idx], g_new[idx], h_new[idx] = x[idx], grad[idx], hess[idx]
        x, grad, hess = x_new, g_new, h_new
    if shortened:
        log.debug(f"quasi-Newton: {shortened} pixel steps shortened over {iters} iterations")
    if held:
        log.warning(f"quasi-Newton: {held} pixel steps found no descent and were dropped")
    return x.reshape(shape)


def newton_residual(problem: FidelityProblem, x, q_ref: int = Q_REFERENCE) -> np.ndarray:
    """|Delta_Qref(x)| / |x| per pixel: size of the next accurate quasi-Newton step."""
    p = problem
    x = np.asarray(x, dtype=np.float64)
    grad, hess = _grad_hess(x, p.y, p.a, p.beta, p.looks, q_ref, p.basis)
    step = grad / np.maximum(hess, HESSIAN_FLOOR * p.beta)
    return np.linalg.norm(step, axis=-1) / np.linalg.norm(x, axis=-1)
