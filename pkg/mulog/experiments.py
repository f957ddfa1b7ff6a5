"""Accuracy of the Q-rectangle quasi-Newton solver against a fine reference.

For each dimension D and trial, a random Sigma = X X^H / (3D) with complex
Gaussian X (D x 3D) is drawn, then C ~ W(Sigma, L = D).  The x-update is
solved with y = log C, anchor a = log Sigma, beta = 10 L and 10 iterations;
the reported error is the mean over trials of |Delta_100(x)| / |x|, the
size of the next quasi-Newton step evaluated with 100 rectangles.
"""

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Sequence

import numpy as np

from .channelizer import ChannelBasis, kappa_inv
from .fidelity import FidelityProblem, newton_matrix, newton_residual
from .hermitian import mat_log
from .statistics import make_rng, sample_wishart

log = logging.getLogger(__name__)

DEFAULT_DIMS = (2, 4, 8, 16)
DEFAULT_QS = (0, 1, 2, 4, 8, 16)


@dataclass
class ResidualTable:
    dims: Sequence[int]
    qs: Sequence[int]
    errors: Dict[int, Dict[int, float]] = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["Q"] + [f"D={d}" for d in self.dims])
        for q in self.qs:
            writer.writerow([q] + [f"{self.errors[d][q]:.6e}" for d in self.dims])
        return buf.getvalue()


def random_sigma(dim: int, trials: int, rng: np.random.Generator) -> np.ndarray:
    size = (trials, dim, 3 * dim)
    x = (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / math.sqrt(2.0)
    return x @ np.conj(np.swapaxes(x, -1, -2)) / (3 * dim)


def residual_errors(dim: int, qs: Sequence[int], trials: int, seed: int, iters: int = 10) -> Dict[int, float]:
    rng = make_rng(seed)
    sigma = random_sigma(dim, trials, rng)
    looks = dim
    c = sample_wishart(sigma, looks, rng)
    y = kappa_inv(mat_log(c))
    a = kappa_inv(mat_log(sigma))
    basis = ChannelBasis.identity(dim)
    out = {}
    for q in qs:
        problem = FidelityProblem(y, a, 10.0 * looks, looks, basis, q)
        x = newton_matrix(problem, iters)
        out[q] = float(np.mean(newton_residual(problem, x)))
        log.info(f"D={dim} Q={q}: mean relative residual {out[q]:.3e}")
    return out


def residual_table(
    dims: Sequence[int] = DEFAULT_DIMS,
    qs: Sequence[int] = DEFAULT_QS,
    trials: int = 100,
    seed: int = 0,
) -> ResidualTable:
    table = ResidualTable(list(dims), list(qs))
    for d in dims:
        # One stream per dimension so adding a dimension leaves the others unchanged
        table.errors[d] = residual_errors(d, qs, trials, seed + 1000 * d)
    return table
