"""Monotone-invariant fitness-to-utility transforms.

The default transform ranks the pooled m-by-lambda fitness matrix globally
(ties broken uniformly at random from a dedicated stream) and maps ranks
affinely so the best sample scores +1 and the worst -1. The general
estimator of the quantile weight -- cross-agent exceedance averaged with a
leave-one-out own-agent term -- is also provided, together with the linear
weighting w(u) = 1 - 2u.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractViolationError


def global_ranks(fitness: np.ndarray, tie_rng: np.random.Generator) -> np.ndarray:
    """Rank every sample against the pooled population, best rank 0.

    Returns an integer matrix shaped like ``fitness`` holding a permutation
    of {0, ..., m*lambda - 1} ordered by descending fitness. Equal-fitness
    blocks receive a uniformly random permutation of their rank slots.
    ``tie_rng`` is consumed identically (one uniform per entry) whether or
    not ties occur, so the output depends on fitness only through its
    ordering.
    """
    f = np.asarray(fitness, dtype=np.float64)
    if not np.all(np.isfinite(f)):
        raise ContractViolationError("fitness entries must be finite")
    flat = f.ravel()
    tie_keys = tie_rng.random(flat.size)
    order = np.lexsort((tie_keys, -flat))
    ranks = np.empty(flat.size, dtype=np.int64)
    ranks[order] = np.arange(flat.size)
    return ranks.reshape(f.shape)


def s_hat(ranks: np.ndarray, m: int, lam: int) -> np.ndarray:
    """Affine rank score 1 - 2*rank/(m*lambda - 1), in [-1, +1], summing to 0."""
    total = m * lam
    if total < 2:
        raise ContractViolationError("rank score undefined for a single sample")
    ranks = np.asarray(ranks)
    if ranks.shape != (m, lam):
        raise ContractViolationError(
            f"ranks shape {ranks.shape} does not match ({m}, {lam})"
        )
    if not np.array_equal(np.sort(ranks.ravel()), np.arange(total)):
        raise ContractViolationError("ranks must be a permutation of 0..m*lambda-1")
    return 1.0 - 2.0 * ranks / (total - 1)


def w_linear(u):
    """Linear non-increasing weighting w(u) = 1 - 2u on [0, 1]."""
    u = np.asarray(u, dtype=np.float64)
    if np.any(u < 0.0) or np.any(u > 1.0):
        raise ContractViolationError("w_linear domain is [0, 1]")
    out = 1.0 - 2.0 * u
    return float(out) if out.ndim == 0 else out


def unbiased_w_estimate(fitness: np.ndarray, j: int, ell: int, w=w_linear) -> float:
    """Unbiased single-sample estimate of the quantile weight.

    Averages, over agents, the fraction of each agent's samples strictly
    fitter than sample (j, ell); the own agent contributes a leave-one-out
    fraction with denominator lambda - 1.
    """
    f = np.asarray(fitness, dtype=np.float64)
    m, lam = f.shape
    if lam < 2:
        raise ContractViolationError("leave-one-out term needs lambda >= 2")
    target = f[j, ell]
    greater = f > target
    cross = (greater.sum() - greater[j].sum()) / lam
    own = greater[j].sum() / (lam - 1)  # entry (j, ell) is never > itself
    return float(w((cross + own) / m))


def unbiased_w_matrix(fitness: np.ndarray, w=w_linear) -> np.ndarray:
    """``unbiased_w_estimate`` for every (j, ell) at once."""
    f = np.asarray(fitness, dtype=np.float64)
    m, lam = f.shape
    if lam < 2:
        raise ContractViolationError("leave-one-out term needs lambda >= 2")
    flat_sorted = np.sort(f.ravel())
    greater_total = f.size - np.searchsorted(flat_sorted, f, side="right")
    rows_sorted = np.sort(f, axis=1)
    greater_own = np.empty_like(f, dtype=np.int64)
    for j in range(m):
        greater_own[j] = lam - np.searchsorted(rows_sorted[j], f[j], side="right")
    u = ((greater_total - greater_own) / lam + greater_own / (lam - 1)) / m
    return w(u)
