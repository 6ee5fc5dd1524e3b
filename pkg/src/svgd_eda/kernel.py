"""RBF kernel over flattened particle parameters.

Provides the gram matrix, the gradient of the kernel with respect to its
second argument (the repulsion direction), median-trick bandwidth
adaptation, and an identity mode that zeroes all cross-particle coupling.

Accepts any particle container exposing a ``logits`` array of shape
(m, *particle_shape) -- in practice a ``Population`` -- or a bare 2-D
array of stacked parameter vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BandwidthUndefinedError, ContractViolationError

RBF = "rbf"
IDENTITY = "identity"

MEDIAN_TRICK = "median-trick"
FIXED = "fixed"


@dataclass(frozen=True)
class KernelConfig:
    """Kernel mode plus bandwidth policy.

    ``bandwidth=None`` selects the median trick (recomputed from the current
    population every evaluation); a positive float fixes h. ``center=True``
    removes the per-variable softmax shift from categorical logits before
    measuring distances; off by default because the reference dynamics
    operate on raw logits.
    """

    mode: str = RBF
    bandwidth: float | None = None
    center: bool = False

    def __post_init__(self):
        if self.mode not in (RBF, IDENTITY):
            raise ContractViolationError(f"unknown kernel mode {self.mode!r}")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ContractViolationError("fixed bandwidth must be positive")

    @property
    def bandwidth_policy(self) -> str:
        return MEDIAN_TRICK if self.bandwidth is None else FIXED


@dataclass(frozen=True)
class KernelEval:
    """One kernel evaluation over a population snapshot.

    ``gram[i, j] = k(theta_i, theta_j)``; ``grads[i, j]`` is the gradient of
    ``k(theta_i, theta_j)`` in its second argument, shaped like one particle.
    ``bandwidth`` is the h actually used (nan in identity mode).
    """

    gram: np.ndarray
    grads: np.ndarray
    bandwidth: float


def _particle_matrix(particles) -> np.ndarray:
    arr = getattr(particles, "logits", particles)
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim < 2:
        raise ContractViolationError(
            "particles must stack as an (m, ...) array of uniform shape"
        )
    return arr


def pairwise_sq_dists(particles) -> np.ndarray:
    """Squared Euclidean distances between flattened particles.

    Computed pair by pair over the upper triangle and mirrored, so the
    result is bitwise symmetric with an exactly zero diagonal.
    """
    arr = _particle_matrix(particles)
    m = arr.shape[0]
    flat = arr.reshape(m, -1)
    out = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            diff = flat[i] - flat[j]
            out[i, j] = out[j, i] = float(np.dot(diff, diff))
    return out


def median_bandwidth(sq_dists: np.ndarray, m: int) -> float:
    """Median-trick bandwidth h = sqrt(med / (2 ln(m + 1))).

    ``med`` is the median of the m(m-1)/2 upper-triangle squared distances.
    A fully collapsed population (med = 0) falls back to h = 1 so the
    update stays defined.
    """
    if m < 2:
        raise BandwidthUndefinedError(
            "median trick needs at least two particles; use a fixed bandwidth"
        )
    iu = np.triu_indices(m, k=1)
    med = float(np.median(np.asarray(sq_dists)[iu]))
    if med == 0.0:
        return 1.0
    return math.sqrt(med / (2.0 * math.log(m + 1)))


def evaluate(config: KernelConfig, particles) -> KernelEval:
    """Gram matrix and kernel gradients for the current population.

    rbf mode: gram[i, j] = exp(-||theta_i - theta_j||^2 / (2 h^2)) and
    grads[i, j] = gram[i, j] * (theta_i - theta_j) / h^2. identity mode:
    gram = I and all gradients are zero, which removes every cross-agent
    term from the particle update.
    """
    arr = _particle_matrix(particles)
    m = arr.shape[0]
    shape = arr.shape[1:]

    if config.mode == IDENTITY:
        return KernelEval(
            gram=np.eye(m),
            grads=np.zeros((m, m) + shape),
            bandwidth=float("nan"),
        )

    if config.center and arr.ndim == 3:
        # remove the softmax shift degree of freedom per (particle, variable)
        arr = arr - arr.mean(axis=2, keepdims=True)

    if m == 1:
        # no pairs: k(theta, theta) = 1 and the self-gradient vanishes, so
        # the bandwidth never enters; report the degenerate fallback
        h = 1.0 if config.bandwidth is None else config.bandwidth
        return KernelEval(gram=np.ones((1, 1)), grads=np.zeros((1, 1) + shape), bandwidth=h)

    sq = pairwise_sq_dists(arr)
    if config.bandwidth is None:
        h = median_bandwidth(sq, m)
    else:
        h = config.bandwidth

    gram = np.exp(-sq / (2.0 * h * h))
    diffs = arr[:, None] - arr[None, :]  # (m, m, *shape)
    grads = gram.reshape((m, m) + (1,) * len(shape)) * diffs / (h * h)
    return KernelEval(gram=gram, grads=grads, bandwidth=h)
