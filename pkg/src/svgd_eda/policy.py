"""Factorized generator models over discrete solution spaces.

Two families, both parameterized by unbounded logits:

* binary: each of the n coordinates is an independent Bernoulli whose
  success probability is the sigmoid of one scalar log-odds entry;
* categorical: each coordinate is an independent draw from the softmax
  of one row of an n-by-D logit matrix.

Sampling, exact log-probability, and the analytic gradient of the
log-probability with respect to the logits (the score function) are
provided, along with batch variants used by the optimizer's inner loop.
All functions are pure; randomness enters only through an explicit
``numpy.random.Generator``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit, log_softmax, softmax

from .errors import ContractViolationError

BINARY = "binary"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class ModelSpec:
    """Shape of a generator family: variable count and per-variable cardinality."""

    kind: str
    n: int
    d: int = 2

    def __post_init__(self):
        if self.kind not in (BINARY, CATEGORICAL):
            raise ContractViolationError(f"unknown model kind {self.kind!r}")
        if self.n < 1:
            raise ContractViolationError(f"n must be positive, got {self.n}")
        if self.kind == BINARY and self.d != 2:
            raise ContractViolationError("binary models require d == 2")
        if self.d < 2:
            raise ContractViolationError(f"d must be at least 2, got {self.d}")

    @property
    def logit_shape(self) -> tuple[int, ...]:
        return (self.n,) if self.kind == BINARY else (self.n, self.d)

    @staticmethod
    def binary(n: int) -> "ModelSpec":
        return ModelSpec(BINARY, n, 2)

    @staticmethod
    def categorical(n: int, d: int) -> "ModelSpec":
        return ModelSpec(CATEGORICAL, n, d)

    @staticmethod
    def for_cardinality(n: int, d: int) -> "ModelSpec":
        """Canonical family for a landscape of cardinality d: binary when d == 2."""
        return ModelSpec.binary(n) if d == 2 else ModelSpec.categorical(n, d)


@dataclass(frozen=True)
class PolicyParams:
    """Logit parameters of one agent's generator.

    ``logits`` has shape (n,) for binary models and (n, d) for
    categorical ones. All entries must be finite.
    """

    kind: str
    n: int
    d: int
    logits: np.ndarray

    def __post_init__(self):
        spec = ModelSpec(self.kind, self.n, self.d)
        logits = np.asarray(self.logits, dtype=np.float64)
        if logits.shape != spec.logit_shape:
            raise ContractViolationError(
                f"logits shape {logits.shape} does not match {spec.logit_shape}"
            )
        if not np.all(np.isfinite(logits)):
            raise ContractViolationError("logits must be finite")
        object.__setattr__(self, "logits", logits)

    @property
    def spec(self) -> ModelSpec:
        return ModelSpec(self.kind, self.n, self.d)

    @staticmethod
    def binary(logits: np.ndarray) -> "PolicyParams":
        logits = np.asarray(logits, dtype=np.float64)
        return PolicyParams(BINARY, logits.shape[0], 2, logits)

    @staticmethod
    def categorical(logits: np.ndarray) -> "PolicyParams":
        logits = np.asarray(logits, dtype=np.float64)
        return PolicyParams(CATEGORICAL, logits.shape[0], logits.shape[1], logits)


def _check_solution(params: PolicyParams, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != (params.n,):
        raise ContractViolationError(
            f"solution shape {x.shape} does not match n={params.n}"
        )
    if x.min() < 0 or x.max() >= params.d:
        raise ContractViolationError(
            f"solution entries must lie in [0, {params.d})"
        )
    return x.astype(np.int64, copy=False)


def probabilities(params: PolicyParams) -> np.ndarray:
    """Per-coordinate sampling probabilities: sigmoid or row-softmax of the logits."""
    if params.kind == BINARY:
        return expit(params.logits)
    return softmax(params.logits, axis=1)


def sample_batch(params: PolicyParams, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` independent solutions, one uniform per coordinate.

    Returns an int64 array of shape (count, n). Categorical coordinates use
    inverse-CDF over the softmax row, so the draw is a deterministic function
    of the consumed uniforms.
    """
    u = rng.random((count, params.n))
    if params.kind == BINARY:
        return (u < expit(params.logits)).astype(np.int64)
    cdf = np.cumsum(softmax(params.logits, axis=1), axis=1)
    # comparing against cdf[:, :-1] keeps the index in [0, d) even when the
    # final cumulative value rounds below 1
    return np.sum(u[:, :, None] >= cdf[None, :, :-1], axis=2, dtype=np.int64)


def sample(params: PolicyParams, rng: np.random.Generator) -> np.ndarray:
    """Draw one solution; consumes exactly n uniforms from ``rng``."""
    return sample_batch(params, 1, rng)[0]


def log_prob(params: PolicyParams, x: np.ndarray) -> float:
    """Exact log-probability of sampling ``x`` from the generator."""
    x = _check_solution(params, x)
    if params.kind == BINARY:
        # log sigma(theta) for x=1, log sigma(-theta) for x=0; both stable
        signed = np.where(x == 1, params.logits, -params.logits)
        return float(np.sum(log_expit(signed)))
    lp = log_softmax(params.logits, axis=1)
    return float(np.sum(lp[np.arange(params.n), x]))


def score_grad(params: PolicyParams, x: np.ndarray) -> np.ndarray:
    """Gradient of ``log_prob`` with respect to the logits.

    Binary entry l is x_l - sigmoid(theta_l); categorical row l is
    onehot(x_l) - softmax(theta_l), which sums to zero.
    """
    x = _check_solution(params, x)
    if params.kind == BINARY:
        return x - expit(params.logits)
    onehot = np.zeros((params.n, params.d))
    onehot[np.arange(params.n), x] = 1.0
    return onehot - softmax(params.logits, axis=1)


def score_grad_batch(params: PolicyParams, xs: np.ndarray) -> np.ndarray:
    """Score gradients for a batch of solutions, shape (count, *logits.shape)."""
    xs = np.asarray(xs, dtype=np.int64)
    if xs.ndim != 2 or xs.shape[1] != params.n:
        raise ContractViolationError(
            f"batch shape {xs.shape} does not match (count, {params.n})"
        )
    if params.kind == BINARY:
        return xs - expit(params.logits)[None, :]
    count = xs.shape[0]
    onehot = np.zeros((count, params.n, params.d))
    onehot[np.arange(count)[:, None], np.arange(params.n)[None, :], xs] = 1.0
    return onehot - softmax(params.logits, axis=1)[None, :, :]
