"""Reference optimizers: PBIL and uniform random search.

Both honor the same evaluation-accounting contract as the main engine:
every objective call counts exactly once and best-so-far traces are
non-decreasing. PBIL is restricted to binary search spaces.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigurationError
from .policy import BINARY, ModelSpec
from .svgd import IterationRecord, RunResult, _evaluate_row


@dataclass(frozen=True)
class PbilConfig:
    """Classic PBIL hyperparameters.

    Defaults follow the common baseline convention: population 64, learn
    from the single best individual, learning rate 0.1, per-coordinate
    mutation with probability 0.02 and shift 0.05. ``clamp`` keeps the
    probability vector away from absorbing states; set it to None to
    disable that deviation knob.
    """

    population_size: int = 64
    selection_size: int = 1
    learning_rate: float = 0.1
    mutation_prob: float = 0.02
    mutation_shift: float = 0.05
    budget: int = 50_000
    clamp: tuple[float, float] | None = (0.001, 0.999)

    def __post_init__(self):
        if self.population_size < 1:
            raise ConfigurationError("population size must be at least 1")
        if not 1 <= self.selection_size <= self.population_size:
            raise ConfigurationError("selection size must be in [1, population size]")
        if not 0 < self.learning_rate <= 1:
            raise ConfigurationError("learning rate must lie in (0, 1]")
        if not 0 <= self.mutation_prob <= 1:
            raise ConfigurationError("mutation probability must lie in [0, 1]")
        if self.budget < self.population_size:
            raise ConfigurationError("budget below one generation")
        if self.clamp is not None and not 0 <= self.clamp[0] < self.clamp[1] <= 1:
            raise ConfigurationError("clamp bounds must satisfy 0 <= lo < hi <= 1")


def _make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(root))


def pbil_run(
    objective: Callable,
    model: ModelSpec,
    config: PbilConfig,
    seed: int | np.random.SeedSequence,
    timing: bool = False,
) -> RunResult:
    """Population-based incremental learning over {0,1}^n.

    Maintains a probability vector started at 0.5; each generation samples
    the population, pulls the vector toward the component-wise mean of the
    top ``selection_size`` individuals (the single best by default), then
    mutates and clamps it. Runs floor(budget / population_size) generations.
    """
    if model.kind != BINARY:
        raise ConfigurationError("pbil supports binary search spaces only")
    n = model.n
    rng = _make_rng(seed)
    p = np.full(n, 0.5)
    generations = config.budget // config.population_size
    alpha = config.learning_rate

    best_fitness = -np.inf
    best_solution = None
    evaluations = 0
    records: list[IterationRecord] = []
    for gen in range(generations):
        tic = time.perf_counter() if timing else 0.0
        u = rng.random((config.population_size, n))
        pop = (u < p).astype(np.int64)
        fitness = _evaluate_row(objective, pop)
        evaluations += config.population_size

        best_idx = int(np.argmax(fitness))
        if fitness[best_idx] > best_fitness:
            best_fitness = float(fitness[best_idx])
            best_solution = pop[best_idx].copy()

        top = np.argsort(-fitness, kind="stable")[: config.selection_size]
        target = pop[top].mean(axis=0)
        p = (1.0 - alpha) * p + alpha * target

        mutate = rng.random(n) < config.mutation_prob
        directions = rng.integers(0, 2, n).astype(np.float64)
        p = np.where(mutate, p * (1.0 - config.mutation_shift) + directions * config.mutation_shift, p)
        if config.clamp is not None:
            p = np.clip(p, config.clamp[0], config.clamp[1])

        records.append(
            IterationRecord(
                iteration=gen,
                evaluations=evaluations,
                best_fitness=best_fitness,
                mean_fitness=float(fitness.mean()),
                bandwidth=float("nan"),
                wall_ms=(time.perf_counter() - tic) * 1000.0 if timing else 0.0,
            )
        )

    return RunResult(
        status="ok",
        best_solution=best_solution,
        best_fitness=float(best_fitness),
        evaluations=evaluations,
        records=records,
    )


def random_search_run(
    objective: Callable,
    model: ModelSpec,
    budget: int,
    seed: int | np.random.SeedSequence,
    chunk_size: int = 100,
    timing: bool = False,
) -> RunResult:
    """Uniform sampling baseline; spends the budget exactly.

    Solutions are drawn in chunks (one trace record per chunk) but each
    evaluation is counted individually.
    """
    if budget < 1:
        raise ConfigurationError("budget must be at least 1")
    rng = _make_rng(seed)
    best_fitness = -np.inf
    best_solution = None
    evaluations = 0
    records: list[IterationRecord] = []
    chunk_index = 0
    while evaluations < budget:
        tic = time.perf_counter() if timing else 0.0
        count = min(chunk_size, budget - evaluations)
        pop = rng.integers(0, model.d, (count, model.n)).astype(np.int64)
        fitness = _evaluate_row(objective, pop)
        evaluations += count
        best_idx = int(np.argmax(fitness))
        if fitness[best_idx] > best_fitness:
            best_fitness = float(fitness[best_idx])
            best_solution = pop[best_idx].copy()
        records.append(
            IterationRecord(
                iteration=chunk_index,
                evaluations=evaluations,
                best_fitness=best_fitness,
                mean_fitness=float(fitness.mean()),
                bandwidth=float("nan"),
                wall_ms=(time.perf_counter() - tic) * 1000.0 if timing else 0.0,
            )
        )
        chunk_index += 1

    return RunResult(
        status="ok",
        best_solution=best_solution,
        best_fitness=float(best_fitness),
        evaluations=evaluations,
        records=records,
    )
