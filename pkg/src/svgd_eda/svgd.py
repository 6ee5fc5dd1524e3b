"""Multi-agent EDA engine with Stein-variational particle coupling.

Each of m agents owns a factorized generator (one particle in parameter
space). Every iteration, each agent samples lambda solutions and the
pooled fitness is turned into utilities; per-agent gradients of the
tempered objective are estimated with the score function, and particles
move along a kernel-weighted combination of all agents' gradients plus
the kernel gradient, which repels nearby particles and preserves
population diversity.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernel as kernel_mod
from . import policy as policy_mod
from . import utility as utility_mod
from .errors import ConfigurationError, ContractViolationError, DivergedError
from .kernel import KernelConfig, KernelEval
from .policy import ModelSpec, PolicyParams

RANK = "rank"
RAW = "raw"
UNBIASED = "unbiased"

UTILITY_MODES = (RANK, RAW, UNBIASED)

# Step size calibrated by scripts/calibrate_step_size.py: smallest power of
# two in [2**-4, 2**4] maximizing mean final OneMax n=32 fitness over 20
# seeds at budget 10,000 with the default m, lambda, gamma.
DEFAULT_STEP_SIZE = 0.25

LOGIT_LIMIT = 1e6


@dataclass(frozen=True)
class Population:
    """Stacked parameter vectors of all m agents (uniform model)."""

    spec: ModelSpec
    logits: np.ndarray  # (m, n) binary / (m, n, d) categorical

    def __post_init__(self):
        logits = np.asarray(self.logits, dtype=np.float64)
        if logits.shape[0] < 1 or logits.shape[1:] != self.spec.logit_shape:
            raise ContractViolationError(
                f"population logits shape {logits.shape} does not match "
                f"(m, *{self.spec.logit_shape})"
            )
        object.__setattr__(self, "logits", logits)

    @property
    def m(self) -> int:
        return self.logits.shape[0]

    def particle(self, i: int) -> PolicyParams:
        return PolicyParams(self.spec.kind, self.spec.n, self.spec.d, self.logits[i])

    @property
    def particles(self) -> list[PolicyParams]:
        return [self.particle(i) for i in range(self.m)]

    def flat(self) -> np.ndarray:
        return self.logits.reshape(self.m, -1)

    def with_logits(self, logits: np.ndarray) -> "Population":
        return Population(self.spec, logits)

    @staticmethod
    def from_particles(particles: Sequence[PolicyParams]) -> "Population":
        if not particles:
            raise ContractViolationError("population needs at least one particle")
        spec = particles[0].spec
        for p in particles[1:]:
            if p.spec != spec:
                raise ContractViolationError("particles must share (kind, n, d)")
        return Population(spec, np.stack([p.logits for p in particles]))


@dataclass(frozen=True)
class SvgdConfig:
    """Hyperparameters of one optimizer run."""

    m: int = 7
    lam: int = 13
    gamma: float = 0.015
    epsilon: float = DEFAULT_STEP_SIZE
    utility_mode: str = RANK
    kernel: KernelConfig = field(default_factory=KernelConfig)
    budget: int = 50_000
    init_scale: float = 0.5

    def __post_init__(self):
        if self.m < 1:
            raise ConfigurationError("m must be at least 1")
        if self.lam < 1:
            raise ConfigurationError("lambda must be at least 1")
        if self.utility_mode not in UTILITY_MODES:
            raise ConfigurationError(f"unknown utility mode {self.utility_mode!r}")
        if self.utility_mode == UNBIASED and self.lam < 2:
            raise ConfigurationError("unbiased utility mode needs lambda >= 2")
        if not self.gamma > 0:
            raise ConfigurationError("gamma must be positive")
        # epsilon = 0 is allowed so the zero-step conservation property is runnable
        if self.epsilon < 0:
            raise ConfigurationError("epsilon must be non-negative")
        if self.init_scale < 0:
            raise ConfigurationError("init_scale must be non-negative")
        if self.budget < self.m * self.lam:
            raise ConfigurationError(
                f"budget {self.budget} below one generation m*lambda = {self.m * self.lam}"
            )

    @property
    def iterations(self) -> int:
        return self.budget // (self.m * self.lam)


@dataclass(frozen=True)
class SampleBatch:
    """One iteration's sampled solutions, their fitness, and score gradients."""

    solutions: np.ndarray  # (m, lam, n) int64
    fitness: np.ndarray    # (m, lam) float64
    grads: np.ndarray      # (m, lam, *logit_shape)


@dataclass
class RunStreams:
    """Random streams of one run: one sampling stream per agent plus a tie stream.

    ``from_seed`` spawns children 0..m-1 of the seed's SeedSequence for the
    agents and child m for tie breaking, each feeding a Philox generator.
    Agent stream i covers agent i's initialization draws followed by its
    per-iteration sampling uniforms, so an agent's randomness is fully
    decoupled from its peers'.
    """

    agents: list[np.random.Generator]
    ties: np.random.Generator

    @staticmethod
    def from_seed(seed: int | np.random.SeedSequence, m: int) -> "RunStreams":
        root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        children = root.spawn(m + 1)
        return RunStreams(
            agents=[np.random.Generator(np.random.Philox(c)) for c in children[:m]],
            ties=np.random.Generator(np.random.Philox(children[m])),
        )


@dataclass
class RunState:
    """Mutable progress of one run."""

    iteration: int
    evaluations: int
    best_solution: np.ndarray | None
    best_fitness: float
    population: Population
    streams: RunStreams


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    evaluations: int
    best_fitness: float
    mean_fitness: float
    bandwidth: float
    # 0.0 unless timing was requested; real timings break byte-level
    # reproducibility of traces, so they are opt-in
    wall_ms: float = 0.0


@dataclass(frozen=True)
class RunResult:
    status: str  # "ok" | "diverged"
    best_solution: np.ndarray | None
    best_fitness: float
    evaluations: int
    records: list[IterationRecord]
    population: Population | None = None
    diverged_at: int | None = None
    param_trace: list[np.ndarray] | None = None


def init_population(
    config: SvgdConfig,
    model: ModelSpec,
    rng: np.random.Generator | Sequence[np.random.Generator],
) -> Population:
    """Draw every logit i.i.d. uniform on [-init_scale, +init_scale].

    ``rng`` is either a single generator (particles drawn sequentially) or
    one generator per agent, in which case particle i consumes only stream i.
    """
    shape = model.logit_shape
    delta = config.init_scale
    if isinstance(rng, np.random.Generator):
        rngs = [rng] * config.m
    else:
        rngs = list(rng)
        if len(rngs) != config.m:
            raise ContractViolationError(
                f"expected {config.m} generators, got {len(rngs)}"
            )
    logits = np.stack([r.uniform(-delta, delta, size=shape) for r in rngs])
    return Population(model, logits)


def estimate_boltzmann_grad(
    batch: SampleBatch, utilities: np.ndarray, gamma: float
) -> np.ndarray:
    """Per-agent score-function gradient estimates.

    Agent j's estimate is the utility-weighted mean of its lambda score
    gradients, scaled by 1/gamma:  g_j = (1 / (lambda * gamma)) *
    sum_l u[j, l] * grads[j, l].
    """
    if not gamma > 0:
        raise ContractViolationError("gamma must be positive")
    u = np.asarray(utilities, dtype=np.float64)
    m, lam = batch.fitness.shape
    if u.shape != (m, lam) or batch.grads.shape[:2] != (m, lam):
        raise ContractViolationError("utility/gradient shapes do not match the batch")
    return np.einsum("jl,jl...->j...", u, batch.grads) / (lam * gamma)


def svgd_step(
    population: Population,
    boltzmann_grads: np.ndarray,
    kernel_eval: KernelEval,
    epsilon: float,
) -> Population:
    """One synchronous particle update.

    theta_i += epsilon/m * sum_j ( gram[i, j] * g_j + grads_k[i, j] ), where
    grads_k[i, j] is the kernel gradient in its second argument. Raises
    DivergedError if any updated logit is non-finite or exceeds 1e6.
    """
    m = population.m
    g = np.asarray(boltzmann_grads, dtype=np.float64)
    if g.shape != population.logits.shape:
        raise ContractViolationError(
            f"gradient shape {g.shape} does not match population {population.logits.shape}"
        )
    if kernel_eval.gram.shape != (m, m) or kernel_eval.grads.shape[:2] != (m, m):
        raise ContractViolationError("kernel evaluation shape does not match population")
    attraction = np.einsum("ij,j...->i...", kernel_eval.gram, g)
    repulsion = kernel_eval.grads.sum(axis=1)
    new_logits = population.logits + (epsilon / m) * (attraction + repulsion)
    if not np.all(np.isfinite(new_logits)) or np.max(np.abs(new_logits)) > LOGIT_LIMIT:
        raise DivergedError("particle update produced non-finite or runaway logits")
    return population.with_logits(new_logits)


def _evaluate_row(objective: Callable, solutions: np.ndarray) -> np.ndarray:
    batch_fn = getattr(objective, "evaluate_batch", None)
    if batch_fn is not None:
        return np.asarray(batch_fn(solutions), dtype=np.float64)
    return np.array([float(objective(x)) for x in solutions], dtype=np.float64)


def run(
    objective: Callable,
    model: ModelSpec,
    config: SvgdConfig,
    seed: int | np.random.SeedSequence | None = None,
    streams: RunStreams | None = None,
    record_params: bool = False,
    timing: bool = False,
) -> RunResult:
    """Optimize ``objective`` for floor(budget / (m*lambda)) iterations.

    ``objective`` maps an int64 solution array to a float; an object with an
    ``evaluate_batch`` method is used one agent row at a time instead. Every
    evaluation counts once against the budget, and the best-so-far pair is
    updated before any parameter update of the same iteration. Leftover
    budget below one full generation is left unspent.

    A divergence aborts the run, returning the partial trace with
    status "diverged".
    """
    if streams is None:
        if seed is None:
            raise ConfigurationError("run needs a seed or explicit streams")
        streams = RunStreams.from_seed(seed, config.m)
    elif len(streams.agents) != config.m:
        raise ConfigurationError("streams do not match configured agent count")

    population = init_population(config, model, streams.agents)
    state = RunState(
        iteration=0,
        evaluations=0,
        best_solution=None,
        best_fitness=-np.inf,
        population=population,
        streams=streams,
    )
    records: list[IterationRecord] = []
    param_trace: list[np.ndarray] | None = [] if record_params else None
    m, lam, n = config.m, config.lam, model.n

    status = "ok"
    diverged_at = None
    for t in range(config.iterations):
        tic = time.perf_counter() if timing else 0.0
        state.iteration = t
        pop = state.population
        solutions = np.empty((m, lam, n), dtype=np.int64)
        for j in range(m):
            solutions[j] = policy_mod.sample_batch(pop.particle(j), lam, streams.agents[j])
        fitness = np.empty((m, lam))
        for j in range(m):
            fitness[j] = _evaluate_row(objective, solutions[j])
        state.evaluations += m * lam

        flat_best = int(np.argmax(fitness))  # first occurrence, row-major (j, l) order
        if fitness.ravel()[flat_best] > state.best_fitness:
            state.best_fitness = float(fitness.ravel()[flat_best])
            state.best_solution = solutions.reshape(m * lam, n)[flat_best].copy()

        grads = np.stack(
            [policy_mod.score_grad_batch(pop.particle(j), solutions[j]) for j in range(m)]
        )
        batch = SampleBatch(solutions=solutions, fitness=fitness, grads=grads)

        if config.utility_mode == RANK:
            ranks = utility_mod.global_ranks(fitness, streams.ties)
            utilities = utility_mod.s_hat(ranks, m, lam)
        elif config.utility_mode == RAW:
            utilities = fitness
        else:
            utilities = utility_mod.unbiased_w_matrix(fitness)

        keval = kernel_mod.evaluate(config.kernel, pop)
        g = estimate_boltzmann_grad(batch, utilities, config.gamma)
        try:
            state.population = svgd_step(pop, g, keval, config.epsilon)
        except DivergedError:
            status = "diverged"
            diverged_at = t
        records.append(
            IterationRecord(
                iteration=t,
                evaluations=state.evaluations,
                best_fitness=state.best_fitness,
                mean_fitness=float(fitness.mean()),
                bandwidth=keval.bandwidth,
                wall_ms=(time.perf_counter() - tic) * 1000.0 if timing else 0.0,
            )
        )
        if param_trace is not None:
            param_trace.append(state.population.logits.copy())
        if status == "diverged":
            break

    return RunResult(
        status=status,
        best_solution=state.best_solution,
        best_fitness=float(state.best_fitness),
        evaluations=state.evaluations,
        records=records,
        population=state.population,
        diverged_at=diverged_at,
        param_trace=param_trace,
    )
