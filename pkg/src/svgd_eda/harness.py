"""Experiment orchestration: batched multi-seed runs and their artifacts.

One experiment = one optimizer on one set of instances, ``runs_per_instance``
seeds each. Per-run seeds derive from the master seed via numpy
``SeedSequence(master_seed, spawn_key=(instance_index, run_index))``, so
distinct (instance, run) pairs always receive distinct streams and results
do not depend on scheduling order.

Artifacts: one CSV trace per run (header row, one line per iteration,
columns as RunRecord) plus a JSON summary. With timing disabled (the
default), repeated invocations with the same config and master seed
reproduce every output byte for byte.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines as baselines_mod
from . import landscapes as landscapes_mod
from . import svgd as svgd_mod
from .baselines import PbilConfig
from .errors import AggregationError, ConfigurationError
from .kernel import IDENTITY, RBF, KernelConfig
from .landscapes import InstanceSetSpec, NkdInstance
from .policy import ModelSpec
from .svgd import DEFAULT_STEP_SIZE, RunResult, SvgdConfig

OPTIMIZERS = ("svgd-eda", "svgd-eda-independent", "pbil", "random")

TRACE_COLUMNS = (
    "run_id",
    "instance_id",
    "iteration",
    "evaluations_used",
    "best_fitness",
    "mean_fitness",
    "bandwidth",
    "wall_clock_ms",
)

CHECKPOINT_STEP = 500


@dataclass(frozen=True)
class RunRecord:
    """One trace row."""

    run_id: str
    instance_id: str
    iteration: int
    evaluations_used: int
    best_fitness: float
    mean_fitness: float
    bandwidth: float
    wall_clock_ms: float


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one batch of runs.

    Exactly one of ``instance_spec`` / ``instance_files`` selects the
    instances. ``model=None`` derives the generator family from the
    instance cardinality (binary for d=2); "categorical" forces the
    softmax family even for d=2.
    """

    optimizer: str = "svgd-eda"
    instance_spec: InstanceSetSpec | None = None
    instance_files: tuple[str, ...] | None = None
    runs_per_instance: int = 10
    budget: int = 50_000
    master_seed: int = 0
    out_dir: str | None = None
    model: str | None = None
    m: int = 7
    lam: int = 13
    gamma: float = 0.015
    epsilon: float = DEFAULT_STEP_SIZE
    kernel: str = RBF
    bandwidth: float | None = None
    utility: str = "rank"
    init_scale: float = 0.5
    pbil: dict = field(default_factory=dict)
    random_chunk: int = 100
    include_diverged: bool = True
    timing: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}")
        if (self.instance_spec is None) == (self.instance_files is None):
            raise ConfigurationError(
                "exactly one of instance_spec / instance_files must be set"
            )
        if self.runs_per_instance < 1:
            raise ConfigurationError("runs_per_instance must be at least 1")
        if self.budget < 1:
            raise ConfigurationError("budget must be positive")
        if self.model not in (None, "binary", "categorical"):
            raise ConfigurationError(f"unknown model {self.model!r}")
        if self.kernel not in (RBF, IDENTITY):
            raise ConfigurationError(f"unknown kernel {self.kernel!r}")
        if self.workers < 1:
            raise ConfigurationError("workers must be at least 1")
        if self.instance_files is not None:
            self.instance_files = tuple(str(p) for p in self.instance_files)
            missing = [p for p in self.instance_files if not Path(p).exists()]
            if missing:
                raise ConfigurationError(f"instance files not found: {missing}")


@dataclass(frozen=True)
class Summary:
    """Distribution of final best fitness plus the mean best-so-far curve."""

    count: int
    mean: float
    std: float
    minimum: float
    maximum: float
    q1: float
    median: float
    q3: float
    curve_evaluations: tuple[int, ...]
    curve_mean_best: tuple[float, ...]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self) | {
            "curve_evaluations": list(self.curve_evaluations),
            "curve_mean_best": list(self.curve_mean_best),
        }


@dataclass(frozen=True)
class RunOutcome:
    run_id: str
    instance_id: str
    run_index: int
    status: str
    best_fitness: float
    evaluations: int
    trace_path: str | None


@dataclass(frozen=True)
class ExperimentResult:
    summary: Summary
    outcomes: tuple[RunOutcome, ...]


def run_seed(master_seed: int, instance_index: int, run_index: int) -> np.random.SeedSequence:
    """The documented seed-splitting scheme for one (instance, run) cell."""
    return np.random.SeedSequence(master_seed, spawn_key=(instance_index, run_index))


def load_instances(config: ExperimentConfig) -> list[NkdInstance]:
    if config.instance_spec is not None:
        return landscapes_mod.generate_set(config.instance_spec)
    return [landscapes_mod.load(p) for p in config.instance_files]


def _instance_ids(config: ExperimentConfig, instances: list[NkdInstance]) -> list[str]:
    if config.instance_files is not None:
        return [Path(p).stem for p in config.instance_files]
    return [inst.instance_id for inst in instances]


def _model_for(config: ExperimentConfig, instance: NkdInstance) -> ModelSpec:
    if config.model == "categorical":
        return ModelSpec.categorical(instance.n, instance.d)
    if config.model == "binary" and instance.d != 2:
        raise ConfigurationError("binary model requested for a d>2 instance")
    return ModelSpec.for_cardinality(instance.n, instance.d)


def _svgd_config(config: ExperimentConfig, kernel_mode: str) -> SvgdConfig:
    return SvgdConfig(
        m=config.m,
        lam=config.lam,
        gamma=config.gamma,
        epsilon=config.epsilon,
        utility_mode=config.utility,
        kernel=KernelConfig(mode=kernel_mode, bandwidth=config.bandwidth),
        budget=config.budget,
        init_scale=config.init_scale,
    )


def execute_run(
    config: ExperimentConfig, instance: NkdInstance, seed: np.random.SeedSequence
) -> RunResult:
    """Dispatch one run to the configured optimizer."""
    model = _model_for(config, instance)
    if config.optimizer in ("svgd-eda", "svgd-eda-independent"):
        mode = IDENTITY if config.optimizer == "svgd-eda-independent" else config.kernel
        return svgd_mod.run(
            instance, model, _svgd_config(config, mode), seed=seed, timing=config.timing
        )
    if config.optimizer == "pbil":
        pbil_cfg = PbilConfig(budget=config.budget, **config.pbil)
        return baselines_mod.pbil_run(instance, model, pbil_cfg, seed, timing=config.timing)
    return baselines_mod.random_search_run(
        instance, model, config.budget, seed, chunk_size=config.random_chunk,
        timing=config.timing,
    )


def _format_float(value: float) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return repr(float(value))


def write_trace(path: Path, rows: list[RunRecord]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for r in rows:
            writer.writerow(
                [
                    r.run_id,
                    r.instance_id,
                    r.iteration,
                    r.evaluations_used,
                    _format_float(r.best_fitness),
                    _format_float(r.mean_fitness),
                    _format_float(r.bandwidth),
                    _format_float(r.wall_clock_ms),
                ]
            )


def _records_to_rows(run_id: str, instance_id: str, result: RunResult) -> list[RunRecord]:
    return [
        RunRecord(
            run_id=run_id,
            instance_id=instance_id,
            iteration=rec.iteration,
            evaluations_used=rec.evaluations,
            best_fitness=rec.best_fitness,
            mean_fitness=rec.mean_fitness,
            bandwidth=rec.bandwidth,
            wall_clock_ms=rec.wall_ms,
        )
        for rec in result.records
    ]


def _job(args) -> tuple[RunOutcome, np.ndarray, np.ndarray]:
    config, instance, instance_id, instance_index, run_index = args
    seed = run_seed(config.master_seed, instance_index, run_index)
    result = execute_run(config, instance, seed)
    run_id = f"{instance_id}__{config.optimizer}__r{run_index:03d}"
    trace_path = None
    if config.out_dir is not None:
        trace_path = str(Path(config.out_dir) / "traces" / f"{run_id}.csv")
        write_trace(Path(trace_path), _records_to_rows(run_id, instance_id, result))
    outcome = RunOutcome(
        run_id=run_id,
        instance_id=instance_id,
        run_index=run_index,
        status=result.status,
        best_fitness=result.best_fitness,
        evaluations=result.evaluations,
        trace_path=trace_path,
    )
    evals = np.array([rec.evaluations for rec in result.records], dtype=np.int64)
    best = np.array([rec.best_fitness for rec in result.records])
    return outcome, evals, best


def step_curve_at(
    evals: np.ndarray, best: np.ndarray, checkpoints: np.ndarray
) -> np.ndarray:
    """Best-so-far sampled on a checkpoint grid with previous-value hold.

    Best-so-far is a step function of evaluations; checkpoints before the
    first recorded point report the first record's value.
    """
    idx = np.searchsorted(evals, checkpoints, side="right") - 1
    return best[np.clip(idx, 0, len(best) - 1)]


def summarize(
    finals: list[float],
    curves: list[tuple[np.ndarray, np.ndarray]],
    max_evaluations: int,
    step: int = CHECKPOINT_STEP,
) -> Summary:
    if not finals:
        raise AggregationError("no runs to summarize")
    arr = np.asarray(finals, dtype=np.float64)
    q1, median, q3 = np.percentile(arr, [25, 50, 75])
    checkpoints = np.arange(step, max_evaluations + 1, step, dtype=np.int64)
    if checkpoints.size and curves:
        sampled = np.stack([step_curve_at(e, b, checkpoints) for e, b in curves])
        curve_mean = sampled.mean(axis=0)
    else:
        checkpoints = np.array([], dtype=np.int64)
        curve_mean = np.array([])
    return Summary(
        count=len(finals),
        mean=float(arr.mean()),
        std=float(arr.std()),
        minimum=float(arr.min()),
        maximum=float(arr.max()),
        q1=float(q1),
        median=float(median),
        q3=float(q3),
        curve_evaluations=tuple(int(c) for c in checkpoints),
        curve_mean_best=tuple(float(v) for v in curve_mean),
    )


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Execute all (instance, run) cells and write traces plus a summary.

    Diverged runs are always recorded in the outcomes; they contribute
    their last best-so-far to the summary unless ``include_diverged`` is
    False.
    """
    instances = load_instances(config)
    ids = _instance_ids(config, instances)
    jobs = [
        (config, instances[i], ids[i], i, r)
        for i in range(len(instances))
        for r in range(config.runs_per_instance)
    ]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_job, jobs))
    else:
        results = [_job(j) for j in jobs]

    outcomes = tuple(r[0] for r in results)
    finals = []
    curves = []
    for outcome, evals, best in results:
        if outcome.status != "ok" and not config.include_diverged:
            continue
        finals.append(outcome.best_fitness)
        curves.append((evals, best))
    summary = summarize(finals, curves, config.budget)
    if config.out_dir is not None:
        _write_json(
            Path(config.out_dir) / "summary.json",
            {
                "optimizer": config.optimizer,
                "runs": len(outcomes),
                "diverged": sum(1 for o in outcomes if o.status != "ok"),
                "summary": summary.to_dict(),
            },
        )
    return ExperimentResult(summary=summary, outcomes=outcomes)


def sweep_m(config: ExperimentConfig, m_values: list[int]) -> dict[int, Summary]:
    """Rerun the experiment for each agent count, budget held fixed.

    Iterations scale as floor(budget / (m * lambda)), so larger populations
    see fewer generations: the budget-dilution trade-off. Writes one
    subdirectory per m plus a combined summary and a raw finals table
    suitable for box plots.
    """
    if config.optimizer not in ("svgd-eda", "svgd-eda-independent"):
        raise ConfigurationError("sweep_m applies to the svgd-eda optimizer")
    summaries: dict[int, Summary] = {}
    finals_rows: list[tuple[int, str, int, float]] = []
    for m in m_values:
        sub = dataclasses.replace(
            config,
            m=m,
            out_dir=None if config.out_dir is None else str(Path(config.out_dir) / f"m{m:02d}"),
        )
        result = run_experiment(sub)
        summaries[m] = result.summary
        for o in result.outcomes:
            finals_rows.append((m, o.instance_id, o.run_index, o.best_fitness))
    if config.out_dir is not None:
        _write_json(
            Path(config.out_dir) / "sweep_summary.json",
            {str(m): s.to_dict() for m, s in summaries.items()},
        )
        table = Path(config.out_dir) / "sweep_finals.csv"
        table.parent.mkdir(parents=True, exist_ok=True)
        with open(table, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["m", "instance_id", "run_index", "final_best_fitness"])
            for row in finals_rows:
                writer.writerow([row[0], row[1], row[2], _format_float(row[3])])
    return summaries


@dataclass(frozen=True)
class AblationResult:
    interacting: Summary
    independent: Summary
    paired_diffs: tuple[float, ...]
    per_instance_mean_diff: dict[str, float]
    mean_diff: float


def ablation_interaction(config: ExperimentConfig) -> AblationResult:
    """Paired comparison of the rbf kernel against the identity ablation.

    Both arms run the same instances with the same (instance, run) seeds;
    reported differences are interacting minus independent, per matched
    run, aggregated per instance and overall.
    """
    if config.optimizer not in ("svgd-eda", "svgd-eda-independent"):
        raise ConfigurationError("ablation applies to the svgd-eda optimizer")
    base_out = None if config.out_dir is None else Path(config.out_dir)
    arm_rbf = dataclasses.replace(
        config,
        optimizer="svgd-eda",
        kernel=RBF,
        out_dir=None if base_out is None else str(base_out / "interacting"),
    )
    arm_id = dataclasses.replace(
        config,
        optimizer="svgd-eda-independent",
        out_dir=None if base_out is None else str(base_out / "independent"),
    )
    res_rbf = run_experiment(arm_rbf)
    res_id = run_experiment(arm_id)
    diffs = []
    per_instance: dict[str, list[float]] = {}
    for a, b in zip(res_rbf.outcomes, res_id.outcomes):
        d = a.best_fitness - b.best_fitness
        diffs.append(d)
        per_instance.setdefault(a.instance_id, []).append(d)
    per_instance_mean = {k: float(np.mean(v)) for k, v in per_instance.items()}
    result = AblationResult(
        interacting=res_rbf.summary,
        independent=res_id.summary,
        paired_diffs=tuple(diffs),
        per_instance_mean_diff=per_instance_mean,
        mean_diff=float(np.mean(diffs)),
    )
    if base_out is not None:
        _write_json(
            base_out / "ablation.json",
            {
                "interacting": result.interacting.to_dict(),
                "independent": result.independent.to_dict(),
                "mean_diff": result.mean_diff,
                "per_instance_mean_diff": result.per_instance_mean_diff,
                "paired_diffs": list(result.paired_diffs),
            },
        )
    return result


def read_trace(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Evaluations and best-so-far columns of one trace file."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRACE_COLUMNS:
            raise AggregationError("trace header does not match schema", path=str(path))
        evals = []
        best = []
        for row in reader:
            if len(row) != len(TRACE_COLUMNS):
                raise AggregationError(
                    f"row with {len(row)} columns", path=str(path)
                )
            evals.append(int(row[3]))
            best.append(float(row[4]))
    if not evals:
        raise AggregationError("trace has no data rows", path=str(path))
    return np.array(evals, dtype=np.int64), np.array(best)


def aggregate(trace_paths: list[str | Path], step: int = CHECKPOINT_STEP) -> Summary:
    """Summary over already-written trace files (one final value per file)."""
    if not trace_paths:
        raise AggregationError("no trace files given")
    curves = [read_trace(p) for p in trace_paths]
    finals = [float(best[-1]) for _, best in curves]
    max_evals = max(int(e[-1]) for e, _ in curves)
    return summarize(finals, curves, max_evals, step=step)
