"""Seeded NK/NKD fitness landscapes with a reproducible generator.

A landscape over n variables of cardinality d assigns each variable a
random neighborhood of K other variables and a lookup table of d**(K+1)
values drawn uniformly from [0, 1); fitness is the mean table value over
all variables. d=2 is the classic binary NK model, d=3 its three-valued
extension (NK3).

Instance generation uses the counter-based Philox stream keyed by the
instance seed, so (n, K, d, seed) determines the instance bit-for-bit on
every platform. Draw order: for each variable in turn, the neighborhood
via a partial Fisher-Yates shuffle (K bounded-integer draws); then for
each variable in turn, one block of d**(K+1) uniform doubles.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import (
    ConfigurationError,
    ContractViolationError,
    InstanceParseError,
    SearchSpaceTooLargeError,
)

ENUMERATION_GUARD = 2 ** 24


def problem_name(d: int) -> str:
    return "NK" if d == 2 else f"NK{d}"


def problem_cardinality(problem: str) -> int:
    p = problem.strip().upper()
    if p == "NK":
        return 2
    if p.startswith("NK") and p[2:].isdigit():
        return int(p[2:])
    raise ConfigurationError(f"unknown problem {problem!r}")


@dataclass(frozen=True)
class NkdInstance:
    """One landscape: neighborhoods, lookup tables, and its generation seed."""

    n: int
    k: int
    d: int
    seed: int
    links: np.ndarray   # (n, k) neighbor indices, each row distinct and != i
    tables: np.ndarray  # (n, d**(k+1)) values in [0, 1)

    def __post_init__(self):
        links = np.ascontiguousarray(self.links, dtype=np.int64)
        tables = np.ascontiguousarray(self.tables, dtype=np.float64)
        if links.shape != (self.n, self.k):
            raise ContractViolationError(
                f"links shape {links.shape} does not match (n, k) = ({self.n}, {self.k})"
            )
        if tables.shape != (self.n, self.d ** (self.k + 1)):
            raise ContractViolationError(
                f"tables shape {tables.shape} does not match "
                f"(n, d**(k+1)) = ({self.n}, {self.d ** (self.k + 1)})"
            )
        for i in range(self.n):
            row = links[i]
            if self.k and (row.min() < 0 or row.max() >= self.n):
                raise ContractViolationError(f"links row {i} out of range")
            if np.any(row == i) or len(set(row.tolist())) != self.k:
                raise ContractViolationError(
                    f"links row {i} must hold {self.k} distinct indices != {i}"
                )
        if tables.size and (tables.min() < 0.0 or tables.max() >= 1.0):
            raise ContractViolationError("table values must lie in [0, 1)")
        object.__setattr__(self, "links", links)
        object.__setattr__(self, "tables", tables)

    @property
    def problem(self) -> str:
        return problem_name(self.d)

    @property
    def instance_id(self) -> str:
        return f"{self.problem.lower()}_n{self.n}_k{self.k}_s{self.seed}"

    def __call__(self, x: np.ndarray) -> float:
        return evaluate(self, x)

    def evaluate_batch(self, xs: np.ndarray) -> np.ndarray:
        """Fitness for each row of an integer (b, n) batch; engine fast path."""
        xs = np.ascontiguousarray(xs, dtype=np.int64)
        return _kernels.nkd_eval_batch(self.links, self.tables, int(self.d), xs)


def generate(n: int, k: int, d: int, seed: int) -> NkdInstance:
    """Generate the instance determined by (n, k, d, seed).

    Neighborhoods are uniform without replacement from [0, n) minus the
    variable itself; table entries are i.i.d. uniform on [0, 1).
    """
    if not 0 <= k < n:
        raise ConfigurationError(f"require 0 <= K < n, got K={k}, n={n}")
    if d < 2:
        raise ConfigurationError(f"require d >= 2, got {d}")
    rng = np.random.Generator(np.random.Philox(key=seed))
    links = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        candidates = np.concatenate([np.arange(i), np.arange(i + 1, n)])
        for j in range(k):
            r = int(rng.integers(j, n - 1))
            candidates[j], candidates[r] = candidates[r], candidates[j]
        links[i] = candidates[:k]
    table_len = d ** (k + 1)
    tables = np.empty((n, table_len))
    for i in range(n):
        tables[i] = rng.random(table_len)
    return NkdInstance(n=n, k=k, d=d, seed=seed, links=links, tables=tables)


def _check_solution(instance: NkdInstance, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != (instance.n,):
        raise ContractViolationError(
            f"solution shape {x.shape} does not match n={instance.n}"
        )
    if x.min() < 0 or x.max() >= instance.d:
        raise ContractViolationError(f"solution entries must lie in [0, {instance.d})")
    return np.ascontiguousarray(x, dtype=np.int64)


def evaluate(instance: NkdInstance, x: np.ndarray) -> float:
    """Mean of the n table lookups for solution ``x``; always in [0, 1)."""
    x = _check_solution(instance, x)
    return float(instance.evaluate_batch(x[None, :])[0])


def contributions(instance: NkdInstance, x: np.ndarray) -> np.ndarray:
    """Per-variable table values for ``x`` (fitness is their mean)."""
    x = _check_solution(instance, x)
    idx = x * (instance.d ** instance.k)
    if instance.k:
        powers = instance.d ** np.arange(instance.k - 1, -1, -1)
        idx = idx + x[instance.links] @ powers
    return instance.tables[np.arange(instance.n), idx]


def enumerate_optimum(instance: NkdInstance) -> tuple[np.ndarray, float]:
    """Exhaustive maximizer; ties resolved to the lexicographically smallest.

    Refuses search spaces larger than 2**24 solutions.
    """
    size = instance.d ** instance.n
    if size > ENUMERATION_GUARD:
        raise SearchSpaceTooLargeError(
            f"d**n = {size} exceeds enumeration guard {ENUMERATION_GUARD}"
        )
    best = _kernels.enum_argmax(
        instance.links, instance.tables, int(instance.d), int(instance.n)
    )
    return best, evaluate(instance, best)


@dataclass(frozen=True)
class InstanceSetSpec:
    """A family of instances: one problem/size/ruggedness cell, ``count`` seeds."""

    problem: str
    n: int
    k: int
    count: int
    base_seed: int = 0

    def __post_init__(self):
        problem_cardinality(self.problem)  # validates the name
        if self.count < 1:
            raise ConfigurationError("count must be at least 1")

    @property
    def d(self) -> int:
        return problem_cardinality(self.problem)

    def seeds(self) -> list[int]:
        return [self.base_seed + i for i in range(self.count)]


def generate_set(spec: InstanceSetSpec) -> list[NkdInstance]:
    return [generate(spec.n, spec.k, spec.d, s) for s in spec.seeds()]


# ---------------------------------------------------------------------------
# Instance file format (documented in README): line-oriented text,
#   nkd-instance 1
#   problem <NK|NK3|NK<d>>
#   n <int> / k <int> / d <int> / seed <int>
#   links      followed by n lines of k space-separated ints
#   tables     followed by n lines of d**(k+1) space-separated floats (repr)
# Floats are written with shortest round-trip precision, so save/load is
# a bitwise identity.
# ---------------------------------------------------------------------------

FORMAT_MAGIC = "nkd-instance"
FORMAT_VERSION = 1


def save(instance: NkdInstance, path: str | Path) -> None:
    path = Path(path)
    lines = [f"{FORMAT_MAGIC} {FORMAT_VERSION}"]
    lines.append(f"problem {instance.problem}")
    lines.append(f"n {instance.n}")
    lines.append(f"k {instance.k}")
    lines.append(f"d {instance.d}")
    lines.append(f"seed {instance.seed}")
    lines.append("links")
    for row in instance.links:
        lines.append(" ".join(str(int(v)) for v in row))
    lines.append("tables")
    for row in instance.tables:
        lines.append(" ".join(repr(float(v)) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _parse_header_line(lines: list[str], idx: int, key: str) -> str:
    if idx >= len(lines):
        raise InstanceParseError(f"missing {key!r} line", location=f"line {idx + 1}")
    parts = lines[idx].split(maxsplit=1)
    if len(parts) != 2 or parts[0] != key:
        raise InstanceParseError(
            f"expected {key!r} field, got {lines[idx]!r}", location=f"line {idx + 1}"
        )
    return parts[1]


def load(path: str | Path) -> NkdInstance:
    """Parse an instance file; malformed input raises with a location."""
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0].split() != [FORMAT_MAGIC, str(FORMAT_VERSION)]:
        raise InstanceParseError(
            f"expected header {FORMAT_MAGIC!r} {FORMAT_VERSION}", location="line 1"
        )
    problem = _parse_header_line(lines, 1, "problem")
    try:
        n = int(_parse_header_line(lines, 2, "n"))
        k = int(_parse_header_line(lines, 3, "k"))
        d = int(_parse_header_line(lines, 4, "d"))
        seed = int(_parse_header_line(lines, 5, "seed"))
    except ValueError as exc:
        raise InstanceParseError(f"non-integer header value: {exc}") from exc
    if problem_cardinality(problem) != d:
        raise InstanceParseError(
            f"problem {problem!r} inconsistent with d={d}", location="line 2"
        )
    if lines[6:7] != ["links"]:
        raise InstanceParseError("expected 'links' section", location="line 7")
    links_rows = []
    for i in range(n):
        lineno = 7 + i
        if lineno >= len(lines):
            raise InstanceParseError("truncated links section", location=f"links row {i}")
        try:
            row = [int(tok) for tok in lines[lineno].split()]
        except ValueError as exc:
            raise InstanceParseError(str(exc), location=f"links row {i}") from exc
        if len(row) != k:
            raise InstanceParseError(
                f"expected {k} neighbor indices, got {len(row)}",
                location=f"links row {i}",
            )
        links_rows.append(row)
    tables_start = 7 + n
    if lines[tables_start : tables_start + 1] != ["tables"]:
        raise InstanceParseError(
            "expected 'tables' section", location=f"line {tables_start + 1}"
        )
    expected_len = d ** (k + 1)
    table_rows = []
    for i in range(n):
        lineno = tables_start + 1 + i
        if lineno >= len(lines):
            raise InstanceParseError("truncated tables section", location=f"table {i}")
        try:
            row = [float(tok) for tok in lines[lineno].split()]
        except ValueError as exc:
            raise InstanceParseError(str(exc), location=f"table {i}") from exc
        if len(row) != expected_len:
            raise InstanceParseError(
                f"expected {expected_len} entries, got {len(row)}",
                location=f"table {i}",
            )
        table_rows.append(row)
    links = np.array(links_rows, dtype=np.int64).reshape(n, k)
    tables = np.array(table_rows, dtype=np.float64).reshape(n, expected_len)
    # range/consistency invariants are enforced by the dataclass itself
    return NkdInstance(n=n, k=k, d=d, seed=seed, links=links, tables=tables)
