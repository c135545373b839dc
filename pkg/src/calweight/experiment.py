"""Efficiency study: linear regression vs. GREG (through-origin) estimator.

Two harnesses compare the mean-scale estimators

    lr = ybar + b_ols (Xbar - xbar)
    ds = ybar + b_ds  (Xbar - xbar)

by percent relative efficiency ``RE = 100 * MSE(ds) / MSE(lr)``:

* :func:`exact_enumeration_re` visits every SRSWOR sample of a finite
  population, so the MSEs are exact.
* :func:`monte_carlo_re` draws samples from a bivariate normal
  superpopulation with means 100 and 90.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Sequence, TextIO

import numpy as np

from . import _core
from .design import (
    DEFAULT_ENUMERATION_CAP,
    FinitePopulation,
    check_enumeration,
    unrank_combination,
)
from .errors import DegenerateDesignError, DomainError, ParseError, PreconditionError
from .rng import CounterNormalStream


class TransformMap(Enum):
    IDENTITY = "id"
    SQRT = "sqrt"
    LOG = "log"


@dataclass(frozen=True)
class Transformation:
    target: str = "y"
    map: TransformMap = TransformMap.IDENTITY

    def __post_init__(self) -> None:
        if self.target not in ("y", "x"):
            raise PreconditionError(f"transformation target must be 'y' or 'x', got {self.target!r}")

    @classmethod
    def parse(cls, text: str) -> "Transformation":
        """Parse ``map:target`` such as ``sqrt:y`` or ``log:x``; ``id`` alone is allowed."""
        name, _, target = text.strip().partition(":")
        try:
            tmap = TransformMap(name.strip().lower())
        except ValueError:
            raise PreconditionError(f"unknown transformation {name!r} (use id, sqrt or log)") from None
        return cls(target=(target.strip().lower() or "y"), map=tmap)

    @property
    def label(self) -> str:
        return f"{self.map.value}:{self.target}"


def apply_transformation(pop: FinitePopulation, t: Transformation) -> FinitePopulation:
    """Map one column of ``pop`` pointwise; the other column is unchanged."""
    col = pop.y if t.target == "y" else pop.x
    if t.map is TransformMap.IDENTITY:
        return pop
    if t.map is TransformMap.SQRT:
        bad = np.flatnonzero(col < 0.0)
        if bad.size:
            raise DomainError(f"sqrt of negative {t.target} at unit {int(bad[0])} ({col[bad[0]]!r})",
                              origin="apply_transformation")
        new = np.sqrt(col)
    else:
        bad = np.flatnonzero(col <= 0.0)
        if bad.size:
            raise DomainError(f"log of nonpositive {t.target} at unit {int(bad[0])} ({col[bad[0]]!r})",
                              origin="apply_transformation")
        new = np.log(col)
    if t.target == "y":
        return FinitePopulation(new, pop.x)
    return FinitePopulation(pop.y, new)


class DegeneratePolicy(Enum):
    """What to do with a sample whose x values are all equal.

    SKIP drops it and counts it in ``skipped``; FALLBACK scores both
    estimators as the plain sample mean.
    """

    SKIP = "skip"
    FALLBACK = "fallback"


def relative_efficiency(mse_ds: float, mse_lr: float) -> float:
    """``100 * mse_ds / mse_lr``; +inf when only ``mse_lr`` is 0, NaN when both are."""
    if mse_lr > 0.0:
        return 100.0 * mse_ds / mse_lr
    if mse_ds > 0.0:
        return math.inf
    return math.nan


@dataclass(frozen=True)
class ExperimentReport:
    scenario: str
    n: int
    rho_or_transform: str
    mse_lr: float
    mse_ds: float
    re_percent: float
    skipped: int
    sample_count: int

    @classmethod
    def build(cls, scenario: str, n: int, label: str, mse_lr: float, mse_ds: float,
              skipped: int, sample_count: int) -> "ExperimentReport":
        return cls(scenario, n, label, mse_lr, mse_ds,
                   relative_efficiency(mse_ds, mse_lr), skipped, sample_count)

    def same_as(self, other: "ExperimentReport") -> bool:
        """Field-wise equality that treats two undefined REs as equal."""
        if math.isnan(self.re_percent) and math.isnan(other.re_percent):
            return replace(self, re_percent=0.0) == replace(other, re_percent=0.0)
        return self == other


def default_workers() -> int:
    env = os.environ.get("CALWEIGHT_WORKERS", "").strip()
    if env:
        try:
            value = int(env)
        except ValueError:
            raise PreconditionError(f"CALWEIGHT_WORKERS must be an integer, got {env!r}") from None
        if value < 1:
            raise PreconditionError("CALWEIGHT_WORKERS must be at least 1")
        return value
    return os.cpu_count() or 1


def _partitions(total: int, parts: int) -> list[tuple[int, int]]:
    parts = max(1, min(parts, total))
    edges = [total * k // parts for k in range(parts + 1)]
    return [(edges[k], edges[k + 1]) for k in range(parts) if edges[k + 1] > edges[k]]


def _map(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def population_correlation(pop: FinitePopulation) -> float:
    return float(np.corrcoef(pop.x, pop.y)[0, 1])


def exact_enumeration_re(pop: FinitePopulation, n: int, q_star=None, q=None,
                         policy: DegeneratePolicy = DegeneratePolicy.SKIP,
                         cap: int = DEFAULT_ENUMERATION_CAP, workers: int = 1,
                         label: str = "id:y", kernels=None) -> ExperimentReport:
    """Exact MSEs of both estimators over every SRSWOR sample of size ``n``.

    ``q_star`` tunes the intercept-model slope and ``q`` the through-origin
    slope; both are per population unit and default to ones. The target is
    the population mean of ``y``. With ``workers > 1`` the rank range is
    split into contiguous partitions whose sums are added in rank order.
    """
    total = check_enumeration(pop.N, n, cap)
    kernels = kernels or _core.kernels
    ones = np.ones(pop.N)
    qs = ones if q_star is None else np.ascontiguousarray(q_star, dtype=float)
    qd = ones if q is None else np.ascontiguousarray(q, dtype=float)
    for name, arr in (("q_star", qs), ("q", qd)):
        if arr.shape != (pop.N,) or np.any(arr <= 0.0):
            raise PreconditionError(f"{name} must hold one positive value per population unit")
    y = np.ascontiguousarray(pop.y)
    x = np.ascontiguousarray(pop.x)
    xbar, ybar = pop.Xbar, pop.Ybar
    fallback = policy is DegeneratePolicy.FALLBACK

    def run(part: tuple[int, int]):
        start, stop = part
        first = np.array(unrank_combination(pop.N, n, start), dtype=np.int64)
        return kernels.enum_sq_errors(y, x, qd, qs, first, stop - start, xbar, ybar, fallback)

    results = _map(run, _partitions(total, workers), workers)
    sum_lr = sum(r[0] for r in results)
    sum_ds = sum(r[1] for r in results)
    visited = sum(int(r[2]) for r in results)
    skipped = sum(int(r[3]) for r in results)
    used = visited - skipped
    if used == 0:
        raise DegenerateDesignError("every sample has constant x; no estimate is defined",
                                    origin="exact_enumeration_re")
    return ExperimentReport.build("enumerate", n, label, sum_lr / used, sum_ds / used,
                                  skipped, visited)


@dataclass(frozen=True)
class MonteCarloConfig:
    """Superpopulation settings.

    ``y = mu_y + sqrt(Sy2 (1 - rho^2)) y* + rho sqrt(Sy2) x*`` and
    ``x = mu_x + sqrt(Sx2) x*`` with independent standard normals ``y*, x*``.
    """

    rho: float
    n: int
    replicates: int = 15000
    Sy2: float = 50.0
    Sx2: float = 50.0
    mu_y: float = 100.0
    mu_x: float = 90.0
    seed: int = 13031963

    def __post_init__(self) -> None:
        if not -1.0 < self.rho < 1.0:
            raise PreconditionError(f"rho must lie in (-1, 1), got {self.rho}")
        if self.n < 3:
            raise PreconditionError(f"n must be at least 3, got {self.n}")
        if self.replicates < 1:
            raise PreconditionError("replicates must be at least 1")
        if self.Sy2 < 0.0 or self.Sx2 <= 0.0:
            raise PreconditionError("variances must be positive")
        if self.seed < 0:
            raise PreconditionError("seed must be unsigned")

    def stream(self) -> CounterNormalStream:
        return CounterNormalStream(self.seed, 2 * self.n)


def transform_pairs(cfg: MonteCarloConfig, ystar: np.ndarray,
                    xstar: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    y = cfg.mu_y + math.sqrt(cfg.Sy2 * (1.0 - cfg.rho**2)) * ystar + cfg.rho * math.sqrt(cfg.Sy2) * xstar
    x = cfg.mu_x + math.sqrt(cfg.Sx2) * xstar
    return y, x


def generate_correlated_pair_sample(cfg: MonteCarloConfig,
                                    replicate: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """The ``(y, x)`` sample of size ``cfg.n`` for one replicate.

    Replicate ``r`` reads its own block of the counter-based stream for
    ``cfg.seed``: the first ``n`` normals are ``y*``, the next ``n`` are ``x*``.
    """
    z = cfg.stream().replicate(replicate)
    return transform_pairs(cfg, z[: cfg.n], z[cfg.n:])


def monte_carlo_re(cfg: MonteCarloConfig,
                   policy: DegeneratePolicy = DegeneratePolicy.SKIP,
                   workers: int = 1, kernels=None) -> ExperimentReport:
    """Replicate-average MSEs of both estimators against the model mean ``mu_y``.

    Per-replicate squared errors are collected in replicate order and summed
    with :func:`math.fsum`, so the result is independent of ``workers``.
    """
    kernels = kernels or _core.kernels
    stream = cfg.stream()
    n = cfg.n
    fallback = policy is DegeneratePolicy.FALLBACK

    def run(part: tuple[int, int]):
        z = stream.block(*part)
        ys = np.ascontiguousarray(z[:, :n])
        xs = np.ascontiguousarray(z[:, n:])
        return kernels.mc_sq_errors(ys, xs, cfg.rho, cfg.Sy2, cfg.Sx2, cfg.mu_y, cfg.mu_x,
                                    fallback)

    results = _map(run, _partitions(cfg.replicates, workers), workers)
    sq_lr = np.concatenate([r[0] for r in results])
    sq_ds = np.concatenate([r[1] for r in results])
    bad = np.concatenate([r[2] for r in results])
    skipped = 0 if fallback else int(bad.sum())
    used = cfg.replicates - skipped
    if used == 0:
        raise DegenerateDesignError("every replicate was degenerate", origin="monte_carlo_re")
    mse_lr = math.fsum(sq_lr) / used
    mse_ds = math.fsum(sq_ds) / used
    return ExperimentReport.build("simulate", n, repr(float(cfg.rho)), mse_lr, mse_ds,
                                  skipped, cfg.replicates)


def simulate_grid(rhos: Sequence[float], ns: Sequence[int], replicates: int = 15000,
                  seed: int = 13031963, workers: int = 1,
                  policy: DegeneratePolicy = DegeneratePolicy.SKIP,
                  **overrides) -> list[ExperimentReport]:
    """Run :func:`monte_carlo_re` for every ``(n, rho)`` cell, rows ordered by ``n``."""
    out = []
    for n in ns:
        for rho in rhos:
            cfg = MonteCarloConfig(rho=float(rho), n=int(n), replicates=replicates, seed=seed,
                                   **overrides)
            out.append(monte_carlo_re(cfg, policy=policy, workers=workers))
    return out


# -- report I/O ------------------------------------------------------------------

REPORT_COLUMNS = ("scenario", "n", "rho_or_transform", "mse_lr", "mse_ds",
                  "re_percent", "skipped", "sample_count")


def format_number(value: float, human: bool = False) -> str:
    if math.isnan(value):
        return "undef"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.2f}" if human else f"{value:.17g}"


def parse_number(text: str) -> float:
    text = text.strip()
    if text == "undef":
        return math.nan
    return float(text)


def write_reports(reports: Iterable[ExperimentReport], fh: TextIO, delimiter: str = ",",
                  human: bool = False) -> None:
    """Write reports as a delimited table with a header row."""
    writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for r in reports:
        writer.writerow([r.scenario, r.n, r.rho_or_transform,
                         format_number(r.mse_lr, human), format_number(r.mse_ds, human),
                         format_number(r.re_percent, human), r.skipped, r.sample_count])


def read_reports(fh: TextIO, delimiter: str = ",") -> list[ExperimentReport]:
    """Parse a table written by :func:`write_reports`."""
    reader = csv.reader(fh, delimiter=delimiter)
    header = next(reader, None)
    if header is None or tuple(header) != REPORT_COLUMNS:
        raise ParseError(f"expected header {','.join(REPORT_COLUMNS)}", line=1)
    out = []
    for row in reader:
        if not row or row[0].startswith("#"):
            continue
        if len(row) != len(REPORT_COLUMNS):
            raise ParseError(f"expected {len(REPORT_COLUMNS)} columns, found {len(row)}",
                             line=reader.line_num)
        try:
            out.append(ExperimentReport(row[0], int(row[1]), row[2], parse_number(row[3]),
                                        parse_number(row[4]), parse_number(row[5]),
                                        int(row[6]), int(row[7])))
        except ValueError as exc:
            raise ParseError(str(exc), line=reader.line_num) from None
    return out
