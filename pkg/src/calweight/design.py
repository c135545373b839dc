"""Finite populations, sampling designs and drawn samples."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from os import PathLike
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import (
    DegenerateDesignError,
    EnumerationTooLargeError,
    InvalidSampleError,
    ParseError,
    PreconditionError,
)

DEFAULT_ENUMERATION_CAP = 10**8


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class FinitePopulation:
    """The full universe of ``N`` units with study values ``y`` and auxiliary ``x``.

    Units are addressed by 0-based position.
    """

    y: np.ndarray
    x: np.ndarray

    def __post_init__(self) -> None:
        y = _frozen(self.y)
        x = _frozen(self.x)
        if y.ndim != 1 or x.shape != y.shape:
            raise PreconditionError("y and x must be 1-d sequences of equal length")
        if y.size < 2:
            raise PreconditionError(f"a population needs N >= 2 units, got {y.size}")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise PreconditionError("population values must be finite")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)

    @classmethod
    def from_units(cls, units: Sequence[tuple[float, float]]) -> "FinitePopulation":
        arr = np.asarray(units, dtype=float).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])

    @property
    def N(self) -> int:
        return int(self.y.size)

    @property
    def units(self) -> list[tuple[float, float]]:
        return list(zip(self.y.tolist(), self.x.tolist()))

    @property
    def Y(self) -> float:
        return float(np.sum(self.y))

    @property
    def X(self) -> float:
        return float(np.sum(self.x))

    @property
    def Ybar(self) -> float:
        return self.Y / self.N

    @property
    def Xbar(self) -> float:
        return self.X / self.N

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FinitePopulation):
            return NotImplemented
        return np.array_equal(self.y, other.y) and np.array_equal(self.x, other.x)

    def __len__(self) -> int:
        return self.N


@dataclass(frozen=True)
class SrsworDesign:
    """Simple random sampling without replacement of ``n`` out of ``N`` units."""

    N: int
    n: int

    def __post_init__(self) -> None:
        if self.n < 2:
            raise DegenerateDesignError(f"sample size n={self.n} is below 2")
        if self.n > self.N:
            raise PreconditionError(f"sample size n={self.n} exceeds N={self.N}")

    @property
    def pi(self) -> float:
        return self.n / self.N

    @property
    def pi_joint(self) -> float:
        return self.n * (self.n - 1) / (self.N * (self.N - 1))

    @property
    def fraction(self) -> float:
        return self.n / self.N

    @property
    def sample_count(self) -> int:
        return math.comb(self.N, self.n)


@dataclass(frozen=True, eq=False)
class DesignSample:
    """A drawn sample with its inclusion probabilities.

    ``pi_joint`` is an ``n x n`` symmetric matrix; its diagonal holds the
    first-order probabilities and NaN marks a pair whose joint probability is
    unknown. Design weights ``d`` are derived as ``1 / pi_first``.
    """

    indices: np.ndarray
    y: np.ndarray
    x: np.ndarray
    pi_first: np.ndarray
    pi_joint: np.ndarray
    d: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        idx = _frozen(self.indices, dtype=np.int64)
        y, x, pi = _frozen(self.y), _frozen(self.x), _frozen(self.pi_first)
        n = idx.size
        if idx.ndim != 1 or not (y.shape == x.shape == pi.shape == (n,)):
            raise InvalidSampleError("indices, y, x and pi_first must have equal length")
        if n < 2:
            raise DegenerateDesignError(f"sample size n={n} is below 2")
        if np.unique(idx).size != n:
            raise InvalidSampleError("sample indices must be distinct")
        if not np.all((pi > 0.0) & (pi <= 1.0)):
            raise InvalidSampleError("first-order inclusion probabilities must lie in (0, 1]")
        pij = np.array(self.pi_joint, dtype=float, copy=True)
        if pij.shape != (n, n):
            raise InvalidSampleError(f"pi_joint must be {n}x{n}, got {pij.shape}")
        np.fill_diagonal(pij, pi)
        known = ~np.isnan(pij)
        if not np.array_equal(known, known.T) or not np.array_equal(pij[known], pij.T[known]):
            raise InvalidSampleError("pi_joint must be symmetric")
        bound = np.minimum.outer(pi, pi)
        if not np.all((pij[known] > 0.0) & (pij[known] <= bound[known])):
            raise InvalidSampleError("joint probabilities must satisfy 0 < pi_ij <= min(pi_i, pi_j)")
        pij.flags.writeable = False
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "pi_first", pi)
        object.__setattr__(self, "pi_joint", pij)
        object.__setattr__(self, "d", _frozen(1.0 / pi))

    @property
    def n(self) -> int:
        return int(self.indices.size)

    def pair_weights(self) -> np.ndarray:
        """Matrix of ``D_ij = (pi_i pi_j - pi_ij) / pi_ij`` with a zero diagonal.

        Unknown joint probabilities propagate as NaN.
        """
        pi = self.pi_first
        D = (np.multiply.outer(pi, pi) - self.pi_joint) / self.pi_joint
        np.fill_diagonal(D, 0.0)
        return D


def make_srswor_sample(pop: FinitePopulation, design: SrsworDesign,
                       indices: Sequence[int]) -> DesignSample:
    """Build the :class:`DesignSample` for SRSWOR units ``indices`` of ``pop``."""
    if design.N != pop.N:
        raise PreconditionError(f"design N={design.N} does not match population N={pop.N}")
    idx = np.asarray(indices, dtype=np.int64).ravel()
    if idx.size != design.n:
        raise InvalidSampleError(f"expected {design.n} indices, got {idx.size}")
    if np.unique(idx).size != idx.size:
        raise InvalidSampleError("duplicate unit index in sample")
    if np.any((idx < 0) | (idx >= pop.N)):
        raise InvalidSampleError(f"unit index out of range [0, {pop.N})")
    n = design.n
    pij = np.full((n, n), design.pi_joint)
    return DesignSample(idx, pop.y[idx], pop.x[idx], np.full(n, design.pi), pij)


def ht_total(sample: DesignSample) -> float:
    """Horvitz-Thompson estimate of the population total of ``y``."""
    return float(np.dot(sample.d, sample.y))


# -- combinatorial enumeration ---------------------------------------------------


def unrank_combination(N: int, n: int, rank: int) -> tuple[int, ...]:
    """The ``rank``-th ``n``-subset of ``range(N)`` in lexicographic order."""
    total = math.comb(N, n)
    if not 0 <= rank < total:
        raise PreconditionError(f"rank {rank} outside [0, {total})")
    combo = []
    start = 0
    for slot in range(n):
        remaining = n - slot - 1
        for v in range(start, N):
            block = math.comb(N - v - 1, remaining)
            if rank < block:
                combo.append(v)
                start = v + 1
                break
            rank -= block
    return tuple(combo)


def rank_combination(N: int, combo: Sequence[int]) -> int:
    """Lexicographic rank of the sorted subset ``combo`` of ``range(N)``."""
    n = len(combo)
    rank = 0
    prev = -1
    for slot, v in enumerate(combo):
        for skipped in range(prev + 1, int(v)):
            rank += math.comb(N - skipped - 1, n - slot - 1)
        prev = int(v)
    return rank


def iter_combinations(N: int, n: int, start: int = 0,
                      stop: int | None = None) -> Iterator[tuple[int, ...]]:
    """Lexicographic ``n``-subsets of ``range(N)`` with ranks in ``[start, stop)``."""
    total = math.comb(N, n)
    stop = total if stop is None else min(stop, total)
    if start >= stop:
        return
    c = list(unrank_combination(N, n, start))
    for _ in range(stop - start):
        yield tuple(c)
        i = n - 1
        while i >= 0 and c[i] == N - n + i:
            i -= 1
        if i < 0:
            return
        c[i] += 1
        for j in range(i + 1, n):
            c[j] = c[j - 1] + 1


@dataclass(frozen=True)
class EnumerationSummary:
    visited: int
    expected: int
    start: int
    stop: int


def check_enumeration(N: int, n: int, cap: int = DEFAULT_ENUMERATION_CAP) -> int:
    """Validate ``2 <= n <= N`` and the sample-count cap; return ``C(N, n)``."""
    if n > N:
        raise PreconditionError(f"sample size n={n} exceeds N={N}")
    if n < 2:
        raise DegenerateDesignError(f"sample size n={n} is below 2")
    count = math.comb(N, n)
    if count > cap:
        raise EnumerationTooLargeError(
            f"C({N}, {n}) = {count} samples exceeds the enumeration cap {cap}")
    return count


def enumerate_srswor(pop: FinitePopulation, n: int,
                     visitor: Callable[[tuple[int, ...]], object],
                     cap: int = DEFAULT_ENUMERATION_CAP,
                     start: int = 0, stop: int | None = None) -> EnumerationSummary:
    """Call ``visitor`` once per ``n``-subset of the population.

    Subsets are visited in lexicographic index order without materialising
    the full list. ``start``/``stop`` restrict the walk to a rank range so
    that callers can partition the work; the visitor must then be confined
    to its partition or be thread-safe.
    """
    total = check_enumeration(pop.N, n, cap)
    stop = total if stop is None else min(stop, total)
    visited = 0
    for combo in iter_combinations(pop.N, n, start, stop):
        visitor(combo)
        visited += 1
    return EnumerationSummary(visited=visited, expected=max(stop - start, 0),
                              start=start, stop=stop)


# -- input -----------------------------------------------------------------------


def _parse_float(text: str, line: int, column: int, path: str | None) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"not a number: {text.strip()!r}", line=line, column=column,
                         path=path) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite value: {text.strip()!r}", line=line,
                         column=column, path=path)
    return value


def read_rows(path: str | PathLike, ncols: int, delimiter: str = ",",
              numeric: Sequence[bool] | None = None) -> list[list]:
    """Read a delimited file with exactly ``ncols`` columns per record.

    A first line whose numeric fields do not parse is treated as a header.
    Blank lines and lines starting with ``#`` are skipped.
    """
    numeric = [True] * ncols if numeric is None else list(numeric)
    where = str(path)
    rows: list[list] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        first = True
        for fields in reader:
            lineno = reader.line_num
            if not fields or not "".join(fields).strip() or fields[0].lstrip().startswith("#"):
                continue
            if first:
                first = False
                looks_numeric = True
                for f, isnum in zip(fields, numeric):
                    if isnum:
                        try:
                            float(f)
                        except ValueError:
                            looks_numeric = False
                if not looks_numeric:
                    continue
            if len(fields) != ncols:
                raise ParseError(f"expected {ncols} columns, found {len(fields)}",
                                 line=lineno, column=min(len(fields), ncols) + 1,
                                 path=where)
            row = []
            for col, (f, isnum) in enumerate(zip(fields, numeric), start=1):
                row.append(_parse_float(f, lineno, col, where) if isnum else f.strip())
            rows.append(row)
    if not rows:
        raise ParseError("no data rows", line=1, path=where)
    return rows


def read_population(path: str | PathLike, delimiter: str = ",") -> FinitePopulation:
    """Load a two-column ``y, x`` file into a :class:`FinitePopulation`."""
    rows = read_rows(path, 2, delimiter)
    return FinitePopulation.from_units([tuple(r) for r in rows])
