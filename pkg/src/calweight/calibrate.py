"""Chi-square calibration of design weights.

Two calibrations are provided. :func:`greg_weights` matches the auxiliary
total only and gives the GREG estimator (a regression through the origin).
:func:`lr_weights` also holds the weight sum fixed, which turns the estimator
into the classical linear regression estimator with an intercept.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .design import DesignSample
from .errors import (
    InvalidDistanceError,
    PreconditionError,
    SingularSubstitutionError,
    ZeroAuxiliaryError,
    check_denominator,
)

AUX_TOTAL = "aux_total"
WEIGHT_SUM = "weight_sum"


class ConstraintMode(Enum):
    AUX_ONLY = "aux_only"
    AUX_AND_WEIGHT_SUM = "aux_and_weight_sum"


@dataclass(frozen=True)
class CalibrationSpec:
    """Calibration target and tuning weights.

    ``q`` holds per-unit tuning weights (``q_i`` for GREG, ``q_i*`` for the
    weight-sum-preserving calibration). ``None`` means all ones.

    ``allow_nonpositive_q`` admits zero or negative GREG tuning weights, as
    produced by :func:`q_substitution`. The chi-square distance is then not
    defined and is reported as NaN.
    """

    aux_total: float
    q: tuple[float, ...] | None = None
    mode: ConstraintMode = ConstraintMode.AUX_ONLY
    allow_nonpositive_q: bool = False

    def __post_init__(self) -> None:
        if self.allow_nonpositive_q and self.mode is not ConstraintMode.AUX_ONLY:
            raise PreconditionError("nonpositive q is only meaningful for AUX_ONLY calibration")
        if self.q is not None:
            q = tuple(float(v) for v in np.ravel(self.q))
            if not all(np.isfinite(q)):
                raise PreconditionError("tuning weights q must be finite")
            if not self.allow_nonpositive_q and not all(v > 0.0 for v in q):
                raise PreconditionError("tuning weights q must be strictly positive")
            object.__setattr__(self, "q", q)

    def q_for(self, n: int) -> np.ndarray:
        if self.q is None:
            return np.ones(n)
        if len(self.q) != n:
            raise PreconditionError(f"q has length {len(self.q)}, sample has {n} units")
        return np.asarray(self.q, dtype=float)


@dataclass(frozen=True, eq=False)
class CalibratedWeights:
    w: np.ndarray
    satisfied: frozenset[str]
    slope: float
    distance: float

    @property
    def negative_count(self) -> int:
        """Number of negative weights (reported, never clamped)."""
        return int(np.sum(self.w < 0.0))


def chi_square_distance(w, d, q) -> float:
    """Chi-square distance ``sum (w - d)^2 / (d q)`` between weights and design weights."""
    w, d, q = (np.asarray(v, dtype=float) for v in (w, d, q))
    if not w.shape == d.shape == q.shape:
        raise InvalidDistanceError("w, d and q must have equal length")
    dq = d * q
    if np.any(dq <= 0.0):
        raise InvalidDistanceError("every d_i q_i must be positive")
    return float(np.sum((w - d) ** 2 / dq))


def _expect_mode(spec: CalibrationSpec, mode: ConstraintMode, origin: str) -> None:
    if spec.mode is not mode:
        raise PreconditionError(f"{origin} requires constraint mode {mode.name}, got {spec.mode.name}",
                                origin=origin)


def ds_slope(sample: DesignSample, q=None) -> float:
    """Through-origin slope ``sum d q x y / sum d q x^2``."""
    q = np.ones(sample.n) if q is None else np.asarray(q, dtype=float)
    dq = sample.d * q
    den = float(np.dot(dq, sample.x**2))
    check_denominator(den, den, "ds_slope")
    return float(np.dot(dq, sample.x * sample.y)) / den


def ols_slope(sample: DesignSample, q_star=None) -> float:
    """Weighted least-squares slope with intercept, weights ``d q*``."""
    q_star = np.ones(sample.n) if q_star is None else np.asarray(q_star, dtype=float)
    g = sample.d * q_star
    s0, sx, sy = g.sum(), np.dot(g, sample.x), np.dot(g, sample.y)
    sxx, sxy = np.dot(g, sample.x**2), np.dot(g, sample.x * sample.y)
    den = s0 * sxx - sx * sx
    check_denominator(den, s0 * sxx + sx * sx, "ols_slope")
    return float((s0 * sxy - sy * sx) / den)


def greg_weights(sample: DesignSample, spec: CalibrationSpec) -> CalibratedWeights:
    """GREG weights: minimal chi-square change subject to ``sum w x = X``.

    Raises :class:`~calweight.errors.SingularCalibrationError` when
    ``sum d q x^2`` vanishes (all ``x`` zero).
    """
    _expect_mode(spec, ConstraintMode.AUX_ONLY, "greg_weights")
    d, x = sample.d, sample.x
    q = spec.q_for(sample.n)
    dq = d * q
    den = float(np.dot(dq, x * x))
    check_denominator(den, float(np.dot(np.abs(dq), x * x)), "greg_weights")
    gap = spec.aux_total - float(np.dot(d, x))
    w = d + dq * x * (gap / den)
    slope = float(np.dot(dq, x * sample.y)) / den
    w.flags.writeable = False
    distance = chi_square_distance(w, d, q) if np.all(q > 0.0) else float("nan")
    return CalibratedWeights(w=w, satisfied=frozenset({AUX_TOTAL}), slope=slope,
                             distance=distance)


def greg_total(sample: DesignSample, spec: CalibrationSpec) -> tuple[float, float]:
    """GREG estimate of the total of ``y`` and the through-origin slope."""
    cw = greg_weights(sample, spec)
    return float(np.dot(cw.w, sample.y)), cw.slope


def q_substitution(sample: DesignSample, q_star) -> np.ndarray:
    """Tuning weights that turn GREG into the weight-sum-preserving calibration.

    Returns ``q_i = q*_i (sum d q* / sum d q* x - 1 / x_i)``. The result can
    contain zero or negative entries; it exists so the equivalence with
    :func:`lr_weights` can be checked.
    """
    q_star = np.asarray(q_star, dtype=float)
    x = sample.x
    if q_star.shape != x.shape:
        raise PreconditionError("q_star must have one entry per sample unit")
    if np.any(x == 0.0):
        raise ZeroAuxiliaryError("q substitution divides by x_i and some x_i is 0",
                                 origin="q_substitution")
    g = sample.d * q_star
    sx = float(np.dot(g, x))
    check_denominator(sx, float(np.dot(g, np.abs(x))), "q_substitution",
                      error=SingularSubstitutionError, what="sum d q* x")
    return q_star * (g.sum() / sx - 1.0 / x)


def lr_weights(sample: DesignSample, spec: CalibrationSpec) -> CalibratedWeights:
    """Weights matching both ``sum w x = X`` and ``sum w = sum d``.

    Computed from the closed form directly, so ``x_i = 0`` is allowed. Fails
    with :class:`~calweight.errors.SingularCalibrationError` when the weighted
    variance of ``x`` is zero.
    """
    _expect_mode(spec, ConstraintMode.AUX_AND_WEIGHT_SUM, "lr_weights")
    d, x, y = sample.d, sample.x, sample.y
    q = spec.q_for(sample.n)
    g = d * q
    s0, sx, sxx = float(g.sum()), float(np.dot(g, x)), float(np.dot(g, x * x))
    den = sxx * s0 - sx * sx
    check_denominator(den, sxx * s0 + sx * sx, "lr_weights")
    gap = spec.aux_total - float(np.dot(d, x))
    w = d + g * (x * s0 - sx) * (gap / den)
    slope = (s0 * float(np.dot(g, x * y)) - float(np.dot(g, y)) * sx) / den
    w.flags.writeable = False
    return CalibratedWeights(w=w, satisfied=frozenset({AUX_TOTAL, WEIGHT_SUM}),
                             slope=slope, distance=chi_square_distance(w, d, q))


def lr_total(sample: DesignSample, spec: CalibrationSpec) -> tuple[float, float]:
    """Linear regression estimate of the total of ``y`` and its slope."""
    cw = lr_weights(sample, spec)
    return float(np.dot(cw.w, sample.y)), cw.slope
