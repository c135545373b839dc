"""Stratified SRSWOR estimation with calibrated stratum weights.

Stratum weights ``W_h = N_h / N`` are calibrated so the weighted stratum
means of ``x`` hit the known population mean. With the weight sum held fixed
as well, the result is the combined linear regression estimator. The
variance estimators reweight per-stratum residual variances in the same way.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from os import PathLike
from typing import Sequence

import numpy as np

from .design import read_rows
from .errors import (
    InsufficientStratumError,
    ParseError,
    PreconditionError,
    check_denominator,
)


@dataclass(frozen=True, eq=False)
class Stratum:
    label: str
    N: int
    y: np.ndarray
    x: np.ndarray

    def __post_init__(self) -> None:
        y = np.array(self.y, dtype=float)
        x = np.array(self.x, dtype=float)
        if y.ndim != 1 or y.shape != x.shape:
            raise PreconditionError(f"stratum {self.label!r}: y and x must have equal length")
        if y.size < 2:
            raise InsufficientStratumError(
                f"stratum {self.label!r} has n_h={y.size}; at least 2 units are needed")
        if y.size > self.N:
            raise PreconditionError(f"stratum {self.label!r}: n_h={y.size} exceeds N_h={self.N}")
        y.flags.writeable = False
        x.flags.writeable = False
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return int(self.y.size)


@dataclass(frozen=True, eq=False)
class StratifiedSample:
    """Per-stratum samples with the usual derived summaries as arrays over strata."""

    strata: tuple[Stratum, ...]
    N: int = field(init=False)
    W: np.ndarray = field(init=False)
    f: np.ndarray = field(init=False)
    n: np.ndarray = field(init=False)
    ybar: np.ndarray = field(init=False)
    xbar: np.ndarray = field(init=False)
    s2x: np.ndarray = field(init=False)
    s2y: np.ndarray = field(init=False)
    sxy: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        strata = tuple(self.strata)
        if not strata:
            raise PreconditionError("a stratified sample needs at least one stratum")
        labels = [s.label for s in strata]
        if len(set(labels)) != len(labels):
            raise PreconditionError("stratum labels must be unique")
        Nh = np.array([s.N for s in strata], dtype=float)
        N = int(Nh.sum())
        nh = np.array([s.n for s in strata], dtype=float)
        derived = {
            "strata": strata,
            "N": N,
            "W": Nh / N,
            "f": nh / Nh,
            "n": nh,
            "ybar": np.array([s.y.mean() for s in strata]),
            "xbar": np.array([s.x.mean() for s in strata]),
            "s2x": np.array([np.var(s.x, ddof=1) for s in strata]),
            "s2y": np.array([np.var(s.y, ddof=1) for s in strata]),
            "sxy": np.array([np.cov(s.x, s.y, ddof=1)[0, 1] for s in strata]),
        }
        for name, value in derived.items():
            if isinstance(value, np.ndarray):
                value.flags.writeable = False
            object.__setattr__(self, name, value)

    @property
    def L(self) -> int:
        return len(self.strata)

    @property
    def D(self) -> np.ndarray:
        """``W_h^2 (1 - f_h) / n_h``, the per-stratum variance factors."""
        return self.W**2 * (1.0 - self.f) / self.n


@dataclass(frozen=True, eq=False)
class StratumCalibration:
    W0: np.ndarray
    Q: np.ndarray
    beta_st: float


def _tuning(Q, L: int) -> np.ndarray:
    if Q is None:
        return np.ones(L)
    Q = np.asarray(Q, dtype=float)
    if Q.ndim == 0:
        Q = np.full(L, float(Q))
    if Q.shape != (L,):
        raise PreconditionError(f"expected {L} stratum tuning weights, got shape {Q.shape}")
    if np.any(Q <= 0.0):
        raise PreconditionError("stratum tuning weights must be positive")
    return Q


def stratified_mean(s: StratifiedSample) -> float:
    """The usual stratified mean ``sum W_h ybar_h``."""
    return float(np.dot(s.W, s.ybar))


def shy_weights(s: StratifiedSample, Q=None, Xbar: float = 0.0) -> StratumCalibration:
    """Stratum weights calibrated on ``sum W* xbar = Xbar`` only."""
    Q = _tuning(Q, s.L)
    g = s.W * Q
    den = float(np.dot(g, s.xbar**2))
    check_denominator(den, den, "shy_weights")
    W0 = s.W + g * s.xbar * ((Xbar - float(np.dot(s.W, s.xbar))) / den)
    return StratumCalibration(W0=W0, Q=Q, beta_st=float(np.dot(g, s.xbar * s.ybar)) / den)


def shy_calibrated_mean(s: StratifiedSample, Q=None, Xbar: float = 0.0) -> float:
    """Combined regression-type mean from single-constraint stratum calibration."""
    Q = _tuning(Q, s.L)
    g = s.W * Q
    den = float(np.dot(g, s.xbar**2))
    check_denominator(den, den, "shy_calibrated_mean")
    slope = float(np.dot(g, s.xbar * s.ybar)) / den
    return stratified_mean(s) + slope * (Xbar - float(np.dot(s.W, s.xbar)))


def combined_lr_mean(s: StratifiedSample, Q0=None,
                     Xbar: float = 0.0) -> tuple[float, StratumCalibration]:
    """Combined linear regression mean from two-constraint stratum calibration.

    The calibrated weights ``W0`` reproduce ``Xbar`` and keep ``sum W0 = sum W``.
    With unit tuning weights this is the textbook combined regression
    estimator whose slope regresses stratum means ``ybar_h`` on ``xbar_h``
    with weights ``W_h``.
    """
    Q0 = _tuning(Q0, s.L)
    g = s.W * Q0
    s0 = float(g.sum())
    # centred moments: same algebra as the raw form, without its cancellation
    cx = s.xbar - float(np.dot(g, s.xbar)) / s0
    cy = s.ybar - float(np.dot(g, s.ybar)) / s0
    den = float(np.dot(g, cx * cx))
    check_denominator(den, float(np.dot(g, s.xbar**2)) + float(np.dot(g, s.xbar)) ** 2 / s0,
                      "combined_lr_mean")
    gap = Xbar - float(np.dot(s.W, s.xbar))
    W0 = s.W + g * cx * (gap / den)
    beta = float(np.dot(g, cx * cy)) / den
    W0.flags.writeable = False
    mean = stratified_mean(s) + beta * gap
    return mean, StratumCalibration(W0=W0, Q=Q0, beta_st=beta)


def combined_regression_slope(s: StratifiedSample) -> float:
    """Pooled slope ``sum D_h s_hxy / sum D_h s_hx^2`` used for stratum residuals."""
    D = s.D
    den = float(np.dot(D, s.s2x))
    check_denominator(den, den, "combined_regression_slope")
    return float(np.dot(D, s.sxy)) / den


def stratum_residual_variances(s: StratifiedSample, b_st: float) -> np.ndarray:
    """``s^2_{e*h}`` for residuals ``(y - ybar_h) - b_st (x - xbar_h)``."""
    out = np.empty(s.L)
    for h, st in enumerate(s.strata):
        e = (st.y - st.y.mean()) - b_st * (st.x - st.x.mean())
        out[h] = float(np.sum(e * e)) / (st.n - 1)
    return out


def x_mean_variance(s: StratifiedSample, S2hx: Sequence[float]) -> float:
    """Variance of the stratified x mean, ``sum D_h S_hx^2``, from population variances."""
    S2hx = np.asarray(S2hx, dtype=float)
    if S2hx.shape != (s.L,):
        raise PreconditionError(f"expected {s.L} stratum x-variances")
    return float(np.dot(s.D, S2hx))


def _check_strata(s: StratifiedSample, origin: str) -> None:
    if np.any(s.n < 2):
        raise InsufficientStratumError("every stratum needs n_h >= 2", origin=origin)


def combined_lr_variance(s: StratifiedSample, calib: StratumCalibration,
                         b_st: float | None = None) -> float:
    """``sum D_h (W0_h / W_h)^2 s^2_{e*h}``; with ``W0 = W`` the classical estimator."""
    _check_strata(s, "combined_lr_variance")
    b_st = combined_regression_slope(s) if b_st is None else b_st
    ratio = (np.asarray(calib.W0) / s.W) ** 2
    return float(np.sum(s.D * ratio * stratum_residual_variances(s, b_st)))


def variance_stratum_weights(s: StratifiedSample, Q0=None, known_Vx: float = 0.0) -> np.ndarray:
    """Stratum variance factors ``D_h`` calibrated on the known variance of the x mean.

    The result keeps ``sum Omega = sum D`` and satisfies ``sum Omega s_hx^2 = known_Vx``.
    """
    Q0 = _tuning(Q0, s.L)
    D = s.D
    g = D * Q0
    s0, s1, s2 = float(g.sum()), float(np.dot(g, s.s2x)), float(np.dot(g, s.s2x**2))
    den = s0 * s2 - s1 * s1
    check_denominator(den, s0 * s2 + s1 * s1, "variance_stratum_weights")
    gap = known_Vx - float(np.dot(D, s.s2x))
    return D + (g * s.s2x * s0 - g * s1) * (gap / den)


def calibrated_combined_variance(s: StratifiedSample, calib: StratumCalibration,
                                 b_st: float | None = None, Q0=None,
                                 known_Vx: float = 0.0) -> tuple[float, float]:
    """Calibrated variance estimate of the combined regression mean.

    Returns ``(estimate, B)`` with
    ``estimate = combined_lr_variance + B * (known_Vx - v_hat_x)`` where
    ``v_hat_x = sum D_h s_hx^2``. Equivalently ``estimate`` is
    ``sum Omega_h (W0_h / W_h)^2 s^2_{e*h}`` with the weights from
    :func:`variance_stratum_weights`.
    """
    origin = "calibrated_combined_variance"
    _check_strata(s, origin)
    Q0 = _tuning(Q0, s.L)
    b_st = combined_regression_slope(s) if b_st is None else b_st
    D = s.D
    g = D * Q0
    s0, s1, s2 = float(g.sum()), float(np.dot(g, s.s2x)), float(np.dot(g, s.s2x**2))
    den = s0 * s2 - s1 * s1
    check_denominator(den, s0 * s2 + s1 * s1, origin)
    term = (np.asarray(calib.W0) / s.W) ** 2 * stratum_residual_variances(s, b_st)
    B = (float(np.dot(g * s.s2x, term)) * s0 - float(np.dot(g, term)) * s1) / den
    v_hat_x = float(np.dot(D, s.s2x))
    return combined_lr_variance(s, calib, b_st) + B * (known_Vx - v_hat_x), B


# -- input -----------------------------------------------------------------------


def read_stratum_sizes(path: str | PathLike, section: str = "sizes") -> dict[str, int]:
    """Read ``label = N_h`` entries from the ``[sizes]`` section of an INI file."""
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keep label case
    with open(path, encoding="utf-8") as fh:
        try:
            cp.read_file(fh)
        except configparser.Error as exc:
            raise ParseError(str(exc).splitlines()[0], line=getattr(exc, "lineno", 1) or 1,
                             path=str(path)) from None
    if not cp.has_section(section):
        raise ParseError(f"missing [{section}] section", line=1, path=str(path))
    sizes = {}
    for label, raw in cp.items(section):
        try:
            sizes[label] = int(raw)
        except ValueError:
            raise ParseError(f"stratum size for {label!r} is not an integer: {raw!r}",
                             line=1, path=str(path)) from None
    return sizes


def read_stratified(path: str | PathLike, sizes: dict[str, int] | str | PathLike,
                    delimiter: str = ",") -> StratifiedSample:
    """Load ``label, y, x`` rows and stratum sizes into a :class:`StratifiedSample`.

    Strata keep the order of first appearance in the data file.
    """
    if not isinstance(sizes, dict):
        sizes = read_stratum_sizes(sizes)
    rows = read_rows(path, 3, delimiter, numeric=(False, True, True))
    groups: dict[str, list[tuple[float, float]]] = {}
    for label, y, x in rows:
        groups.setdefault(label, []).append((y, x))
    strata = []
    for label, units in groups.items():
        if label not in sizes:
            raise PreconditionError(f"no population size given for stratum {label!r}")
        arr = np.array(units)
        strata.append(Stratum(label, sizes[label], arr[:, 0], arr[:, 1]))
    return StratifiedSample(tuple(strata))
