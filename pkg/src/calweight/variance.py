"""Design-based variance estimators for the calibrated totals.

Pairwise sums run over ordered pairs ``i != j`` with a leading factor 1/2,
which is the same as summing each unordered pair once.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .calibrate import CalibratedWeights, ds_slope
from .design import DesignSample, FinitePopulation, SrsworDesign
from .errors import (
    IncompleteDesignError,
    PairDegeneracyError,
    PreconditionError,
    SingularMomentError,
    SingularPairCalibrationError,
    WrongResidualError,
    check_denominator,
)


class ResidualKind(Enum):
    THROUGH_ORIGIN = "through_origin"
    WITH_INTERCEPT = "with_intercept"
    RAW_Y = "raw_y"


@dataclass(frozen=True, eq=False)
class ResidualSet:
    e: np.ndarray
    kind: ResidualKind


class PairMode(Enum):
    """How the pair tuning weights enter the variance calibration.

    RAW uses ``q_ij`` as given (only the variance constraint is imposed);
    TRANSFORMED rescales them so the pair weights also keep their sum.
    """

    RAW = "raw"
    TRANSFORMED = "transformed"


@dataclass(frozen=True)
class PairRecord:
    Dij: float
    Qij: float
    Omegaij: float


@dataclass(frozen=True, eq=False)
class PairWeightSet:
    """Symmetric ``n x n`` pair weights; diagonals are unused and held at 0."""

    D: np.ndarray
    Q: np.ndarray
    Omega: np.ndarray
    delta: np.ndarray
    mode: PairMode

    def __getitem__(self, ij: tuple[int, int]) -> PairRecord:
        i, j = ij
        if i == j:
            raise KeyError("pair weights are defined for i != j only")
        return PairRecord(float(self.D[i, j]), float(self.Q[i, j]), float(self.Omega[i, j]))

    def pairs(self):
        """Yield ``((i, j), record)`` for every ordered pair."""
        n = self.D.shape[0]
        for i in range(n):
            for j in range(n):
                if i != j:
                    yield (i, j), self[i, j]


def _offdiag(a: np.ndarray) -> np.ndarray:
    return a[~np.eye(a.shape[0], dtype=bool)]


def _half_pair_sum(m: np.ndarray) -> float:
    return 0.5 * float(np.sum(_offdiag(m)))


def _pair_sum(m: np.ndarray) -> float:
    return float(np.sum(_offdiag(m)))


def _sq_diff(a: np.ndarray) -> np.ndarray:
    return np.subtract.outer(a, a) ** 2


def _design_pair_weights(sample: DesignSample, origin: str) -> np.ndarray:
    D = sample.pair_weights()
    if np.any(np.isnan(_offdiag(D))):
        raise IncompleteDesignError("joint inclusion probability missing for a sample pair",
                                    origin=origin)
    return D


def _weights_array(weights) -> np.ndarray:
    if isinstance(weights, CalibratedWeights):
        return weights.w
    return np.asarray(weights, dtype=float)


# -- residuals -------------------------------------------------------------------


def residuals_through_origin(sample: DesignSample, q=None) -> ResidualSet:
    """Residuals ``y - b x`` with the through-origin GREG slope."""
    b = ds_slope(sample, q)
    return ResidualSet(sample.y - b * sample.x, ResidualKind.THROUGH_ORIGIN)


def residuals_with_intercept(sample: DesignSample, q_star=None) -> ResidualSet:
    """Residuals of the ``d q*``-weighted least-squares line with intercept."""
    q_star = np.ones(sample.n) if q_star is None else np.asarray(q_star, dtype=float)
    g = sample.d * q_star
    x, y = sample.x, sample.y
    xm = np.dot(g, x) / g.sum()
    ym = np.dot(g, y) / g.sum()
    sxx = float(np.dot(g, (x - xm) ** 2))
    check_denominator(sxx, float(np.dot(g, x * x)), "residuals_with_intercept")
    beta = float(np.dot(g, (x - xm) * (y - ym))) / sxx
    return ResidualSet(y - ym - beta * (x - xm), ResidualKind.WITH_INTERCEPT)


def raw_y_residuals(sample: DesignSample) -> ResidualSet:
    return ResidualSet(np.array(sample.y), ResidualKind.RAW_Y)


# -- Sen-Yates-Grundy ------------------------------------------------------------


def syg_variance_estimate(sample: DesignSample, z) -> float:
    """Sen-Yates-Grundy estimate of the variance of the HT total of ``z``."""
    D = _design_pair_weights(sample, "syg_variance_estimate")
    dz = sample.d * np.asarray(z, dtype=float)
    return _half_pair_sum(D * _sq_diff(dz))


def syg_true_variance(pop: FinitePopulation, design: SrsworDesign, z=None) -> float:
    """Design variance of the HT total of ``z`` (default: the population ``x``).

    This is the population-level Sen-Yates-Grundy sum
    ``1/2 sum_{i != j} (pi_i pi_j - pi_ij) (d_i z_i - d_j z_j)^2``. Under
    SRSWOR every pair shares the same factor, and the pairwise sum
    ``sum_{i != j} (z_i - z_j)^2`` is ``2 N sum (z - mean z)^2``.
    """
    if design.N != pop.N:
        raise PreconditionError(f"design N={design.N} does not match population N={pop.N}")
    z = pop.x if z is None else np.asarray(z, dtype=float)
    if z.shape != (pop.N,):
        raise PreconditionError("z must have one value per population unit")
    coef = design.pi**2 - design.pi_joint
    d = 1.0 / design.pi
    pairs = 2.0 * pop.N * float(np.sum((z - z.mean()) ** 2))
    return 0.5 * coef * d * d * pairs


# -- calibrated-total variance estimators ---------------------------------------


def ds_variance_estimate(sample: DesignSample, weights, residuals: ResidualSet) -> float:
    """Deville-Sarndal variance estimate of the GREG total."""
    if residuals.kind is not ResidualKind.THROUGH_ORIGIN:
        raise WrongResidualError(f"expected through-origin residuals, got {residuals.kind.name}",
                                 origin="ds_variance_estimate")
    D = _design_pair_weights(sample, "ds_variance_estimate")
    return _half_pair_sum(D * _sq_diff(_weights_array(weights) * residuals.e))


def _phi(weights, residuals: ResidualSet, origin: str) -> np.ndarray:
    if residuals.kind is ResidualKind.THROUGH_ORIGIN:
        raise WrongResidualError("expected intercept-model (or raw y) residuals", origin=origin)
    return _sq_diff(_weights_array(weights) * residuals.e)


def singh_horn_yu_variance(sample: DesignSample, weights, residuals: ResidualSet) -> float:
    """Variance estimate of the linear regression total.

    ``weights`` are the weight-sum-preserving weights (or plain design
    weights), ``residuals`` the intercept-model residuals or raw ``y``.
    """
    D = _design_pair_weights(sample, "singh_horn_yu_variance")
    return _half_pair_sum(D * _phi(weights, residuals, "singh_horn_yu_variance"))


def _pair_q(qij, n: int) -> np.ndarray:
    if qij is None:
        return np.ones((n, n))
    q = np.asarray(qij, dtype=float)
    if q.ndim == 0:
        return np.full((n, n), float(q))
    if q.shape != (n, n) or not np.allclose(q, q.T, rtol=0, atol=0):
        raise PreconditionError(f"qij must be a scalar or a symmetric {n}x{n} matrix")
    return q


def calibrate_pair_weights(sample: DesignSample, qij=None, known_V: float = 0.0,
                           mode: PairMode = PairMode.TRANSFORMED) -> PairWeightSet:
    """Calibrate the pair weights ``D_ij`` to reproduce a known variance of ``x``.

    The returned ``Omega_ij`` minimise the pairwise chi-square distance to
    ``D_ij`` subject to ``1/2 sum Omega_ij delta_ij = known_V``, where
    ``delta_ij = (d_i x_i - d_j x_j)^2`` and ``known_V`` is the true variance
    of the HT estimator of the ``x`` total. In TRANSFORMED mode the tuning
    weights are rescaled so that ``sum Omega_ij = sum D_ij`` also holds.
    """
    origin = "calibrate_pair_weights"
    n = sample.n
    D = _design_pair_weights(sample, origin)
    q = _pair_q(qij, n)
    delta = _sq_diff(sample.d * sample.x)
    off = ~np.eye(n, dtype=bool)
    if mode is PairMode.TRANSFORMED:
        if np.any(delta[off] == 0.0):
            raise PairDegeneracyError("a sample pair has d_i x_i == d_j x_j", origin=origin)
        s_dq = _pair_sum(D * q)
        s_dqd = _pair_sum(D * q * delta)
        check_denominator(s_dqd, s_dqd, origin, error=SingularPairCalibrationError,
                          what="sum D q delta")
        Q = np.zeros((n, n))
        Q[off] = q[off] * (s_dq / s_dqd - 1.0 / delta[off])
        # sum D Q* delta^2 rewritten to keep its cancellation explicit
        s_dqd2 = _pair_sum(D * q * delta**2)
        den = (s_dq * s_dqd2 - s_dqd**2) / s_dqd
        check_denominator(den, (s_dq * s_dqd2 + s_dqd**2) / s_dqd, origin,
                          error=SingularPairCalibrationError, what="sum D Q* delta^2")
    else:
        Q = np.where(off, q, 0.0)
        den = _pair_sum(D * Q * delta**2)
        check_denominator(den, _pair_sum(np.abs(D * Q) * delta**2), origin,
                          error=SingularPairCalibrationError, what="sum D Q delta^2")
    v_hat = _half_pair_sum(D * delta)
    Omega = D + 2.0 * D * Q * delta * ((known_V - v_hat) / den)
    np.fill_diagonal(Omega, 0.0)
    for a in (D, Q, Omega, delta):
        a.flags.writeable = False
    return PairWeightSet(D=D, Q=Q, Omega=Omega, delta=delta, mode=mode)


def calibrated_lr_variance(sample: DesignSample, weights, residuals: ResidualSet,
                           qij=None, known_V: float = 0.0) -> tuple[float, float]:
    """Calibrated variance estimate of the linear regression total.

    Returns ``(estimate, B2)`` where
    ``estimate = V_s + B2 * (known_V - V_syg_hat)``, ``V_s`` is
    :func:`singh_horn_yu_variance` and ``V_syg_hat`` the Sen-Yates-Grundy
    estimate for ``x``. ``B2`` is the ``D q``-weighted regression slope of
    ``Phi_ij`` on ``delta_ij`` over sample pairs.
    """
    origin = "calibrated_lr_variance"
    n = sample.n
    D = _design_pair_weights(sample, origin)
    phi = _phi(weights, residuals, origin)
    q = _pair_q(qij, n)
    delta = _sq_diff(sample.d * sample.x)
    if np.any(_offdiag(delta) == 0.0):
        raise PairDegeneracyError("a sample pair has d_i x_i == d_j x_j", origin=origin)
    g = D * q
    s_g = _pair_sum(g)
    s_gd = _pair_sum(g * delta)
    s_gd2 = _pair_sum(g * delta**2)
    s_gdp = _pair_sum(g * delta * phi)
    s_gp = _pair_sum(g * phi)
    den = s_gd2 * s_g - s_gd**2
    check_denominator(den, s_gd2 * s_g + s_gd**2, origin,
                      error=SingularPairCalibrationError, what="pair regression denominator")
    b2 = (s_gdp * s_g - s_gd * s_gp) / den
    v_s = _half_pair_sum(D * phi)
    v_hat = _half_pair_sum(D * delta)
    return v_s + b2 * (known_V - v_hat), b2


def pair_weighted_variance(pairs: PairWeightSet, weights, residuals: ResidualSet) -> float:
    """``1/2 sum Omega_ij Phi_ij`` for already calibrated pair weights."""
    return _half_pair_sum(pairs.Omega * _phi(weights, residuals, "pair_weighted_variance"))


def das_tripathi_variance(sample: DesignSample, pop_x_variance: float) -> float:
    """Regression-type estimate of the finite-population variance of ``y``.

    ``s_y^2 + b (S_x^2 - s_x^2)`` with the fourth-moment slope
    ``b = (m22 - m20 m02) / (m04 - m02^2)``, where
    ``m_rs = sum (y - ybar)^r (x - xbar)^s / (n - 1)`` and ``S_x^2`` is the
    known population variance of ``x`` (divisor ``N - 1``).
    """
    n = sample.n
    if n < 3:
        raise PreconditionError(f"need n >= 3, got {n}", origin="das_tripathi_variance")
    if np.ptp(sample.pi_first) != 0.0:
        raise PreconditionError("expects an equal-probability (SRSWOR) sample",
                                origin="das_tripathi_variance")
    a = sample.y - sample.y.mean()
    b = sample.x - sample.x.mean()

    def m(r: int, s: int) -> float:
        return float(np.sum(a**r * b**s)) / (n - 1)

    m02, m20 = m(0, 2), m(2, 0)
    den = m(0, 4) - m02**2
    check_denominator(den, m(0, 4) + m02**2, "das_tripathi_variance",
                      error=SingularMomentError, what="fourth-moment denominator")
    beta2 = (m(2, 2) - m20 * m02) / den
    return m20 + beta2 * (pop_x_variance - m02)
