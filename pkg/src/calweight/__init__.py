"""Calibration of survey design weights.

GREG and weight-sum-preserving (linear regression) calibration, calibrated
variance estimation, stratified analogues, and exact-enumeration / Monte
Carlo efficiency harnesses.
"""

from ._core import BACKEND
from .calibrate import (
    CalibratedWeights,
    CalibrationSpec,
    ConstraintMode,
    chi_square_distance,
    greg_total,
    greg_weights,
    lr_total,
    lr_weights,
    q_substitution,
)
from .design import (
    DesignSample,
    FinitePopulation,
    SrsworDesign,
    enumerate_srswor,
    ht_total,
    make_srswor_sample,
    read_population,
)
from .errors import SurveyError

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CalibratedWeights",
    "CalibrationSpec",
    "ConstraintMode",
    "DesignSample",
    "FinitePopulation",
    "SrsworDesign",
    "SurveyError",
    "chi_square_distance",
    "enumerate_srswor",
    "greg_total",
    "greg_weights",
    "ht_total",
    "lr_total",
    "lr_weights",
    "make_srswor_sample",
    "q_substitution",
    "read_population",
]
