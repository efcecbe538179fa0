"""Analytic and simulated peak age of information in large uplink networks."""

from .coupler import EquilibriumSolution, FixedPointConfig, multi_start, solve, sweep_point
from .errors import DegenerateDistribution, NumericError, ParameterError, UnsupportedCase
from .macro import (MacroParams, MetaMoments, QoSClassTable, db_to_linear, linear_to_db,
                    meta_ccdf, meta_ccdf_curve, moments, quantize)
from .microq import UNBOUNDED, ArrivalSpec, class_stats, peak_aoi, sojourn_pmf, steady_state

__version__ = "0.1.0"
