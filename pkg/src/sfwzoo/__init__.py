"""Stochastic Frank-Wolfe methods with variance reduction, coordinate and compressed estimators."""
from .core import METHODS, MethodConstants, SFWError, ValidationError, constants_for
from .driver import Schedule, Trace, fw_gap, fw_step, run, run_fw, schedule_convex, schedule_nonconvex
from .kernels import BACKEND
from .objective import Dataset, LogisticObjective, Partition, parse_libsvm
from .sets import L1Ball

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Dataset",
    "L1Ball",
    "LogisticObjective",
    "METHODS",
    "MethodConstants",
    "Partition",
    "SFWError",
    "Schedule",
    "Trace",
    "ValidationError",
    "constants_for",
    "fw_gap",
    "fw_step",
    "parse_libsvm",
    "run",
    "run_fw",
    "schedule_convex",
    "schedule_nonconvex",
]
