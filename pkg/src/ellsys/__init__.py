"""Finite-element toolkit for coupled semilinear elliptic systems with
nonlinear boundary conditions.

The package computes minimal and maximal solutions between an ordered
sub-/supersolution pair by monotone fixed-point iteration, handles
nonmonotone reaction terms through an increasing chain of subsolutions,
and can construct the ordered bracket automatically from Steklov-type
eigenpairs for cross-coupled sublinear systems.
"""

from .errors import (
    ConfigError,
    ConstructionError,
    ConvergenceError,
    EllsysError,
    EvalError,
    InvariantViolation,
    ParseError,
    ThresholdError,
)

__version__ = "0.1.0"

__all__ = [
    "EllsysError",
    "ParseError",
    "EvalError",
    "ConfigError",
    "ConstructionError",
    "ThresholdError",
    "ConvergenceError",
    "InvariantViolation",
    "__version__",
]
