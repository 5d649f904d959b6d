"""Numerical laboratory for operator semigroups generated by matrices."""

from .operators import (OperatorError, OperatorHandle, builtin_operators, dissipative_operators,
                        estimate_growth_envelope, make_operator, operator_norm, spectrum)
from .reports import CheckReport, ConvergenceTable
from .resolvent import ShiftError
from .semigroup import expm_oracle

__version__ = "0.1.0"

__all__ = [
    "CheckReport", "ConvergenceTable", "OperatorError", "OperatorHandle", "ShiftError",
    "builtin_operators", "dissipative_operators", "estimate_growth_envelope", "expm_oracle",
    "make_operator", "operator_norm", "spectrum",
]
