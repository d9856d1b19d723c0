"""Proximal online gradient under a weighted path-length budget, with the
matching Rademacher lower-bound game, an offline comparator oracle and
numerical checks of the supporting inequalities."""

from .core import (
    ComparatorSequence,
    DomainSpec,
    DynamicsBudget,
    DynRegError,
    InvalidParameter,
    InvariantViolation,
    LossFunction,
    NumericalFailure,
    RegretReport,
    ShiftBudget,
    Trajectory,
    dynamic_regret,
    shifting_regret,
    static_regret,
    weighted_path_length,
)
from .prox import Regularizer, prox
from .pog import ProximalOnlineGradient, Schedule, run_pog, schedule_corollary1, schedule_corollary2

__version__ = "0.1.0"
