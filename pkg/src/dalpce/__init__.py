"""Domain-adaptive localized polynomial chaos expansion.

A surrogate of a black-box function on ``[0, 1]^M`` built from many
low-degree Legendre expansions, each living on one box of an adaptively
refined decomposition. Refinement and sampling are guided by a
variance-density criterion that balances exploitation and exploration.
"""

from .benchmarks import epsilon_error, get_case, global_pce_baseline
from .domain import Decomposition, SubDomain
from .errors import (BudgetExceeded, ConfigError, DalPceError, DegenerateEdge, DimensionMismatch,
                     DomainError, EmptyPool, LeverageOne, MissingPce, ModelEvaluationFailure,
                     RankDeficient, ZeroVariance)
from .learner import DalPceState, LearnerConfig, initialize, iterate, maybe_restart, resume, run
from .polybasis import BasisSet, Box, total_degree_basis
from .regression import lars_select, loo_error, ols_fit
from .serialize import load_decomposition, load_state, save_decomposition, save_state
from .surrogate import LocalPCE, fit_pce

__version__ = "0.1.0"

__all__ = [
    "BasisSet", "Box", "BudgetExceeded", "ConfigError", "DalPceError", "DalPceState",
    "Decomposition", "DegenerateEdge", "DimensionMismatch", "DomainError", "EmptyPool",
    "LearnerConfig", "LeverageOne", "LocalPCE", "MissingPce", "ModelEvaluationFailure",
    "RankDeficient", "SubDomain", "ZeroVariance", "epsilon_error", "fit_pce", "get_case",
    "global_pce_baseline", "initialize", "iterate", "lars_select", "load_decomposition",
    "load_state", "loo_error", "maybe_restart", "ols_fit", "resume", "run",
    "save_decomposition", "save_state", "total_degree_basis",
]
