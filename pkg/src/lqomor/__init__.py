"""Structure-preserving H2 model reduction for linear systems with quadratic output."""
from .baselines import bt_reduce, krylov_reduce
from .estimators import BalancedTruncationReducer, GaaiReducer, KrylovReducer, SrcgReducer
from .gaai import GaaiConfig, run_gaai
from .laguerre import LaguerreApprox, LaguerreConfig
from .lqo import LqoSystem, ReducedLqo, cost_j, h2_error, h2_norm, petrov_galerkin
from .simbench import ExperimentConfig, gen_random_system, run_experiment, simulate
from .srcg import SrcgConfig, run_srcg

__version__ = "0.1.0"

__all__ = [
    "LqoSystem",
    "ReducedLqo",
    "cost_j",
    "h2_error",
    "h2_norm",
    "petrov_galerkin",
    "krylov_reduce",
    "bt_reduce",
    "GaaiConfig",
    "run_gaai",
    "SrcgConfig",
    "run_srcg",
    "LaguerreConfig",
    "LaguerreApprox",
    "ExperimentConfig",
    "gen_random_system",
    "run_experiment",
    "simulate",
    "KrylovReducer",
    "BalancedTruncationReducer",
    "GaaiReducer",
    "SrcgReducer",
]
