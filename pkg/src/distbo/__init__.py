"""Fully distributed Bayesian optimization with stochastic query policies.

Independent nodes keep their own GP surrogate, draw queries from a
Boltzmann (softmax) distribution over the acquisition surface, and share
nothing but broadcast (x, y) records, so the fleet needs no coordinator
and tolerates asynchrony, loss, and mid-run scale-up.
"""

from .acquisition import AcquisitionKind, AcquisitionSpec, Incumbent, incumbent_of
from .errors import ConfigurationError, NumericalFailure, ProtocolViolation, UnsupportedMetric
from .kernels import KernelFamily, KernelSpec, kernel_eval, kernel_gram
from .netsim import NetMode, NetworkConfig, RunTrace, quiesce, run
from .node import BroadcastMessage, Node, NodeConfig, init_design, join
from .objectives import Objective, get_objective, immediate_regret, list_objectives
from .policy import (
    GreedyPolicy,
    MHConfig,
    MHInit,
    ScheduleMode,
    StochasticPolicy,
    TemperatureSchedule,
    ThompsonPolicy,
    boltzmann_sample,
    glie_beta,
    greedy_argmax,
    thompson_select,
)
from .space import Box, make_ld_table
from .surrogate import (
    Dataset,
    FitConfig,
    GPModel,
    ObservationRecord,
    build_model,
    fit_hyperparameters,
    log_marginal_likelihood,
    posterior,
    posterior_sample_at,
    sample_objective,
)

__version__ = "0.1.0"

__all__ = [
    "AcquisitionKind",
    "AcquisitionSpec",
    "Box",
    "BroadcastMessage",
    "ConfigurationError",
    "Dataset",
    "FitConfig",
    "GPModel",
    "GreedyPolicy",
    "Incumbent",
    "KernelFamily",
    "KernelSpec",
    "MHConfig",
    "MHInit",
    "NetMode",
    "NetworkConfig",
    "Node",
    "NodeConfig",
    "NumericalFailure",
    "Objective",
    "ObservationRecord",
    "ProtocolViolation",
    "RunTrace",
    "ScheduleMode",
    "StochasticPolicy",
    "TemperatureSchedule",
    "ThompsonPolicy",
    "UnsupportedMetric",
    "boltzmann_sample",
    "build_model",
    "fit_hyperparameters",
    "get_objective",
    "glie_beta",
    "greedy_argmax",
    "immediate_regret",
    "incumbent_of",
    "init_design",
    "join",
    "kernel_eval",
    "kernel_gram",
    "list_objectives",
    "log_marginal_likelihood",
    "make_ld_table",
    "posterior",
    "posterior_sample_at",
    "quiesce",
    "run",
    "sample_objective",
    "thompson_select",
]
