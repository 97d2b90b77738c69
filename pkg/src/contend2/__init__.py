# contend2 - optimal two-device contention resolution: evaluators, protocols, optimizer and simulator

from importlib.metadata import version

from .analytic import CostReport, Method, evaluate_all, expected_avg, expected_cost, expected_max, expected_min, markov_oracle
from .config import AppConfig, ConfigManager
from .core import ChannelResponse, History, MassSequence, Objective, ProbSequence, masses_to_probs, probs_to_masses
from .policy import ConstantPolicy, HistoryPolicy, RecurrentPolicy, recurrent_to_history_policy
from .protocols import optimal_avg_protocol, optimal_max_protocol, optimal_min_protocol

try:
    __version__ = version("contend2")
except Exception:
    __version__ = "unknown"

__all__ = [
    "AppConfig",
    "ChannelResponse",
    "ConfigManager",
    "ConstantPolicy",
    "CostReport",
    "History",
    "HistoryPolicy",
    "MassSequence",
    "Method",
    "Objective",
    "ProbSequence",
    "RecurrentPolicy",
    "evaluate_all",
    "expected_avg",
    "expected_cost",
    "expected_max",
    "expected_min",
    "markov_oracle",
    "masses_to_probs",
    "optimal_avg_protocol",
    "optimal_max_protocol",
    "optimal_min_protocol",
    "probs_to_masses",
    "recurrent_to_history_policy",
]
