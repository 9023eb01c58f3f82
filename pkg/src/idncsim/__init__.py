"""Completion-time IDNC scheduling over Gilbert-Elliott channels."""
from .gec import GecParams, average_erasure, conditional_erasure_belief, steady_state
from .kernels import BACKEND
from .session import SessionConfig, run_initial_phase
from .solvers import BpsoParams, Solver
from .experiment import ExperimentConfig, run_experiment, sweep

__version__ = "0.1.0"
__all__ = [
    "BACKEND", "BpsoParams", "ExperimentConfig", "GecParams", "SessionConfig", "Solver",
    "average_erasure", "conditional_erasure_belief", "run_experiment", "run_initial_phase",
    "steady_state", "sweep",
]
