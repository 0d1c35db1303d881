"""Data-driven LQR gains from input/output impulse data, with mode-based transfer
from source systems to a sparsely sampled target."""

from .blocks import ImpulseTrajectory, build_E, build_hankel, build_M_stack, build_S
from .ddlqr import (CharPoly, HistoryWindow, OutputFeedbackGain, control_step,
                    convergence_curve, data_driven_gain, estimate_alpha, run_closed_loop)
from .errors import *  # noqa: F401,F403
from .lti import (CostSpec, StateSpaceModel, evaluate_cost, impulse_response, model_output_gain,
                  simulate, solve_riccati)
from .modes import (ModeDictionary, ModeSet, build_dictionary, reconstruct_markov, residual_Z,
                    select_modes, solve_W, transfer_pipeline)

__all__ = [
    "ImpulseTrajectory", "build_E", "build_hankel", "build_M_stack", "build_S",
    "CharPoly", "HistoryWindow", "OutputFeedbackGain", "control_step", "convergence_curve",
    "data_driven_gain", "estimate_alpha", "run_closed_loop",
    "CostSpec", "StateSpaceModel", "evaluate_cost", "impulse_response", "model_output_gain",
    "simulate", "solve_riccati",
    "ModeDictionary", "ModeSet", "build_dictionary", "reconstruct_markov", "residual_Z",
    "select_modes", "solve_W", "transfer_pipeline",
]
