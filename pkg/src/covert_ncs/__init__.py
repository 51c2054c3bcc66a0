"""Covert attacks on networked control systems: simulation, identification, attack design."""
from .lti import TransferFunction, StepMetrics, simulate, series, closed_loop, dc_gain, poles, is_stable, step_metrics
from .netsim import NcsModel, SignalTrace, LossModel, LoopRun, run_loop, eavesdrop, hold_last
from .bsa import BsaConfig, BsaResult, optimize

__version__ = "0.1.0"

__all__ = [
    "BsaConfig", "BsaResult", "LoopRun", "LossModel", "NcsModel", "SignalTrace", "StepMetrics",
    "TransferFunction", "closed_loop", "dc_gain", "eavesdrop", "hold_last", "is_stable", "optimize",
    "poles", "run_loop", "series", "simulate", "step_metrics",
]
