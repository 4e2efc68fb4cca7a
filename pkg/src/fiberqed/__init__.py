"""Two-level atom dynamics in hollow-core fibers."""
from ._accel import USE_NUMBA
from .config import ConfigError, RunConfig, parse_config
from .ensemble import SweepSpec, run_sweep, spearman_trend, summarize
from .fiber import AtomSpec, BranchSpec, FiberSpec
from .forces import FiberForceModel, ModelFlags
from .langevin import IntegratorConfig, PhaseState, Trajectory, simulate_trajectory, trapping_time
from .modes import HGIndex, ModeSuperposition, load_mode_table
from .response import DriveSpec
from .spectral import LineState, line_state, threshold_integrals

__version__ = "0.1.0"

__all__ = [
    "USE_NUMBA", "ConfigError", "RunConfig", "parse_config", "SweepSpec", "run_sweep", "spearman_trend",
    "summarize", "AtomSpec", "BranchSpec", "FiberSpec", "FiberForceModel", "ModelFlags", "IntegratorConfig",
    "PhaseState", "Trajectory", "simulate_trajectory", "trapping_time", "HGIndex", "ModeSuperposition",
    "load_mode_table", "DriveSpec", "LineState", "line_state", "threshold_integrals",
]
