"""Locational analysis of fast frequency reserves in low-inertia grids.

Builds linearized multi-machine frequency models from declarative
scenarios and quantifies where droop-based inverter reserves help or
hurt: disturbance response ratios and sensitivity margins, step-response
trajectories with nadir/RoCoF metrics, modal damping, and a droop
allocation procedure constrained by a peak-|R_zd| cap.
"""

from .allocate import AllocationProblem, AllocationResult, allocate_droop
from .freqdom import (
    FrequencyResponseCurve,
    crossover_frequency,
    disturbance_response_ratio,
    evaluate_tf,
    log_grid,
    loop_gain,
    nyquist_margin,
    peak,
    sensitivity,
)
from .linearize import ClosedLoopModel, StateSpaceModel, close_loop, closed_loop, linearize
from .modal import DampingSweep, Mode, ModeSet, damping_sweep, eigenvalues
from .network import DisconnectedNetworkError, susceptance_matrix
from .scenario import (
    BusSpec,
    DisturbanceSpec,
    GeneratorSpec,
    GovernorSpec,
    IbrControllerSpec,
    LineSpec,
    Scenario,
    ScenarioError,
    ScenarioParseError,
    ScenarioValidationError,
    StudySettings,
    UnknownKeyError,
    load_bundled_scenario,
    load_scenario,
)
from .timesim import Trajectory, TrajectoryMetrics, coi_series, metrics, step_response

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
