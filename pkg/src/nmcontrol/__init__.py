"""Spin-star open-system dynamics, BLP non-Markovianity and GRAPE entangling control."""

from .control import (
    FidelityObjective,
    OptimizationConfig,
    OptimizationResult,
    fidelity_gradient,
    optimize,
    state_fidelity,
)
from .dynamics import ControlProtocol, Trajectory, evolve, reduced_trajectory, slice_propagators
from .nonmarkov import NmResult, blp_measure, nm_window_curve
from .spinstar import (
    SpinStarModel,
    TargetKind,
    control_generator,
    free_hamiltonian,
    initial_state_pair,
    target_state,
)
from .sweep import SweepRecord, SweepSpec, emit_results, find_matched_coupling, run

__version__ = "0.1.0"
