"""BLP non-Markovianity of the free spin-star evolution over a finite window.

The two central-spin states start orthogonal (|+...+> and |-...->, bath in
|1...1>).  The measure is the total increase of their trace distance,
sum_i max(0, D(t_{i+1}) - D(t_i)) over a uniform time grid.  No maximisation
over initial pairs is done, so the value is a lower bound on the full measure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import free_evolution
from .hilbert import reduced_states, trace_distances
from .spinstar import SpinStarModel, free_hamiltonian, initial_state_pair

DEFAULT_SAMPLES = 2000
MIN_SAMPLES = 100


@dataclass(frozen=True)
class NmResult:
    value: float
    d_trajectory: np.ndarray = field(repr=False)
    sample_times: np.ndarray = field(repr=False)


def positive_increments(d: np.ndarray) -> float:
    return float(np.sum(np.clip(np.diff(d), 0.0, None)))


def distance_curve(model: SpinStarModel, times: np.ndarray) -> np.ndarray:
    """Trace distance between the two reduced central-spin states at ``times``."""
    h0 = free_hamiltonian(model)
    psi1, psi2 = initial_state_pair(model)
    d = np.empty(len(times))
    # chunk so the n=12 full basis stays within a few hundred MB
    chunk = max(1, 2**22 // model.dim)
    for start in range(0, len(times), chunk):
        t = times[start:start + chunk]
        r1 = reduced_states(free_evolution(h0, psi1, t), model.system_dim)
        r2 = reduced_states(free_evolution(h0, psi2, t), model.system_dim)
        d[start:start + chunk] = trace_distances(r1, r2)
    return np.clip(d, 0.0, 1.0)


def blp_measure(model: SpinStarModel, total_time: float, n_samples: int = DEFAULT_SAMPLES) -> NmResult:
    if total_time <= 0:
        raise ValueError("total_time must be positive")
    if n_samples < MIN_SAMPLES:
        raise ValueError(f"n_samples must be at least {MIN_SAMPLES}")
    times = np.linspace(0.0, total_time, n_samples + 1)
    d = distance_curve(model, times)
    return NmResult(positive_increments(d), d, times)


def nm_window_curve(
    model: SpinStarModel,
    t_max: float,
    n_windows: int,
    samples_per_window: int = MIN_SAMPLES,
) -> list[tuple[float, float]]:
    """NM over the growing windows [0, T_j], T_j = j t_max / n_windows.

    All windows share one time grid, so window j gives exactly
    ``blp_measure(model, T_j, j * samples_per_window)``.
    """
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    if n_windows < 1:
        raise ValueError("n_windows must be at least 1")
    if samples_per_window < MIN_SAMPLES:
        raise ValueError(f"samples_per_window must be at least {MIN_SAMPLES}")
    total = n_windows * samples_per_window
    times = np.linspace(0.0, t_max, total + 1)
    gains = np.concatenate([[0.0], np.cumsum(np.clip(np.diff(distance_curve(model, times)), 0.0, None))])
    ends = np.arange(1, n_windows + 1) * samples_per_window
    return [(float(times[e]), float(gains[e])) for e in ends]
