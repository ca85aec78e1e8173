"""Piecewise-constant Schroedinger propagation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hilbert import DimensionError, check_hermitian, reduced_states
from .spinstar import SpinStarModel

DEFAULT_SLICES = 200


@dataclass(frozen=True)
class ControlProtocol:
    """Field amplitudes held constant on K equal slices of [0, total_time].

    Slice k covers [k dt, (k + 1) dt) with dt = total_time / K.
    """

    total_time: float
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=float).ravel()
        if self.total_time <= 0:
            raise ValueError("total_time must be positive")
        if amps.size < 1:
            raise ValueError("protocol needs at least one slice")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def constant(cls, total_time: float, value: float = 0.0, n_slices: int = DEFAULT_SLICES):
        return cls(total_time, np.full(n_slices, float(value)))

    @property
    def n_slices(self) -> int:
        return self.amplitudes.size

    @property
    def dt(self) -> float:
        return self.total_time / self.n_slices

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.total_time, self.n_slices + 1)

    def split(self, k: int) -> tuple["ControlProtocol", "ControlProtocol"]:
        """Protocols for slices [0, k) and [k, K)."""
        if not 0 < k < self.n_slices:
            raise ValueError(f"split index {k} outside (0, {self.n_slices})")
        return (
            ControlProtocol(k * self.dt, self.amplitudes[:k]),
            ControlProtocol((self.n_slices - k) * self.dt, self.amplitudes[k:]),
        )


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (K + 1, dim), one full-system state per slice boundary


def slice_eigensystems(h0: np.ndarray, hc: np.ndarray, amplitudes: np.ndarray):
    """Eigen-decompositions of every slice Hamiltonian h0 + lambda_k hc (batched)."""
    stack = h0[None, :, :] + np.asarray(amplitudes)[:, None, None] * hc[None, :, :]
    return np.linalg.eigh(stack)


def _check_generators(h0: np.ndarray, hc: np.ndarray) -> None:
    check_hermitian(h0)
    check_hermitian(hc)
    if h0.shape != hc.shape:
        raise DimensionError(f"h0 {h0.shape} and hc {hc.shape} differ")


def slice_propagators(h0: np.ndarray, hc: np.ndarray, protocol: ControlProtocol) -> np.ndarray:
    """Stack of U_k = exp(-i (h0 + lambda_k hc) dt), shape (K, dim, dim)."""
    _check_generators(h0, hc)
    w, v = slice_eigensystems(h0, hc, protocol.amplitudes)
    phases = np.exp(-1j * w * protocol.dt)
    return (v * phases[:, None, :]) @ np.swapaxes(v.conj(), 1, 2)


def propagate(propagators: np.ndarray, psi0: np.ndarray) -> np.ndarray:
    states = np.empty((propagators.shape[0] + 1, psi0.shape[0]), dtype=complex)
    states[0] = psi0
    for k, u in enumerate(propagators):
        states[k + 1] = u @ states[k]
    return states


def evolve(h0: np.ndarray, hc: np.ndarray, protocol: ControlProtocol, psi0: np.ndarray) -> Trajectory:
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (h0.shape[0],):
        raise DimensionError(f"psi0 has shape {psi0.shape}, operators are {h0.shape}")
    states = propagate(slice_propagators(h0, hc, protocol), psi0)
    return Trajectory(protocol.times, states)


def free_evolution(h0: np.ndarray, psi0: np.ndarray, times: np.ndarray) -> np.ndarray:
    """States exp(-i h0 t) psi0 at arbitrary times via one eigendecomposition."""
    check_hermitian(h0)
    w, v = np.linalg.eigh(h0)
    coeffs = v.conj().T @ psi0
    phases = np.exp(-1j * np.outer(times, w))
    return (phases * coeffs) @ v.T


def reduced_trajectory(traj: Trajectory, model: SpinStarModel) -> np.ndarray:
    """Central-spin density matrices at every sample, shape (K + 1, 2**m, 2**m)."""
    if traj.states.shape[-1] != model.dim:
        raise DimensionError(f"trajectory dim {traj.states.shape[-1]} != model dim {model.dim}")
    return reduced_states(traj.states, model.system_dim)
