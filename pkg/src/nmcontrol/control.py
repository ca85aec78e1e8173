"""GRAPE optimisation of the sigma_y field on central spin 0.

The figure of merit is <target| rho_S(T) |target>, where rho_S(T) is the
reduced central-spin state at the final time.  For a full-system state psi
this equals <psi| (|target><target| x 1_env) |psi>, which is what the
gradient is taken of.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .dynamics import DEFAULT_SLICES, ControlProtocol, evolve, reduced_trajectory, slice_eigensystems
from .hilbert import DimensionError, check_hermitian, fidelity_pure
from .spinstar import SpinStarModel, control_generator, free_hamiltonian, initial_state_pair, real_gauge

STEP_RULES = ("backtracking", "fixed")


@dataclass(frozen=True)
class OptimizationConfig:
    restarts: int = 10
    max_iters: int = 500
    grad_tol: float = 1e-8
    init_amplitude: float = 1.0
    step_rule: str = "backtracking"
    seed: int = 0
    n_slices: int = DEFAULT_SLICES
    initial_step: float = 1.0
    armijo: float = 1e-4
    shrink: float = 0.5
    growth: float = 2.0
    min_step: float = 1e-12

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")
        if self.step_rule not in STEP_RULES:
            raise ValueError(f"step_rule must be one of {STEP_RULES}")
        if self.n_slices < 1:
            raise ValueError("n_slices must be >= 1")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class OptimizationResult:
    best_fidelity: float
    best_protocol: ControlProtocol
    iterations_used: int
    restart_index: int
    fidelity_history: np.ndarray = field(repr=False)
    restart_fidelities: list[float] = field(default_factory=list)


class _Evaluation:
    __slots__ = ("amplitudes", "fidelity", "w", "v", "states", "projection")


class FidelityObjective:
    """Reduced-state fidelity of a piecewise-constant protocol and its exact gradient.

    Works on bare operators so it can drive any (h0, hc, psi0) triple whose
    Hilbert space factorises as system (``len(target)``) x environment.
    """

    def __init__(self, h0, hc, psi0, target, total_time: float, gauge=None):
        self.h0 = np.asarray(h0, dtype=complex)
        self.hc = np.asarray(hc, dtype=complex)
        check_hermitian(self.h0)
        check_hermitian(self.hc)
        self.psi0 = np.asarray(psi0, dtype=complex)
        self.target = np.asarray(target, dtype=complex)
        dim = self.h0.shape[0]
        if self.hc.shape != self.h0.shape or self.psi0.shape != (dim,):
            raise DimensionError("h0, hc and psi0 dimensions disagree")
        if dim % self.target.shape[0]:
            raise DimensionError(f"target dim {self.target.shape[0]} does not divide {dim}")
        if total_time <= 0:
            raise ValueError("total_time must be positive")
        self.total_time = float(total_time)
        self.system_dim = self.target.shape[0]
        self.env_dim = dim // self.system_dim
        # work in a diagonal gauge where both generators are real (cheaper eigh)
        self._gauge = None
        self._h0, self._hc, self._psi0 = self.h0, self.hc, self.psi0
        if gauge is not None:
            g = np.asarray(gauge, dtype=complex)
            h0g = g.conj()[:, None] * self.h0 * g[None, :]
            hcg = g.conj()[:, None] * self.hc * g[None, :]
            if max(np.abs(h0g.imag).max(), np.abs(hcg.imag).max()) < 1e-14:
                self._gauge = g
                self._h0, self._hc, self._psi0 = h0g.real.copy(), hcg.real.copy(), g.conj() * self.psi0

    @classmethod
    def for_model(cls, model: SpinStarModel, target, total_time: float) -> "FidelityObjective":
        target = np.asarray(target)
        if target.shape != (model.system_dim,):
            raise DimensionError(f"target dim {target.shape} != 2**m = {model.system_dim}")
        psi0 = initial_state_pair(model)[0]
        return cls(free_hamiltonian(model), control_generator(model), psi0, target, total_time,
                   gauge=real_gauge(model))

    def _project(self, psi: np.ndarray) -> np.ndarray:
        if self._gauge is not None:
            psi = self._gauge * psi
        return self.target.conj() @ psi.reshape(self.system_dim, self.env_dim)

    def evaluate(self, amplitudes) -> _Evaluation:
        amps = np.asarray(amplitudes, dtype=float)
        dt = self.total_time / amps.size
        w, v = slice_eigensystems(self._h0, self._hc, amps)
        states = np.empty((amps.size + 1, self.psi0.size), dtype=complex)
        states[0] = self._psi0
        phases = np.exp(-1j * w * dt)
        for k in range(amps.size):
            states[k + 1] = v[k] @ (phases[k] * (v[k].conj().T @ states[k]))
        ev = _Evaluation()
        ev.amplitudes, ev.w, ev.v, ev.states = amps, w, v, states
        ev.projection = self._project(states[-1])
        ev.fidelity = float(np.vdot(ev.projection, ev.projection).real)
        return ev

    def gradient(self, ev: _Evaluation) -> np.ndarray:
        amps, w, v, states = ev.amplitudes, ev.w, ev.v, ev.states
        n_slices = amps.size
        dt = self.total_time / n_slices
        vh = np.swapaxes(v.conj(), 1, 2)
        phases = np.exp(-1j * w * dt)
        # costates chi_k = U_{k+1}^dag ... U_K^dag O psi(T), kept in the slice-k eigenbasis
        chi = np.outer(self.target, ev.projection).ravel()
        if self._gauge is not None:
            chi = self._gauge.conj() * chi
        chi_eig = np.empty((n_slices, self.psi0.size), dtype=complex)
        for k in range(n_slices - 1, -1, -1):
            chi_eig[k] = vh[k] @ chi
            chi = v[k] @ (phases[k].conj() * chi_eig[k])
        psi_eig = np.einsum("kab,kb->ka", vh[:, :, :], states[:-1])
        # d exp(-i H dt) in the eigenbasis: -i dt e^{-i(w_a+w_b)dt/2} sinc((w_a-w_b)dt/2)
        half_sum = 0.5 * (w[:, :, None] + w[:, None, :])
        diff = w[:, :, None] - w[:, None, :]
        frechet = -1j * dt * np.exp(-1j * half_sum * dt) * np.sinc(diff * dt / (2 * np.pi))
        hc_eig = vh @ (self._hc @ v)
        return 2.0 * np.real(np.einsum("ka,kab,kb->k", chi_eig.conj(), frechet * hc_eig, psi_eig))

    def fidelity(self, amplitudes) -> float:
        return self.evaluate(amplitudes).fidelity

    def value_and_gradient(self, amplitudes) -> tuple[float, np.ndarray]:
        ev = self.evaluate(amplitudes)
        return ev.fidelity, self.gradient(ev)


def state_fidelity(protocol: ControlProtocol, model: SpinStarModel, target) -> float:
    """Fidelity of the reduced final state with ``target`` starting from |+...+>|1...1>."""
    target = np.asarray(target, dtype=complex)
    if target.shape != (model.system_dim,):
        raise DimensionError(f"target dim {target.shape} != 2**m = {model.system_dim}")
    psi0 = initial_state_pair(model)[0]
    traj = evolve(free_hamiltonian(model), control_generator(model), protocol, psi0)
    return fidelity_pure(target, reduced_trajectory(traj, model)[-1])


def fidelity_gradient(protocol: ControlProtocol, model: SpinStarModel, target) -> np.ndarray:
    objective = FidelityObjective.for_model(model, target, protocol.total_time)
    return objective.value_and_gradient(protocol.amplitudes)[1]


def ascend(objective: FidelityObjective, amplitudes, config: OptimizationConfig):
    """Gradient ascent from ``amplitudes``.

    Returns (amplitudes, fidelity, history, iterations).  With backtracking
    the step grows by ``config.growth`` after every accepted move and shrinks
    until the Armijo condition F(x + a g) >= F(x) + c a |g|^2 holds, so the
    history is non-decreasing.
    """
    ev = objective.evaluate(amplitudes)
    grad = objective.gradient(ev)
    history = [ev.fidelity]
    step = config.initial_step
    iterations = 0
    for iterations in range(1, config.max_iters + 1):
        gnorm2 = float(grad @ grad)
        if math.sqrt(gnorm2) < config.grad_tol:
            iterations -= 1
            break
        if config.step_rule == "fixed":
            trial = objective.evaluate(ev.amplitudes + step * grad)
        else:
            step *= config.growth
            while True:
                trial = objective.evaluate(ev.amplitudes + step * grad)
                if trial.fidelity >= ev.fidelity + config.armijo * step * gnorm2:
                    break
                step *= config.shrink
                if step < config.min_step:
                    trial = None
                    break
            if trial is None:
                break
        ev = trial
        grad = objective.gradient(ev)
        history.append(ev.fidelity)
    return ev.amplitudes.copy(), ev.fidelity, np.array(history), iterations


def _run_restart(objective: FidelityObjective, config: OptimizationConfig, index: int):
    rng = np.random.default_rng([config.seed, index])
    start = rng.uniform(-config.init_amplitude, config.init_amplitude, config.n_slices)
    return ascend(objective, start, config)


def optimize(
    model: SpinStarModel,
    target,
    total_time: float,
    config: OptimizationConfig | None = None,
    n_jobs: int = 1,
) -> OptimizationResult:
    """Multi-restart GRAPE; the best restart wins, lowest index on ties.

    Each restart draws its initial field from its own generator seeded by
    (config.seed, restart index), so results do not depend on ``n_jobs``.
    """
    config = config or OptimizationConfig()
    objective = FidelityObjective.for_model(model, target, total_time)
    indices = range(config.restarts)
    if n_jobs > 1 and config.restarts > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            runs = list(pool.map(_run_restart, [objective] * config.restarts, [config] * config.restarts, indices))
    else:
        runs = [_run_restart(objective, config, i) for i in indices]
    fids = [run[1] for run in runs]
    best = int(np.argmax(fids))
    amps, fid, history, iterations = runs[best]
    return OptimizationResult(
        best_fidelity=float(fid),
        best_protocol=ControlProtocol(total_time, amps),
        iterations_used=iterations,
        restart_index=best,
        fidelity_history=history,
        restart_fidelities=[float(f) for f in fids],
    )
