"""Spin-star model: M central spins uniformly coupled to a bath of N - M spins.

H = sum_l (omega0/2) sz_l + A_eff sum_l sum_k sigma_l . sigma_k + lambda(t) sy_0

Two representations of the bath are supported.  ``basis="full"`` keeps every
bath qubit (dimension 2**n).  ``basis="collective"`` uses the symmetric
(Dicke) subspace of the bath, dimension 2**m * (n - m + 1).  The Hamiltonian,
the control and the initial bath state |1...1> are all invariant under bath
permutations, so the dynamics never leaves that subspace and the reduced
central-spin states are identical in both representations.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .hilbert import (
    IDENTITY,
    KET_1,
    KET_MINUS,
    KET_PLUS,
    PAULIS,
    SIGMA_Y,
    SIGMA_Z,
    embed,
    kron,
)

MAX_SPINS = 12
COUPLING_MODES = ("unscaled", "scaled")
BASES = ("collective", "full")


class TargetKind(str, enum.Enum):
    BELL = "bell"
    GHZ = "ghz"
    W = "w"


@dataclass(frozen=True)
class SpinStarModel:
    """Parameters of the spin star.

    ``omega0`` defaults to 2, i.e. a unit-strength sigma_z field on every
    central spin; times and couplings are quoted against that field.  With
    ``coupling_mode="scaled"`` the bath coupling is ``coupling / sqrt(n - m)``.
    The control always acts on central spin 0.
    """

    m: int
    n: int
    coupling: float = 0.0
    coupling_mode: str = "unscaled"
    omega0: float = 2.0
    basis: str = "collective"

    def __post_init__(self):
        if not 1 <= self.m <= self.n <= MAX_SPINS:
            raise ValueError(f"need 1 <= m <= n <= {MAX_SPINS}, got m={self.m}, n={self.n}")
        if self.omega0 <= 0:
            raise ValueError("omega0 must be positive")
        if self.coupling < 0:
            raise ValueError("coupling must be non-negative")
        if self.coupling_mode not in COUPLING_MODES:
            raise ValueError(f"coupling_mode must be one of {COUPLING_MODES}")
        if self.basis not in BASES:
            raise ValueError(f"basis must be one of {BASES}")

    @property
    def control_site(self) -> int:
        return 0

    @property
    def n_env(self) -> int:
        return self.n - self.m

    @property
    def effective_coupling(self) -> float:
        if self.coupling_mode == "scaled" and self.n_env > 0:
            return self.coupling / math.sqrt(self.n_env)
        return self.coupling

    @property
    def system_dim(self) -> int:
        return 2**self.m

    @property
    def env_dim(self) -> int:
        if self.basis == "full":
            return 2**self.n_env
        return self.n_env + 1

    @property
    def dim(self) -> int:
        return self.system_dim * self.env_dim

    def with_basis(self, basis: str) -> "SpinStarModel":
        return SpinStarModel(self.m, self.n, self.coupling, self.coupling_mode, self.omega0, basis)


def collective_spin(n_spins: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Spin-j matrices (j = n_spins / 2) in the basis |j, j>, ..., |j, -j>."""
    j = n_spins / 2
    mz = j - np.arange(n_spins + 1)
    raising = np.zeros((n_spins + 1, n_spins + 1))
    for i in range(1, n_spins + 1):
        raising[i - 1, i] = math.sqrt(j * (j + 1) - mz[i] * (mz[i] + 1))
    jx = (raising + raising.T) / 2
    jy = (raising - raising.T) / 2j
    return jx.astype(complex), jy.astype(complex), np.diag(mz).astype(complex)


def bath_pauli_sums(model: SpinStarModel) -> tuple[np.ndarray, ...]:
    """sum_k sigma_a^(k) over the bath, for a = x, y, z."""
    ne = model.n_env
    if ne == 0:
        return tuple(np.zeros((1, 1), dtype=complex) for _ in range(3))
    if model.basis == "collective":
        return tuple(2 * j for j in collective_spin(ne))
    return tuple(sum(embed(p, k, ne) for k in range(ne)) for p in PAULIS)


def _central_op(op: np.ndarray, site: int, m: int) -> np.ndarray:
    return embed(op, site, m)


def free_hamiltonian(model: SpinStarModel) -> np.ndarray:
    """Zeeman terms on the central spins plus isotropic central-bath exchange."""
    eye_env = np.eye(model.env_dim, dtype=complex)
    h = np.zeros((model.dim, model.dim), dtype=complex)
    for site in range(model.m):
        h += 0.5 * model.omega0 * np.kron(_central_op(SIGMA_Z, site, model.m), eye_env)
    a_eff = model.effective_coupling
    if a_eff and model.n_env:
        for pauli, bath in zip(PAULIS, bath_pauli_sums(model)):
            for site in range(model.m):
                h += a_eff * np.kron(_central_op(pauli, site, model.m), bath)
    return h


def control_generator(model: SpinStarModel) -> np.ndarray:
    """sigma_y on central spin 0, identity elsewhere."""
    return np.kron(_central_op(SIGMA_Y, model.control_site, model.m), np.eye(model.env_dim))


def total_magnetization(model: SpinStarModel) -> np.ndarray:
    """sum over all spins of sigma_z, in the model's representation."""
    eye_env = np.eye(model.env_dim, dtype=complex)
    mz = sum(np.kron(_central_op(SIGMA_Z, site, model.m), eye_env) for site in range(model.m))
    return mz + np.kron(np.eye(model.system_dim), bath_pauli_sums(model)[2])


def down_spin_parity(model: SpinStarModel) -> np.ndarray:
    """Parity of the number of |1> spins for every basis state (diagonal of prod sigma_z = (-1)**parity)."""
    central = np.array([bin(i).count("1") for i in range(model.system_dim)])
    if model.basis == "full":
        bath = np.array([bin(i).count("1") for i in range(model.env_dim)])
    else:
        bath = np.arange(model.env_dim)  # Dicke index = number of down spins
    return (central[:, None] + bath[None, :]).ravel() % 2


def real_gauge(model: SpinStarModel) -> np.ndarray:
    """Diagonal phases g with conj(g) H g real for H = H0 + lambda sigma_y^(0).

    Complex conjugation combined with prod sigma_z is an antiunitary symmetry
    of every slice Hamiltonian; basis states of odd parity pick up a factor i.
    """
    return np.where(down_spin_parity(model) == 1, 1j, 1.0 + 0j)


def bath_ground(model: SpinStarModel) -> np.ndarray:
    """All bath spins in |1>."""
    if model.basis == "full":
        return kron(np.ones(1, dtype=complex), *([KET_1] * model.n_env))
    state = np.zeros(model.env_dim, dtype=complex)
    state[-1] = 1.0
    return state


def initial_state_pair(model: SpinStarModel) -> tuple[np.ndarray, np.ndarray]:
    """|+...+>|1...1> and |-...->|1...1>; the central parts are orthogonal."""
    env = bath_ground(model)
    psi1 = kron(*([KET_PLUS] * model.m), env)
    psi2 = kron(*([KET_MINUS] * model.m), env)
    return psi1, psi2


def target_state(kind: TargetKind | str, m: int) -> np.ndarray:
    kind = TargetKind(kind)
    if kind is TargetKind.BELL and m != 2:
        raise ValueError("Bell target needs m = 2")
    if m < 2:
        raise ValueError(f"{kind.value} target needs m >= 2")
    psi = np.zeros(2**m, dtype=complex)
    if kind is TargetKind.W:
        for site in range(m):
            psi[1 << (m - 1 - site)] = 1.0
        return psi / math.sqrt(m)
    psi[0] = psi[-1] = 1.0
    return psi / math.sqrt(2)


def single_site_propagator(model: SpinStarModel, dt: float) -> np.ndarray:
    """Propagator of the decoupled (A = 0) free Hamiltonian, as a Kronecker product.

    Only meaningful in the full basis; used to cross-check factorization.
    """
    central = np.diag(np.exp(-0.5j * model.omega0 * dt * np.array([1, -1])))
    return kron(*([central] * model.m), *([IDENTITY] * model.n_env))
