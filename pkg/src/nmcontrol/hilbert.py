"""Dense linear-algebra kernels for qubit registers.

Operators, pure states and density matrices are plain complex numpy arrays.
Qubit 0 is the leftmost (most significant) tensor factor and ``|0>`` is the
+1 eigenstate of sigma_z.
"""

from __future__ import annotations

from functools import reduce
from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-9

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SIGMA_X, SIGMA_Y, SIGMA_Z)

KET_0 = np.array([1, 0], dtype=complex)
KET_1 = np.array([0, 1], dtype=complex)
KET_PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)
KET_MINUS = np.array([1, -1], dtype=complex) / np.sqrt(2)


class DimensionError(ValueError):
    """Operands have incompatible Hilbert-space dimensions."""


class NotHermitianError(ValueError):
    """An operator expected to be Hermitian is not."""


def kron(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of any number of operators or state vectors."""
    if not ops:
        raise ValueError("kron needs at least one operand")
    return reduce(np.kron, ops)


def embed(op: np.ndarray, site: int, n_qubits: int) -> np.ndarray:
    """Place a single-qubit operator at ``site`` of an ``n_qubits`` register."""
    if not 0 <= site < n_qubits:
        raise IndexError(f"site {site} outside register of {n_qubits} qubits")
    factors = [IDENTITY] * n_qubits
    factors[site] = op
    return kron(*factors)


def hermiticity_defect(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def check_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    defect = hermiticity_defect(a)
    if defect >= tol:
        raise NotHermitianError(f"max|A - A^dag| = {defect:.3e} >= {tol:g}")


def herm_eig(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and unitary eigenvector matrix of a Hermitian matrix."""
    a = np.asarray(a, dtype=complex)
    check_hermitian(a)
    return np.linalg.eigh(a)


def propagator(h: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i h dt) built from the eigendecomposition of ``h``."""
    w, v = herm_eig(h)
    return (v * np.exp(-1j * w * dt)) @ v.conj().T


def partial_trace_dims(rho: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Trace out every tensor factor of ``rho`` not listed in ``keep``.

    ``dims`` gives the size of each factor; kept factors stay in the order
    given by ``keep``.
    """
    dims = [int(d) for d in dims]
    keep = [int(k) for k in keep]
    total = int(np.prod(dims))
    if rho.shape != (total, total):
        raise DimensionError(f"rho has shape {rho.shape}, factors give {total}")
    if not keep:
        raise ValueError("keep must name at least one subsystem")
    if len(set(keep)) != len(keep) or any(not 0 <= k < len(dims) for k in keep):
        raise IndexError(f"invalid keep set {keep} for {len(dims)} subsystems")
    n = len(dims)
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    if 2 * n > len(letters):
        raise ValueError("too many subsystems")
    row = list(letters[:n])
    col = [letters[n + i] if i in keep else row[i] for i in range(n)]
    out = "".join(row[k] for k in keep) + "".join(col[k] for k in keep)
    reduced = np.einsum(f"{''.join(row)}{''.join(col)}->{out}", rho.reshape(dims + dims))
    d_keep = int(np.prod([dims[k] for k in keep]))
    return reduced.reshape(d_keep, d_keep)


def partial_trace(rho: np.ndarray, n_total: int, keep: Sequence[int]) -> np.ndarray:
    """Reduced density matrix of the qubits in ``keep`` (an ``n_total`` qubit register)."""
    if rho.shape[0] != 2**n_total:
        raise DimensionError(f"rho dim {rho.shape[0]} != 2**{n_total}")
    return partial_trace_dims(rho, [2] * n_total, keep)


def reduced_states(psi: np.ndarray, system_dim: int) -> np.ndarray:
    """Reduced density matrices of the leading ``system_dim`` factor.

    ``psi`` may be a single state vector or a stack of them (last axis is
    the Hilbert-space index); the trailing factor is traced out.
    """
    psi = np.asarray(psi)
    full = psi.shape[-1]
    if full % system_dim:
        raise DimensionError(f"system dim {system_dim} does not divide {full}")
    blocks = psi.reshape(psi.shape[:-1] + (system_dim, full // system_dim))
    return blocks @ np.swapaxes(blocks.conj(), -1, -2)


def trace_distance(r1: np.ndarray, r2: np.ndarray) -> float:
    """Half the trace norm of ``r1 - r2``."""
    if r1.shape != r2.shape:
        raise DimensionError(f"shape mismatch {r1.shape} vs {r2.shape}")
    delta = r1 - r2
    delta = 0.5 * (delta + delta.conj().T)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(delta))))


def trace_distances(r1: np.ndarray, r2: np.ndarray) -> np.ndarray:
    """Batched :func:`trace_distance` over stacks of density matrices."""
    if r1.shape != r2.shape:
        raise DimensionError(f"shape mismatch {r1.shape} vs {r2.shape}")
    delta = r1 - r2
    delta = 0.5 * (delta + np.swapaxes(delta.conj(), -1, -2))
    return 0.5 * np.sum(np.abs(np.linalg.eigvalsh(delta)), axis=-1)


def fidelity_pure(target: np.ndarray, rho: np.ndarray) -> float:
    """<target|rho|target>, clamped to [0, 1]."""
    if rho.shape != (target.shape[0], target.shape[0]):
        raise DimensionError(f"target dim {target.shape[0]} vs rho shape {rho.shape}")
    value = np.real(target.conj() @ rho @ target)
    return float(min(1.0, max(0.0, value)))


def purity(rho: np.ndarray) -> float:
    return float(np.real(np.trace(rho @ rho)))


def ket_to_dm(psi: np.ndarray) -> np.ndarray:
    return np.outer(psi, psi.conj())


def is_normalized(psi: np.ndarray, tol: float = 1e-12) -> bool:
    return abs(np.vdot(psi, psi).real - 1.0) < tol


def is_density_matrix(rho: np.ndarray, tol: float = 1e-12, psd_tol: float = 1e-10) -> bool:
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return False
    if hermiticity_defect(rho) >= tol or abs(np.trace(rho).real - 1.0) >= tol:
        return False
    return bool(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0] >= -psd_tol)
