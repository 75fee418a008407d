"""Gate constructors, operator embedding and state preparation."""

from __future__ import annotations

import numpy as np

from .linalg import kron

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)

KET_0 = np.array([1, 0], dtype=complex)
KET_1 = np.array([0, 1], dtype=complex)
KET_PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)
KET_MINUS = np.array([1, -1], dtype=complex) / np.sqrt(2)
KET_PLUS_I = np.array([1, 1j], dtype=complex) / np.sqrt(2)

# single-qubit kets addressable by name in training-set presets and the CLI
NAMED_KETS = {
    "0": KET_0,
    "1": KET_1,
    "+": KET_PLUS,
    "-": KET_MINUS,
    "+i": KET_PLUS_I,
}


def rx_gate(theta: float) -> np.ndarray:
    """Rotation about the x axis, cos(t/2) I - i sin(t/2) X."""
    return np.cos(theta / 2) * I2 - 1j * np.sin(theta / 2) * X


def rx_gate_deriv(theta: float) -> np.ndarray:
    """d/dtheta of rx_gate; generator -(i/2) X."""
    return -0.5j * X @ rx_gate(theta)


def rot_xy(axis_angle: float, rot_angle: float) -> np.ndarray:
    """Rotation by rot_angle about the axis cos(a) x + sin(a) y."""
    gen = np.cos(axis_angle) * X + np.sin(axis_angle) * Y
    return np.cos(rot_angle / 2) * I2 - 1j * np.sin(rot_angle / 2) * gen


def controlled_phase(phi: float) -> np.ndarray:
    """diag(1, 1, 1, e^{i phi}) on two qubits."""
    return np.diag([1, 1, 1, np.exp(1j * phi)]).astype(complex)


def ket_to_density(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def product_ket(names) -> np.ndarray:
    """Tensor product of named single-qubit kets, e.g. ["+", "+"]."""
    psi = NAMED_KETS[names[0]]
    for name in names[1:]:
        psi = np.kron(psi, NAMED_KETS[name])
    return psi


def zero_state(n: int) -> np.ndarray:
    """|0...0><0...0| on n qubits."""
    rho = np.zeros((2**n, 2**n), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def embed_operator(u: np.ndarray, positions, total: int) -> np.ndarray:
    """Embed a k-qubit operator acting on the given register positions.

    `positions[t]` is the register qubit carrying axis t of `u`; remaining
    qubits get the identity.
    """
    positions = list(positions)
    k = len(positions)
    if u.shape != (2**k, 2**k):
        raise ValueError("operator dimension does not match position count")
    if len(set(positions)) != k or any(q < 0 or q >= total for q in positions):
        raise ValueError(f"bad embedding positions {positions} for {total} qubits")
    rest = [q for q in range(total) if q not in positions]
    full = kron(u, np.eye(2 ** (total - k), dtype=complex))
    # axis t of `full` currently holds register qubit (positions + rest)[t]
    src = positions + rest
    perm = [src.index(q) for q in range(total)]
    t = full.reshape([2] * (2 * total))
    t = np.transpose(t, perm + [p + total for p in perm])
    return np.ascontiguousarray(t.reshape(2**total, 2**total))
