"""Dense complex linear algebra for multi-qubit operators.

Qubit convention used throughout the package: qubit 0 is the leftmost tensor
factor, i.e. the most significant bit of the computational-basis index.  With
this convention ``np.kron(A, B)`` puts ``A`` on qubit 0.
"""

from __future__ import annotations

import numpy as np

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-9
PSD_TOL = 1e-9

# eigenvalues below this threshold are treated as zero in pseudo-inverse roots
EIG_CLAMP = 1e-12


def kron(*ops: np.ndarray) -> np.ndarray:
    """Tensor product of one or more operators, left factor = qubit 0."""
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = np.kron(out, op)
    return out


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Project onto the Hermitian part, (M + M†)/2."""
    return 0.5 * (m + m.conj().T)


def is_hermitian(m: np.ndarray, tol: float = HERMITICITY_TOL) -> bool:
    return bool(np.max(np.abs(m - m.conj().T)) <= tol)


def num_qubits(m: np.ndarray) -> int:
    dim = m.shape[0]
    n = dim.bit_length() - 1
    if m.shape != (dim, dim) or 2**n != dim:
        raise ValueError(f"operator shape {m.shape} is not a square power of two")
    return n


def check_density_matrix(rho: np.ndarray) -> None:
    """Raise ValueError unless rho is Hermitian, unit-trace and PSD up to tolerance."""
    num_qubits(rho)
    if not is_hermitian(rho):
        raise ValueError("density matrix is not Hermitian")
    tr = np.trace(rho)
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValueError(f"density matrix trace {tr} != 1")
    lo = np.linalg.eigvalsh(symmetrize(rho))[0]
    if lo < -PSD_TOL:
        raise ValueError(f"density matrix has negative eigenvalue {lo}")


def partial_trace(m: np.ndarray, keep, total: int) -> np.ndarray:
    """Trace out all qubits of an operator except those in `keep`.

    The kept qubits retain their relative order.  Preserves the trace exactly.
    """
    keep = sorted(keep)
    if any(q < 0 or q >= total for q in keep):
        raise ValueError(f"keep indices {keep} out of range for {total} qubits")
    if m.shape != (2**total, 2**total):
        raise ValueError("operator dimension does not match qubit count")
    t = m.reshape([2] * (2 * total))
    traced = [q for q in range(total) if q not in keep]
    # contract row/col axes pairwise, adjusting axis numbers as axes disappear
    n = total
    for q in sorted(traced, reverse=True):
        pos = sum(1 for k in keep if k < q) + sum(1 for k in traced if k < q)
        t = np.trace(t, axis1=pos, axis2=pos + n)
        n -= 1
        traced.remove(q)
    k = len(keep)
    return t.reshape(2**k, 2**k)


def hermitian_eig(m: np.ndarray):
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending."""
    if not is_hermitian(m):
        raise ValueError("matrix is not Hermitian")
    return np.linalg.eigh(symmetrize(m))


def matrix_sqrt(m: np.ndarray) -> np.ndarray:
    """Principal square root of a PSD Hermitian matrix (negatives clamped to 0)."""
    vals, vecs = hermitian_eig(m)
    if vals[0] < -1e-6:
        raise ValueError(f"matrix has significantly negative eigenvalue {vals[0]}")
    vals = np.clip(vals, 0.0, None)
    return symmetrize((vecs * np.sqrt(vals)) @ vecs.conj().T)


def matrix_inv_sqrt(m: np.ndarray, clamp: float = EIG_CLAMP) -> np.ndarray:
    """Moore-Penrose inverse square root on the support of a PSD matrix."""
    vals, vecs = hermitian_eig(m)
    if vals[0] < -1e-6:
        raise ValueError(f"matrix has significantly negative eigenvalue {vals[0]}")
    inv = np.where(vals > clamp, 1.0 / np.sqrt(np.clip(vals, clamp, None)), 0.0)
    return symmetrize((vecs * inv) @ vecs.conj().T)


def fidelity(rho: np.ndarray, tau: np.ndarray) -> float:
    """Root Uhlmann fidelity tr sqrt(sqrt(tau) rho sqrt(tau))."""
    if rho.shape != tau.shape:
        raise ValueError(f"dimension mismatch {rho.shape} vs {tau.shape}")
    s = matrix_sqrt(tau)
    vals = np.linalg.eigvalsh(symmetrize(s @ rho @ s))
    return float(np.sum(np.sqrt(np.clip(vals, 0.0, None))))
