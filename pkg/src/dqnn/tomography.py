"""Finite-shot state tomography and least-squares reconstruction."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.optimize import minimize

from .gates import I2, KET_0, KET_1, KET_PLUS, KET_PLUS_I
from .linalg import kron, symmetrize

# basis-change unitaries mapping each basis ket to |0>; rows are the ket and
# its orthogonal complement
_SINGLE_BASES = {
    "g": np.vstack([KET_0.conj(), KET_1.conj()]),
    "e": np.vstack([KET_1.conj(), KET_0.conj()]),
    "+": np.vstack([KET_PLUS.conj(), np.array([1, -1], dtype=complex).conj() / np.sqrt(2)]),
    "i": np.vstack([KET_PLUS_I.conj(), np.array([1, -1j], dtype=complex).conj() / np.sqrt(2)]),
}
SINGLE_LABELS = ("g", "e", "+", "i")


def basis_set(num_qubits: int) -> dict:
    """Label -> measurement unitary for the 4^n product bases."""
    if num_qubits < 1:
        raise ValueError("need at least one qubit")
    out = {}
    for labels in product(SINGLE_LABELS, repeat=num_qubits):
        u = _SINGLE_BASES[labels[0]]
        for lab in labels[1:]:
            u = kron(u, _SINGLE_BASES[lab])
        out["".join(labels)] = u
    return out


@dataclass
class TomographyRecord:
    basis_label: str
    shots: int
    counts: np.ndarray  # per computational outcome

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=int)
        if self.shots <= 0 or self.counts.sum() != self.shots:
            raise ValueError("counts must sum to a positive shot number")

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.shots


def born_probabilities(rho: np.ndarray, unitary: np.ndarray) -> np.ndarray:
    p = np.real(np.diag(unitary @ rho @ unitary.conj().T))
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def sample_measurements(rho: np.ndarray, num_qubits: int, shots: int, seed: int) -> list:
    """Multinomial counts for every basis of the informationally complete set."""
    if shots < 1:
        raise ValueError("shots must be positive")
    rng = np.random.default_rng(seed)
    records = []
    for label, u in basis_set(num_qubits).items():
        p = born_probabilities(rho, u)
        counts = rng.multinomial(shots, p)
        records.append(TomographyRecord(label, shots, counts))
    return records


def exact_records(rho: np.ndarray, num_qubits: int) -> list:
    """Infinite-shot limit: frequencies equal to the exact Born probabilities."""
    out = []
    for label, u in basis_set(num_qubits).items():
        rec = TomographyRecord.__new__(TomographyRecord)
        rec.basis_label = label
        rec.shots = 0
        rec.counts = None
        rec.frequencies_exact = born_probabilities(rho, u)
        out.append(rec)
    return out


def _record_frequencies(rec) -> np.ndarray:
    if getattr(rec, "counts", None) is None:
        return rec.frequencies_exact
    return rec.frequencies


def _measurement_matrix(records, num_qubits):
    """Stack of POVM effects (one per basis outcome) and target frequencies."""
    bases = basis_set(num_qubits)
    missing = set(bases) - {r.basis_label for r in records}
    if missing:
        raise ValueError(f"records do not cover bases: {sorted(missing)}")
    effects, freqs = [], []
    for rec in records:
        u = bases[rec.basis_label]
        f = _record_frequencies(rec)
        for k in range(u.shape[0]):
            effects.append(np.outer(u[k].conj(), u[k]))
            freqs.append(f[k])
    return np.array(effects), np.array(freqs)


def linear_inversion(records, num_qubits: int) -> np.ndarray:
    """Least-squares linear inversion; Hermitian and unit trace, not forced PSD."""
    effects, freqs = _measurement_matrix(records, num_qubits)
    dim = 2**num_qubits
    a = effects.conj().reshape(len(effects), dim * dim)
    rho_vec, *_ = np.linalg.lstsq(a, freqs, rcond=None)
    rho = symmetrize(rho_vec.reshape(dim, dim))
    return rho / np.trace(rho).real


def reconstruct_state(records, num_qubits: int, max_iter: int = 5000, tol: float = 1e-10):
    """Physical density matrix minimizing the squared frequency residual.

    Parameterized as rho = C C† / tr(C C†) so Hermiticity, positivity and the
    unit trace hold by construction; deterministic L-BFGS from the maximally
    mixed starting point.
    """
    effects, freqs = _measurement_matrix(records, num_qubits)
    dim = 2**num_qubits

    def unpack(x):
        c = x[: dim * dim] + 1j * x[dim * dim:]
        return c.reshape(dim, dim)

    def loss_grad(x):
        c = unpack(x)
        s = c @ c.conj().T
        t = np.trace(s).real
        rho = s / t
        p = np.real(np.einsum("kij,ji->k", effects, rho))
        r = p - freqs
        loss = float(np.dot(r, r))
        g_rho = np.einsum("k,kji->ij", 2 * r, effects)  # d loss / d rho entries
        g_rho = symmetrize(g_rho.T)
        gc = (g_rho @ c) / t - (np.real(np.trace(g_rho @ rho)) / t) * c
        grad = np.concatenate([2 * gc.real.ravel(), 2 * gc.imag.ravel()])
        return loss, grad

    x0 = np.concatenate([np.eye(dim).ravel(), np.zeros(dim * dim)])
    res = minimize(
        loss_grad,
        x0,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": max_iter, "maxfun": 4 * max_iter, "ftol": tol * 1e-6,
                 "gtol": 1e-14},
    )
    c = unpack(res.x)
    s = c @ c.conj().T
    return symmetrize(s / np.trace(s).real)
