"""Forward/backward channels, losses and gradient evaluation."""

from __future__ import annotations

import numpy as np

from . import linalg
from .gates import I2, X, Y, Z, zero_state
from .linalg import kron, partial_trace, symmetrize
from .network import (
    LayerUnitarySpec,
    NetworkParams,
    NetworkTopology,
    embedded_factors,
    layer_unitary,
    perceptron_unitary,
    perceptron_unitary_deriv,
)

# gradients are defined as zero once the per-sample fidelity saturates
FIDELITY_SATURATION = 1.0 - 1e-9


def _check_upper(rho: np.ndarray, spec: LayerUnitarySpec) -> None:
    if rho.shape != (2**spec.up_width, 2**spec.up_width):
        raise ValueError(
            f"state dimension {rho.shape[0]} does not match {spec.up_width} upper qubits"
        )


def forward_channel(rho_prev: np.ndarray, spec: LayerUnitarySpec) -> np.ndarray:
    """Attach fresh |0..0> on the lower layer, apply the layer unitary, trace out the upper layer."""
    _check_upper(rho_prev, spec)
    u = layer_unitary(spec)
    joint = u @ kron(rho_prev, zero_state(spec.down_width)) @ u.conj().T
    keep = range(spec.up_width, spec.num_qubits)
    return symmetrize(partial_trace(joint, keep, spec.num_qubits))


def forward_pass(rho_in: np.ndarray, topo: NetworkTopology, params: NetworkParams) -> list:
    """States [rho_in, rho_1, ..., rho_out], one per layer."""
    states = [rho_in]
    for l in range(topo.num_interfaces):
        states.append(forward_channel(states[-1], params.spec(topo, l)))
    return states


def backward_channel(sigma: np.ndarray, spec: LayerUnitarySpec) -> np.ndarray:
    """Adjoint of forward_channel: sigma on the lower layer -> term on the upper layer."""
    if sigma.shape != (2**spec.down_width, 2**spec.down_width):
        raise ValueError(
            f"term dimension {sigma.shape[0]} does not match {spec.down_width} lower qubits"
        )
    u = layer_unitary(spec)
    m = u.conj().T @ kron(np.eye(2**spec.up_width, dtype=complex), sigma) @ u
    # (I x <0..0|) M (I x |0..0>): lower qubits are the least significant bits
    step = 2**spec.down_width
    return symmetrize(m[0::step, 0::step])


def backward_pass(sigma_out: np.ndarray, topo: NetworkTopology, params: NetworkParams) -> list:
    """Backward terms [sigma_0, sigma_1, ..., sigma_out], indexed by layer."""
    terms = [sigma_out]
    for l in reversed(range(topo.num_interfaces)):
        terms.append(backward_channel(terms[-1], params.spec(topo, l)))
    terms.reverse()
    return terms


def sigma_out_for_fidelity(rho_out: np.ndarray, tau_out: np.ndarray) -> np.ndarray:
    """tau^(1/2) B^(-1) tau^(1/2) with B = sqrt(sqrt(tau) rho sqrt(tau))."""
    if rho_out.shape != tau_out.shape:
        raise ValueError("dimension mismatch between output and target state")
    s = linalg.matrix_sqrt(tau_out)
    b_inv = linalg.matrix_inv_sqrt(s @ rho_out @ s)
    return symmetrize(s @ b_inv @ s)


def _interface_environment(rho_prev: np.ndarray, sigma: np.ndarray, spec: LayerUnitarySpec):
    rho0 = kron(rho_prev, zero_state(spec.down_width))
    obs = kron(np.eye(2**spec.up_width, dtype=complex), sigma)
    return rho0, obs


def analytic_gradient(rho_prev, sigma, spec: LayerUnitarySpec, which) -> float:
    """tr(dU/dtheta (rho x |0><0|) U† (I x sigma)) + h.c. for one rotation angle."""
    i, j, k = which
    if (i, j) not in spec.params:
        raise KeyError(f"no perceptron ({i}, {j}) at this interface")
    rho0, obs = _interface_environment(rho_prev, sigma, spec)
    u = layer_unitary(spec)
    du = _layer_unitary_deriv(spec, (i, j), k)
    val = np.trace(du @ rho0 @ u.conj().T @ obs)
    return float(2.0 * np.real(val))


def _layer_unitary_deriv(spec: LayerUnitarySpec, ij, k: int) -> np.ndarray:
    from .gates import embed_operator

    n = spec.num_qubits
    du = np.eye(2**n, dtype=complex)
    for key in spec.order:
        if key == ij:
            f = embed_operator(perceptron_unitary_deriv(spec.params[key], k), spec.positions(*key), n)
        else:
            f = embed_operator(perceptron_unitary(spec.params[key]), spec.positions(*key), n)
        du = f @ du
    return du


def interface_gradients(rho_prev, sigma, spec: LayerUnitarySpec) -> dict:
    """Analytic gradients for every rotation angle of one interface.

    Uses prefix/suffix products of the embedded perceptron factors so each
    parameter costs O(1) extra matrix products.  Returns {(i, j, k): grad}.
    """
    from .gates import embed_operator

    _check_upper(rho_prev, spec)
    n = spec.num_qubits
    factors = embedded_factors(spec)
    eye = np.eye(2**n, dtype=complex)
    prefixes = [eye]
    for f in factors:
        prefixes.append(f @ prefixes[-1])
    suffixes = [eye] * (len(factors) + 1)
    for t in reversed(range(len(factors))):
        suffixes[t] = suffixes[t + 1] @ factors[t]
    u = prefixes[-1]
    rho0, obs = _interface_environment(rho_prev, sigma, spec)
    env = rho0 @ u.conj().T @ obs  # tr(dU env) + h.c.
    grads = {}
    for t, ij in enumerate(spec.order):
        for k in (1, 2):
            df = embed_operator(
                perceptron_unitary_deriv(spec.params[ij], k), spec.positions(*ij), n
            )
            du = suffixes[t + 1] @ df @ prefixes[t]
            grads[(*ij, k)] = float(2.0 * np.real(np.trace(du @ env)))
    return grads


def parameter_shift_gradient(rho_prev, sigma, spec: LayerUnitarySpec, which) -> float:
    """(h+ - h-)/2 with the addressed angle shifted by +-pi/2."""
    i, j, k = which
    if (i, j) not in spec.params:
        raise KeyError(f"no perceptron ({i}, {j}) at this interface")
    rho0, obs = _interface_environment(rho_prev, sigma, spec)

    def h(shift: float) -> float:
        from dataclasses import replace

        p = spec.params[(i, j)]
        theta = p.theta1 if k == 1 else p.theta2
        shifted = dict(spec.params)
        shifted[(i, j)] = replace(p, **{f"theta{k}": theta + shift})
        u = layer_unitary(LayerUnitarySpec(spec.up_width, spec.down_width, shifted, spec.order))
        return float(np.real(np.trace(u @ rho0 @ u.conj().T @ obs)))

    return 0.5 * (h(np.pi / 2) - h(-np.pi / 2))


def interface_gradients_shift(rho_prev, sigma, spec: LayerUnitarySpec) -> dict:
    """Parameter-shift gradients for every rotation angle of one interface."""
    return {
        (*ij, k): parameter_shift_gradient(rho_prev, sigma, spec, (*ij, k))
        for ij in spec.order
        for k in (1, 2)
    }


def network_gradients(topo, params, states, terms, scheme: str = "analytic") -> dict:
    """Loss-observable gradients {(l, i, j, k): grad} from a forward/backward pair.

    `states[l]` is the forward state on layer l, `terms[l]` the backward term.
    The result is the derivative of tr(X rho_out); fidelity callers scale by 1/2.
    """
    per_interface = {
        "analytic": interface_gradients,
        "shift": interface_gradients_shift,
    }[scheme]
    grads = {}
    for l in range(topo.num_interfaces):
        spec = params.spec(topo, l)
        for key, g in per_interface(states[l], terms[l + 1], spec).items():
            grads[(l, *key)] = g
    return grads


def mean_fidelity_loss(traces: list, targets: list) -> float:
    """Mean root fidelity between trace outputs and targets."""
    if not traces or len(traces) != len(targets):
        raise ValueError("traces and targets must be non-empty and equally long")
    return float(np.mean([linalg.fidelity(t[-1], tau) for t, tau in zip(traces, targets)]))


def energy_loss(rho_out: np.ndarray, h: np.ndarray) -> float:
    """tr(rho_out H)."""
    if rho_out.shape != h.shape:
        raise ValueError("dimension mismatch between state and observable")
    return float(np.real(np.trace(rho_out @ h)))


def build_molecular_hamiltonian(g) -> np.ndarray:
    """g0 I + g1 Z0 + g2 Z1 + g3 Z0 Z1 + g4 Y0 Y1 + g5 X0 X1 on two qubits."""
    g = [float(c) for c in g]
    if len(g) != 6:
        raise ValueError("expected exactly six coefficients")
    return (
        g[0] * kron(I2, I2)
        + g[1] * kron(Z, I2)
        + g[2] * kron(I2, Z)
        + g[3] * kron(Z, Z)
        + g[4] * kron(Y, Y)
        + g[5] * kron(X, X)
    )
