"""Network topology, perceptron parameters and layer unitaries.

A network with widths [m_0, ..., m_out] has len(widths) - 1 interfaces.
Interface ``l`` (0-based) maps the state on layer ``l`` to layer ``l + 1``.
Within an interface register the upper-layer qubits occupy positions
0..up-1 and the lower-layer qubits up..up+down-1; perceptron (i, j)
(1-based, as in the product formula) touches positions i-1 and up+j-1.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .gates import controlled_phase, embed_operator, rx_gate, rx_gate_deriv
from .linalg import kron

DEFAULT_PHASE = np.pi  # ideal controlled-Z


@dataclass(frozen=True)
class PerceptronParams:
    theta1: float
    theta2: float
    phi: float = DEFAULT_PHASE


def formula_order(up: int, down: int) -> tuple:
    """Application order implied by the descending double product: (1,1), (2,1), ..."""
    return tuple((i, j) for j in range(1, down + 1) for i in range(1, up + 1))


# the hardware sequence applies the second-interface perceptrons top-to-bottom,
# which differs from the product-formula order
TABLE_ORDER_DQNN1_L2 = ((1, 2), (1, 1), (2, 2), (2, 1))


@dataclass(frozen=True)
class LayerUnitarySpec:
    up_width: int
    down_width: int
    params: dict  # (i, j) -> PerceptronParams
    order: tuple = ()

    def __post_init__(self):
        grid = set(formula_order(self.up_width, self.down_width))
        order = self.order or formula_order(self.up_width, self.down_width)
        object.__setattr__(self, "order", tuple(order))
        if set(self.order) != grid or len(self.order) != len(grid):
            raise ValueError(f"order {self.order} is not a permutation of the grid")
        if set(self.params) != grid:
            raise ValueError("params do not cover the full perceptron grid")

    @property
    def num_qubits(self) -> int:
        return self.up_width + self.down_width

    def positions(self, i: int, j: int) -> tuple:
        return (i - 1, self.up_width + j - 1)


def perceptron_unitary(p: PerceptronParams) -> np.ndarray:
    """4x4 unitary: Rx(theta1) x Rx(theta2) followed by a controlled phase."""
    return controlled_phase(p.phi) @ kron(rx_gate(p.theta1), rx_gate(p.theta2))


def perceptron_unitary_deriv(p: PerceptronParams, k: int) -> np.ndarray:
    """Derivative of the perceptron unitary with respect to theta_k (k = 1 or 2)."""
    if k == 1:
        core = kron(rx_gate_deriv(p.theta1), rx_gate(p.theta2))
    elif k == 2:
        core = kron(rx_gate(p.theta1), rx_gate_deriv(p.theta2))
    else:
        raise ValueError(f"unknown rotation index {k}")
    return controlled_phase(p.phi) @ core


def embedded_factors(spec: LayerUnitarySpec) -> list:
    """Embedded perceptron unitaries in application order (first acts first)."""
    n = spec.num_qubits
    return [
        embed_operator(perceptron_unitary(spec.params[ij]), spec.positions(*ij), n)
        for ij in spec.order
    ]


def layer_unitary(spec: LayerUnitarySpec) -> np.ndarray:
    u = np.eye(2**spec.num_qubits, dtype=complex)
    for f in embedded_factors(spec):
        u = f @ u
    return u


@dataclass(frozen=True)
class NetworkTopology:
    widths: tuple
    orders: tuple = ()  # per-interface order overrides; () selects the formula order

    def __post_init__(self):
        widths = tuple(int(w) for w in self.widths)
        if len(widths) < 2 or any(w < 1 for w in widths):
            raise ValueError(f"invalid widths {widths}")
        object.__setattr__(self, "widths", widths)
        orders = tuple(tuple(map(tuple, o)) if o else () for o in self.orders)
        if orders and len(orders) != self.num_interfaces:
            raise ValueError("orders must have one entry per interface")
        object.__setattr__(self, "orders", orders)

    @property
    def num_interfaces(self) -> int:
        return len(self.widths) - 1

    def order(self, l: int) -> tuple:
        if self.orders and self.orders[l]:
            return self.orders[l]
        return formula_order(self.widths[l], self.widths[l + 1])


def dqnn1_topology(table_order: bool = False) -> NetworkTopology:
    """Three layers of two qubits each."""
    orders = ((), TABLE_ORDER_DQNN1_L2) if table_order else ()
    return NetworkTopology(widths=(2, 2, 2), orders=orders)


def dqnn2_topology() -> NetworkTopology:
    """Six layers of one qubit each."""
    return NetworkTopology(widths=(1, 1, 1, 1, 1, 1))


@dataclass
class NetworkParams:
    """Per-interface perceptron parameters, [interface][(i, j)] -> PerceptronParams."""

    interfaces: list = field(default_factory=list)

    def spec(self, topo: NetworkTopology, l: int) -> LayerUnitarySpec:
        return LayerUnitarySpec(
            up_width=topo.widths[l],
            down_width=topo.widths[l + 1],
            params=dict(self.interfaces[l]),
            order=topo.order(l),
        )

    def copy(self) -> "NetworkParams":
        return NetworkParams([dict(d) for d in self.interfaces])

    def theta_items(self):
        """Yield ((l, i, j, k), theta) over every rotation angle in a fixed order."""
        for l, d in enumerate(self.interfaces):
            for (i, j) in sorted(d):
                p = d[(i, j)]
                yield (l, i, j, 1), p.theta1
                yield (l, i, j, 2), p.theta2

    def with_theta(self, key, value) -> "NetworkParams":
        l, i, j, k = key
        out = self.copy()
        p = out.interfaces[l][(i, j)]
        out.interfaces[l][(i, j)] = replace(p, **{f"theta{k}": value})
        return out

    def shifted(self, key, delta: float) -> "NetworkParams":
        l, i, j, k = key
        p = self.interfaces[l][(i, j)]
        theta = p.theta1 if k == 1 else p.theta2
        return self.with_theta(key, theta + delta)


def zero_params(topo: NetworkTopology, phases=None) -> NetworkParams:
    """All rotation angles zero; phases default to the ideal controlled-Z."""
    interfaces = []
    for l in range(topo.num_interfaces):
        d = {}
        for ij in formula_order(topo.widths[l], topo.widths[l + 1]):
            phi = phases[l][ij] if phases else DEFAULT_PHASE
            d[ij] = PerceptronParams(0.0, 0.0, phi)
        interfaces.append(d)
    return NetworkParams(interfaces)


def random_params(topo: NetworkTopology, rng, phases=None) -> NetworkParams:
    """Rotation angles uniform on [0, 2 pi); phases fixed."""
    params = zero_params(topo, phases)
    for l, d in enumerate(params.interfaces):
        for ij in sorted(d):
            t1, t2 = rng.uniform(0.0, 2 * np.pi, size=2)
            d[ij] = replace(d[ij], theta1=float(t1), theta2=float(t2))
    return params
