"""Channel-learning and ground-state training loops, datasets and ensembles."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import engine, linalg
from .engine import FIDELITY_SATURATION
from .gates import ket_to_density, product_ket, rot_xy, zero_state, KET_0
from .network import NetworkParams, NetworkTopology, random_params

# training-set presets used in the two channel-learning tasks
DQNN1_INPUT_KETS = (("0", "0"), ("0", "1"), ("+", "+"), ("+i", "+i"))
DQNN2_INPUT_KETS = (("0",), ("1",), ("-",))

CONVERGENCE_TOL = 1e-6
CONVERGENCE_WINDOW = 10


@dataclass
class TrainRun:
    seed: int
    epochs: int
    learning_rate: float
    curve: list
    init_params: NetworkParams
    final_params: NetworkParams
    final_loss: float
    converged: bool


@dataclass
class ChannelDataset:
    pairs: list  # (rho_in, tau_out)

    def __post_init__(self):
        if not self.pairs:
            raise ValueError("empty training dataset")

    def __len__(self):
        return len(self.pairs)


def make_target_channel(topo: NetworkTopology, seed: int, phases=None) -> NetworkParams:
    """Random target-channel parameters, uniform angles on [0, 2 pi)."""
    return random_params(topo, np.random.default_rng(seed), phases)


def build_channel_dataset(topo, target_params, input_states) -> ChannelDataset:
    """Pair each input state with the target network's output for it."""
    pairs = []
    for rho_in in input_states:
        tau = engine.forward_pass(rho_in, topo, target_params)[-1]
        pairs.append((rho_in, tau))
    return ChannelDataset(pairs)


def preset_input_states(preset: str) -> list:
    kets = {"dqnn1": DQNN1_INPUT_KETS, "dqnn2": DQNN2_INPUT_KETS}[preset]
    return [ket_to_density(product_ket(names)) for names in kets]


def random_input_state(num_qubits: int, rng) -> np.ndarray:
    """Pure product state from random x-y-plane rotations applied to |0..0>."""
    psi = np.array([1.0], dtype=complex)
    for _ in range(num_qubits):
        axis, angle = rng.uniform(0.0, 2 * np.pi, size=2)
        psi = np.kron(psi, rot_xy(axis, angle) @ KET_0)
    return ket_to_density(psi)


def _forward(rho_in, topo, params, forward_fn):
    if forward_fn is None:
        return engine.forward_pass(rho_in, topo, params)
    states = [rho_in]
    for l in range(topo.num_interfaces):
        states.append(forward_fn(states[-1], params.spec(topo, l), l))
    return states


def _apply_update(params: NetworkParams, grads: dict, step: float) -> NetworkParams:
    out = params
    for key, theta in params.theta_items():
        out = out.with_theta(key, theta + step * grads.get(key, 0.0))
    return out


def _converged(curve) -> bool:
    if len(curve) <= CONVERGENCE_WINDOW:
        return False
    tail = curve[-(CONVERGENCE_WINDOW + 1):]
    return all(abs(b - a) < CONVERGENCE_TOL for a, b in zip(tail, tail[1:]))


def train_channel(
    topo: NetworkTopology,
    dataset: ChannelDataset,
    init: NetworkParams,
    eps: float,
    s0: int,
    scheme: str = "analytic",
    seed: int = 0,
    forward_fn=None,
) -> TrainRun:
    """Gradient ascent on the mean output fidelity over the training pairs."""
    if eps <= 0 or s0 < 1:
        raise ValueError("learning rate must be positive and epochs >= 1")
    params = init.copy()
    curve = []
    for _ in range(s0):
        fids = []
        grad_sum = {}
        for rho_in, tau in dataset.pairs:
            states = _forward(rho_in, topo, params, forward_fn)
            fid = linalg.fidelity(states[-1], tau)
            fids.append(fid)
            if fid >= FIDELITY_SATURATION:
                continue
            sigma_out = engine.sigma_out_for_fidelity(states[-1], tau)
            terms = engine.backward_pass(sigma_out, topo, params)
            grads = engine.network_gradients(topo, params, states, terms, scheme)
            for key, g in grads.items():
                # true derivative of the root fidelity carries a factor 1/2
                grad_sum[key] = grad_sum.get(key, 0.0) + 0.5 * g
        curve.append(float(np.mean(fids)))
        n = len(dataset)
        params = _apply_update(params, {k: v / n for k, v in grad_sum.items()}, +eps)
    traces = [_forward(rho_in, topo, params, forward_fn) for rho_in, _ in dataset.pairs]
    final = engine.mean_fidelity_loss(traces, [tau for _, tau in dataset.pairs])
    return TrainRun(seed, s0, eps, curve, init, params, final, _converged(curve + [final]))


def train_ground_state(
    topo: NetworkTopology,
    h: np.ndarray,
    init: NetworkParams,
    eps: float,
    s0: int,
    scheme: str = "analytic",
    seed: int = 0,
    forward_fn=None,
) -> TrainRun:
    """Gradient descent on tr(rho_out H) from the fiducial |0..0> input."""
    if eps <= 0 or s0 < 1:
        raise ValueError("learning rate must be positive and epochs >= 1")
    if h.shape != (2 ** topo.widths[-1],) * 2:
        raise ValueError("Hamiltonian dimension does not match the output layer")
    if not linalg.is_hermitian(h):
        raise ValueError("Hamiltonian must be Hermitian")
    rho_in = zero_state(topo.widths[0])
    params = init.copy()
    curve = []
    for _ in range(s0):
        states = _forward(rho_in, topo, params, forward_fn)
        curve.append(engine.energy_loss(states[-1], h))
        terms = engine.backward_pass(h, topo, params)
        grads = engine.network_gradients(topo, params, states, terms, scheme)
        params = _apply_update(params, grads, -eps)
    states = _forward(rho_in, topo, params, forward_fn)
    final = engine.energy_loss(states[-1], h)
    return TrainRun(seed, s0, eps, curve, init, params, final, _converged(curve + [final]))


def generalization_test(topo, params, target_params, num_states: int, seed: int,
                        forward_fn=None, num_bins: int = 20):
    """Per-state output fidelities of a network against the target channel."""
    if num_states < 1:
        raise ValueError("need at least one test state")
    rng = np.random.default_rng(seed)
    fids = []
    for _ in range(num_states):
        rho_in = random_input_state(topo.widths[0], rng)
        out = _forward(rho_in, topo, params, forward_fn)[-1]
        tau = engine.forward_pass(rho_in, topo, target_params)[-1]
        fids.append(linalg.fidelity(out, tau))
    # numerical roundoff can push a perfect fidelity marginally above one
    fids = np.clip(np.asarray(fids), 0.0, 1.0)
    counts, edges = np.histogram(fids, bins=num_bins, range=(0.0, 1.0))
    return {
        "fidelities": fids,
        "mean": float(np.mean(fids)),
        "hist_counts": counts,
        "hist_edges": edges,
    }


@dataclass
class EnsembleStats:
    runs: list = field(default_factory=list)
    final_losses: list = field(default_factory=list)
    local_minimum_flags: list = field(default_factory=list)

    @property
    def num_excluded(self) -> int:
        return int(sum(self.local_minimum_flags))

    def mean_converged(self) -> float:
        kept = [v for v, bad in zip(self.final_losses, self.local_minimum_flags) if not bad]
        if not kept:
            raise ValueError("all runs flagged as local minima")
        return float(np.mean(kept))


def derive_seed(base_seed: int, index: int) -> int:
    """Deterministic per-run seed; identical for serial and parallel execution.

    Negative indices are allowed (used for auxiliary streams such as the
    target-channel draw) and map into the unsigned entropy range.
    """
    return int(np.random.SeedSequence([base_seed, index % 2**63]).generate_state(1)[0])


def restart_ensemble(run_fn, num_restarts: int, base_seed: int, flag_fn=None, workers: int = 0):
    """Run `run_fn(seed)` for derived seeds and collect converged-value statistics.

    `flag_fn(run) -> bool` marks local-minimum runs; workers > 1 uses a process pool.
    """
    if num_restarts < 1:
        raise ValueError("need at least one restart")
    seeds = [derive_seed(base_seed, i) for i in range(num_restarts)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(run_fn, seeds))
    else:
        runs = [run_fn(s) for s in seeds]
    stats = EnsembleStats()
    for run in runs:
        stats.runs.append(run)
        stats.final_losses.append(run.final_loss)
        stats.local_minimum_flags.append(bool(flag_fn(run)) if flag_fn else False)
    return stats
