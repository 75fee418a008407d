"""Decoherence and residual-ZZ noise channels plus the sweep harness."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .gates import Z, embed_operator, zero_state
from .linalg import kron, partial_trace, symmetrize
from .network import LayerUnitarySpec, NetworkTopology, formula_order, perceptron_unitary

SINGLE_GATE_NS = 40.0
DEFAULT_TWO_QUBIT_NS = 70.0

# processor baseline: per-layer (T1, T2) in microseconds for the three-layer
# two-qubit-wide network, plus the measured two-qubit gate durations in ns
BASELINE_T1 = ((4.2, 6.1), (5.1, 8.2), (10.0, 10.6))
BASELINE_T2 = ((2.2, 1.9), (4.8, 8.4), (18.2, 11.8))
BASELINE_TWO_QUBIT_NS = (
    {(1, 1): 62.0, (2, 1): 52.0, (1, 2): 92.0, (2, 2): 82.0},
    {(1, 1): 64.0, (2, 1): 60.0, (1, 2): 64.0, (2, 2): 64.0},
)


@dataclass(frozen=True)
class NoiseModel:
    """Markovian per-gate noise: T1/T2 per layer qubit, residual ZZ, gate durations.

    t1/t2 are per-layer sequences of per-qubit times in microseconds; zz is the
    residual coupling strength in rad/us applied to idle coupled pairs;
    time_scale multiplies every T1 and T2 (the coherence-sweep knob).
    """

    t1: tuple
    t2: tuple
    zz: float = 0.0
    single_gate_ns: float = SINGLE_GATE_NS
    two_qubit_ns: tuple = ()  # per-interface {(i, j): ns}; empty -> uniform default
    time_scale: float = 1.0

    def __post_init__(self):
        for layer_t1, layer_t2 in zip(self.t1, self.t2):
            for a, b in zip(layer_t1, layer_t2):
                if a <= 0 or b <= 0:
                    raise ValueError("T1 and T2 must be positive")
                if b > 2 * a + 1e-12:
                    raise ValueError(f"unphysical T2={b} > 2*T1={2 * a}")

    def scaled(self, factor: float) -> "NoiseModel":
        return replace(self, time_scale=self.time_scale * factor)

    def with_zz(self, zz: float) -> "NoiseModel":
        return replace(self, zz=zz)

    def interface_times(self, l: int):
        """(T1, T2) per register position of interface l, time_scale applied."""
        up = list(zip(self.t1[l], self.t2[l]))
        down = list(zip(self.t1[l + 1], self.t2[l + 1]))
        return [(self.time_scale * a, self.time_scale * b) for a, b in up + down]

    def gate_duration_us(self, l: int, ij) -> float:
        two = DEFAULT_TWO_QUBIT_NS
        if self.two_qubit_ns and l < len(self.two_qubit_ns):
            two = self.two_qubit_ns[l].get(tuple(ij), DEFAULT_TWO_QUBIT_NS)
        return (self.single_gate_ns + two) * 1e-3


def baseline_noise(zz: float = 0.0) -> NoiseModel:
    """Table-derived processor baseline for the three-layer two-qubit network."""
    return NoiseModel(
        t1=BASELINE_T1, t2=BASELINE_T2, zz=zz, two_qubit_ns=BASELINE_TWO_QUBIT_NS
    )


def uniform_noise(topo: NetworkTopology, t1: float, t2: float, zz: float = 0.0) -> NoiseModel:
    return NoiseModel(
        t1=tuple((t1,) * w for w in topo.widths),
        t2=tuple((t2,) * w for w in topo.widths),
        zz=zz,
    )


def decoherence_channel(rho, qubit: int, duration_us: float, t1: float, t2: float):
    """Amplitude damping + pure dephasing on one qubit for the given duration."""
    if duration_us < 0:
        raise ValueError("negative duration")
    if t2 > 2 * t1 + 1e-12:
        raise ValueError(f"unphysical T2={t2} > 2*T1={2 * t1}")
    if duration_us == 0:
        return rho
    n = rho.shape[0].bit_length() - 1
    p = 1.0 - np.exp(-duration_us / t1)
    # pure-dephasing rate 1/T_phi = 1/T2 - 1/(2 T1)
    rate_phi = 1.0 / t2 - 0.5 / t1
    gamma = np.exp(-duration_us * rate_phi)
    amp = [
        np.array([[1, 0], [0, np.sqrt(1 - p)]], dtype=complex),
        np.array([[0, np.sqrt(p)], [0, 0]], dtype=complex),
    ]
    deph = [
        np.sqrt((1 + gamma) / 2) * np.eye(2, dtype=complex),
        np.sqrt((1 - gamma) / 2) * Z,
    ]
    out = np.zeros_like(rho)
    for a in amp:
        for d in deph:
            k = embed_operator(d @ a, [qubit], n)
            out += k @ rho @ k.conj().T
    return symmetrize(out)


def zz_error(rho, pair, duration_us: float, zeta: float):
    """Coherent exp(-i (zeta t / 2) Z x Z) rotation on a qubit pair."""
    if duration_us < 0:
        raise ValueError("negative duration")
    angle = zeta * duration_us / 2
    if angle == 0:
        return rho
    n = rho.shape[0].bit_length() - 1
    u4 = np.diag(np.exp(-1j * angle * np.array([1, -1, -1, 1])))
    u = embed_operator(u4, list(pair), n)
    return u @ rho @ u.conj().T


def noisy_forward_channel(rho_prev, spec: LayerUnitarySpec, noise: NoiseModel, interface: int):
    """Forward channel with per-gate decoherence and idle-pair ZZ rotations.

    Gates run serially; during each gate window every register qubit decoheres
    and every coupled (upper, lower) pair not addressed by the gate picks up
    the residual ZZ phase.
    """
    n = spec.num_qubits
    times = noise.interface_times(interface)
    if len(times) != n:
        raise ValueError("noise model layer widths do not match the interface")
    joint = kron(rho_prev, zero_state(spec.down_width))
    coupled = [
        (i - 1, spec.up_width + j - 1)
        for (i, j) in formula_order(spec.up_width, spec.down_width)
    ]
    for ij in spec.order:
        u = embed_operator(perceptron_unitary(spec.params[ij]), spec.positions(*ij), n)
        joint = u @ joint @ u.conj().T
        dur = noise.gate_duration_us(interface, ij)
        for q, (t1, t2) in enumerate(times):
            joint = decoherence_channel(joint, q, dur, t1, t2)
        if noise.zz != 0.0:
            active = spec.positions(*ij)
            for pair in coupled:
                if pair != active:
                    joint = zz_error(joint, pair, dur, noise.zz)
    keep = range(spec.up_width, n)
    return symmetrize(partial_trace(joint, keep, n))


def noisy_forward_fn(noise: NoiseModel):
    """Adapter matching the trainer's forward_fn signature."""

    def forward(rho_prev, spec, interface):
        return noisy_forward_channel(rho_prev, spec, noise, interface)

    return forward


@dataclass
class SweepCell:
    time_scale: float
    zz: float
    mean_energy: float
    n_runs: int
    n_excluded: int


def noise_sweep(
    topo,
    h,
    base_noise: NoiseModel,
    time_scales,
    zz_strengths,
    restarts: int,
    base_seed: int,
    eps: float,
    s0: int,
    scheme: str = "analytic",
    local_min_gap: float = 0.05,
    workers: int = 0,
) -> list:
    """Mean converged energy per (T/T0, zz) cell, local-minimum runs excluded.

    Restart seeds are shared across cells, and the excluded seeds are decided
    once from a noiseless baseline run per seed, so every cell averages over
    the same random initializations and trends are comparable.
    """
    from functools import partial

    from .training import derive_seed, restart_ensemble

    if not time_scales or not zz_strengths:
        raise ValueError("sweep grids must be non-empty")
    lam_min = float(np.linalg.eigvalsh(h)[0])
    seeds = [derive_seed(base_seed, i) for i in range(restarts)]
    abnormal = set()
    flag_epochs = max(s0, 150)  # let the noiseless reference fully converge
    for seed in seeds:
        run = _ground_state_run(topo, h, eps, flag_epochs, scheme, None, seed)
        if run.final_loss > lam_min + local_min_gap:
            abnormal.add(seed)
    if len(abnormal) == len(seeds):
        raise ValueError("every restart seed converges to a local minimum")
    cells = []
    for ts in time_scales:
        for zz in zz_strengths:
            noise = base_noise.scaled(ts).with_zz(zz)
            run_fn = partial(_ground_state_run, topo, h, eps, s0, scheme, noise)
            stats = restart_ensemble(
                run_fn,
                restarts,
                base_seed,
                flag_fn=lambda r: r.seed in abnormal,
                workers=workers,
            )
            kept = [
                v
                for v, bad in zip(stats.final_losses, stats.local_minimum_flags)
                if not bad
            ]
            cells.append(
                SweepCell(ts, zz, float(np.mean(kept)), restarts, stats.num_excluded)
            )
    return cells


def _ground_state_run(topo, h, eps, s0, scheme, noise, seed):
    from .network import random_params
    from .training import train_ground_state

    init = random_params(topo, np.random.default_rng(seed))
    forward_fn = noisy_forward_fn(noise) if noise is not None else None
    return train_ground_state(
        topo, h, init, eps, s0, scheme, seed=seed, forward_fn=forward_fn
    )
