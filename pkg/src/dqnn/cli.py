"""Reproducible experiment driver with one subcommand per experiment."""

from __future__ import annotations

import json
import os
import time
from functools import partial
from pathlib import Path

import click
import numpy as np

from . import engine, linalg, report, tomography, training
from .gates import ket_to_density, product_ket
from .network import (
    NetworkParams,
    NetworkTopology,
    PerceptronParams,
    dqnn1_topology,
    dqnn2_topology,
    random_params,
)
from .noise import NoiseModel, baseline_noise, noise_sweep, noisy_forward_fn, uniform_noise
from .training import derive_seed

ARTIFACT_VERSION = 1
WORKERS_ENV = "DQNN_WORKERS"

DEFAULTS = {
    "seed": 1234,
    "learning_rate": 0.1,
    "epochs": 200,
    "gradient": "analytic",
    "restarts": 1,
    "num_test_states": 100,
    "local_min_gap": 0.05,
}


def _workers() -> int:
    try:
        return int(os.environ.get(WORKERS_ENV, "0"))
    except ValueError:
        return 0


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"cannot read config {path}: {exc}")


def resolve(config: dict, overrides: dict) -> dict:
    """Defaults < config file < CLI flags."""
    out = dict(DEFAULTS)
    out.update(config)
    out.update({k: v for k, v in overrides.items() if v is not None})
    return out


def topology_from_config(cfg: dict) -> NetworkTopology:
    spec = cfg.get("topology", "dqnn1")
    table = cfg.get("order_preset", "formula") == "table"
    if spec == "dqnn1":
        return dqnn1_topology(table_order=table)
    if spec == "dqnn2":
        return dqnn2_topology()
    if isinstance(spec, dict) and "widths" in spec:
        return NetworkTopology(widths=tuple(spec["widths"]))
    raise click.ClickException(f"unknown topology {spec!r}")


def input_states_from_config(cfg: dict, topo: NetworkTopology):
    if "inputs" in cfg:
        kets = [tuple(names) for names in cfg["inputs"]]
    elif topo.widths == (2, 2, 2):
        kets = training.DQNN1_INPUT_KETS
    elif set(topo.widths) == {1}:
        kets = training.DQNN2_INPUT_KETS
    else:
        raise click.ClickException("no input-state preset for this topology; set 'inputs'")
    for names in kets:
        if len(names) != topo.widths[0]:
            raise click.ClickException(f"input {names} does not match the input width")
    return [ket_to_density(product_ket(names)) for names in kets]


def hamiltonian_from_config(cfg: dict) -> np.ndarray:
    block = cfg.get("hamiltonian")
    if block is None:
        raise click.ClickException("ground-state task requires a 'hamiltonian' block")
    if isinstance(block, dict) and "path" in block:
        block = load_config(block["path"])
    if "coefficients" in block:
        return engine.build_molecular_hamiltonian(block["coefficients"])
    if block.get("pauli") == "Z":
        from .gates import Z

        return Z.copy()
    raise click.ClickException("hamiltonian block needs 'coefficients' or 'pauli'")


def noise_from_config(cfg: dict, topo: NetworkTopology) -> NoiseModel | None:
    block = cfg.get("noise")
    if block is None:
        return None
    if isinstance(block, str):
        block = load_config(block)
    zz = float(block.get("zz", 0.0))
    if block.get("baseline", False):
        model = baseline_noise(zz=zz)
    elif "t1" in block and "t2" in block:
        if isinstance(block["t1"], (int, float)):
            model = uniform_noise(topo, float(block["t1"]), float(block["t2"]), zz=zz)
        else:
            model = NoiseModel(
                t1=tuple(map(tuple, block["t1"])),
                t2=tuple(map(tuple, block["t2"])),
                zz=zz,
            )
    else:
        raise click.ClickException("noise block needs 'baseline': true or t1/t2 values")
    return model.scaled(float(block.get("time_scale", 1.0)))


def params_to_json(topo: NetworkTopology, params: NetworkParams) -> dict:
    return {
        "widths": list(topo.widths),
        "interfaces": [
            {
                f"{i},{j}": {"theta1": p.theta1, "theta2": p.theta2, "phi": p.phi}
                for (i, j), p in sorted(d.items())
            }
            for d in params.interfaces
        ],
    }


def params_from_json(doc: dict) -> tuple:
    topo = NetworkTopology(widths=tuple(doc["widths"]))
    interfaces = []
    for d in doc["interfaces"]:
        out = {}
        for key, p in d.items():
            i, j = (int(v) for v in key.split(","))
            out[(i, j)] = PerceptronParams(p["theta1"], p["theta2"], p["phi"])
        interfaces.append(out)
    return topo, NetworkParams(interfaces)


def write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(f"{v:.12g}" if isinstance(v, float) else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def write_metadata(out: Path, cfg: dict, extra=None) -> None:
    doc = {"artifact_version": ARTIFACT_VERSION, "config": cfg}
    if extra:
        doc.update(extra)
    write_json(out / "metadata.json", doc)


def _serializable(cfg: dict) -> dict:
    return {k: v for k, v in cfg.items() if isinstance(v, (str, int, float, bool, list, dict))}


def _tomographic_forward(shots: int, seed_base: int):
    """Route every layer state through sampled tomography + reconstruction."""
    counter = [0]

    def forward(rho_prev, spec, interface):
        out = engine.forward_channel(rho_prev, spec)
        counter[0] += 1
        records = tomography.sample_measurements(
            out, spec.down_width, shots, derive_seed(seed_base, counter[0])
        )
        return tomography.reconstruct_state(records, spec.down_width)

    return forward


common_options = [
    click.option("--config", "config_path", type=click.Path(exists=True), default=None),
    click.option("--seed", type=int, default=None),
    click.option("--out", "out_dir", type=click.Path(), default=None),
    click.option("--restarts", type=int, default=None),
    click.option("--gradient", type=click.Choice(["analytic", "shift"]), default=None),
    click.option("--noise", "noise_path", type=click.Path(exists=True), default=None),
    click.option("--tomographic", is_flag=True, default=False),
    click.option("--plot/--no-plot", default=True),
]


def with_common_options(fn):
    for opt in reversed(common_options):
        fn = opt(fn)
    return fn


def _prepare(config_path, overrides) -> dict:
    cfg = resolve(load_config(config_path), overrides)
    if cfg.get("out") is None:
        raise click.ClickException("an output directory is required (--out or 'out')")
    return cfg


def _forward_fn_for(cfg, topo):
    noise = noise_from_config(cfg, topo)
    if cfg.get("tomographic"):
        if noise is not None:
            raise click.ClickException("tomographic mode with noise is not supported")
        shots = int(cfg.get("shots", 10_000))
        return _tomographic_forward(shots, int(cfg["seed"]) ^ 0x5F5F)
    return noisy_forward_fn(noise) if noise is not None else None


@click.group()
def main():
    """Train and analyze layered deep quantum neural networks."""


def _channel_run(topo, dataset, eps, s0, scheme, forward_fn, seed):
    init = random_params(topo, np.random.default_rng(seed))
    return training.train_channel(
        topo, dataset, init, eps, s0, scheme, seed=seed, forward_fn=forward_fn
    )


def _ground_run(topo, h, eps, s0, scheme, forward_fn, seed):
    init = random_params(topo, np.random.default_rng(seed))
    return training.train_ground_state(
        topo, h, init, eps, s0, scheme, seed=seed, forward_fn=forward_fn
    )


def _write_runs(out, topo, stats, curve_header, plot, ylabel, hline=None):
    curves = {}
    rows = []
    for idx, run in enumerate(stats.runs):
        run_dir = out / f"run_{idx:03d}"
        run_dir.mkdir(parents=True, exist_ok=True)
        write_csv(
            run_dir / "curve.csv",
            curve_header,
            [(e, float(v)) for e, v in enumerate(run.curve)],
        )
        write_json(run_dir / "params_init.json", params_to_json(topo, run.init_params))
        write_json(run_dir / "params_final.json", params_to_json(topo, run.final_params))
        curves[f"run {idx}"] = run.curve
        rows.append(
            (idx, run.seed, float(run.final_loss), int(run.converged),
             int(stats.local_minimum_flags[idx]))
        )
    write_csv(
        out / "summary.csv",
        ("run", "seed", "final_loss", "converged", "local_minimum"),
        rows,
    )
    if plot:
        report.plot_curves(curves, ylabel, out / "curves.png", hline=hline)


@main.command("train-channel")
@with_common_options
def cmd_train_channel(config_path, seed, out_dir, restarts, gradient, noise_path,
                      tomographic, plot):
    """Learn a random target channel; writes per-run fidelity curves."""
    overrides = {"seed": seed, "out": out_dir, "restarts": restarts,
                 "gradient": gradient, "noise": noise_path,
                 "tomographic": tomographic or None}
    cfg = _prepare(config_path, overrides)
    topo = topology_from_config(cfg)
    inputs = input_states_from_config(cfg, topo)
    base_seed = int(cfg["seed"])
    forward_fn = _forward_fn_for(cfg, topo)
    start = time.time()

    target = training.make_target_channel(topo, derive_seed(base_seed, -1))
    dataset = training.build_channel_dataset(topo, target, inputs)
    run_fn = partial(
        _channel_run, topo, dataset, float(cfg["learning_rate"]), int(cfg["epochs"]),
        cfg["gradient"], forward_fn,
    )
    stats = training.restart_ensemble(
        run_fn, int(cfg["restarts"]), base_seed, workers=_workers()
    )

    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "params_target.json", params_to_json(topo, target))
    _write_runs(out, topo, stats, ("epoch", "mean_fidelity"), cfg.get("plot", plot),
                "mean fidelity")
    write_metadata(out, _serializable(cfg), {
        "task": "channel",
        "mean_final_fidelity": float(np.mean(stats.final_losses)),
        "wall_time_s": time.time() - start,
    })
    click.echo(f"mean final fidelity: {np.mean(stats.final_losses):.6f}")


@main.command("train-ground")
@with_common_options
def cmd_train_ground(config_path, seed, out_dir, restarts, gradient, noise_path,
                     tomographic, plot):
    """Minimize the output-state energy of a configured Hamiltonian."""
    overrides = {"seed": seed, "out": out_dir, "restarts": restarts,
                 "gradient": gradient, "noise": noise_path,
                 "tomographic": tomographic or None}
    cfg = _prepare(config_path, overrides)
    cfg.setdefault("epochs", 100)
    topo = topology_from_config(cfg)
    h = hamiltonian_from_config(cfg)
    if h.shape != (2 ** topo.widths[-1],) * 2:
        raise click.ClickException("Hamiltonian does not match the output layer width")
    base_seed = int(cfg["seed"])
    forward_fn = _forward_fn_for(cfg, topo)
    lam_min = float(np.linalg.eigvalsh(h)[0])
    gap = float(cfg["local_min_gap"])
    start = time.time()

    run_fn = partial(
        _ground_run, topo, h, float(cfg["learning_rate"]), int(cfg["epochs"]),
        cfg["gradient"], forward_fn,
    )
    stats = training.restart_ensemble(
        run_fn, int(cfg["restarts"]), base_seed,
        flag_fn=lambda r: r.final_loss > lam_min + gap, workers=_workers(),
    )

    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    _write_runs(out, topo, stats, ("epoch", "energy_hartree"), cfg.get("plot", plot),
                "energy (hartree)", hline=lam_min)
    kept = [v for v, bad in zip(stats.final_losses, stats.local_minimum_flags) if not bad]
    write_metadata(out, _serializable(cfg), {
        "task": "ground-state",
        "exact_ground_energy": lam_min,
        "mean_converged_energy": float(np.mean(kept)) if kept else None,
        "n_excluded": stats.num_excluded,
        "wall_time_s": time.time() - start,
    })
    click.echo(
        f"exact ground energy: {lam_min:.6f}; "
        f"mean converged energy: {np.mean(kept) if kept else float('nan'):.6f} "
        f"({stats.num_excluded} excluded)"
    )


@main.command("sweep-noise")
@with_common_options
def cmd_sweep_noise(config_path, seed, out_dir, restarts, gradient, noise_path,
                    tomographic, plot):
    """Grid of mean converged energies over (T/T0, ZZ strength)."""
    overrides = {"seed": seed, "out": out_dir, "restarts": restarts,
                 "gradient": gradient, "noise": noise_path}
    cfg = _prepare(config_path, overrides)
    cfg.setdefault("epochs", 60)
    topo = topology_from_config(cfg)
    h = hamiltonian_from_config(cfg)
    base_noise_model = noise_from_config(cfg, topo)
    if base_noise_model is None:
        raise click.ClickException("sweep-noise requires a noise block")
    block = cfg.get("noise")
    if isinstance(block, str):
        block = load_config(block)
    scales = block.get("time_scales", [1.0])
    strengths = block.get("zz_strengths", [base_noise_model.zz])
    if not scales or not strengths:
        raise click.ClickException("noise block needs non-empty sweep grids")
    start = time.time()

    cells = noise_sweep(
        topo, h, base_noise_model, scales, strengths,
        restarts=int(cfg["restarts"]), base_seed=int(cfg["seed"]),
        eps=float(cfg["learning_rate"]), s0=int(cfg["epochs"]),
        scheme=cfg["gradient"],
        local_min_gap=float(block.get("local_min_gap", 0.3)),
        workers=_workers(),
    )

    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_csv(
        out / "sweep.csv",
        ("time_scale", "zz_strength", "mean_energy", "n_runs", "n_excluded"),
        [(float(c.time_scale), float(c.zz), float(c.mean_energy), c.n_runs, c.n_excluded)
         for c in cells],
    )
    if cfg.get("plot", plot):
        report.plot_sweep(cells, out / "sweep.png")
    write_metadata(out, _serializable(cfg), {
        "task": "sweep-noise", "wall_time_s": time.time() - start,
    })
    click.echo(f"wrote {len(cells)} sweep cells")


@main.command("eval-generalization")
@click.option("--params", "params_path", type=click.Path(exists=True), required=True)
@click.option("--target", "target_path", type=click.Path(exists=True), required=True)
@click.option("--init-params", "init_path", type=click.Path(exists=True), default=None)
@with_common_options
def cmd_eval_generalization(params_path, target_path, init_path, config_path, seed,
                            out_dir, restarts, gradient, noise_path, tomographic, plot):
    """Fidelity distribution of a trained network over random input states."""
    overrides = {"seed": seed, "out": out_dir}
    cfg = _prepare(config_path, overrides)
    topo, trained = params_from_json(load_config(params_path))
    _, target = params_from_json(load_config(target_path))
    if init_path is None:
        sibling = Path(params_path).with_name("params_init.json")
        init_path = sibling if sibling.exists() else None
    if init_path is None:
        raise click.ClickException("untrained baseline missing: pass --init-params")
    _, untrained = params_from_json(load_config(init_path))
    n_states = int(cfg["num_test_states"])
    base_seed = int(cfg["seed"])

    res_trained = training.generalization_test(topo, trained, target, n_states, base_seed)
    res_untrained = training.generalization_test(topo, untrained, target, n_states, base_seed)

    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_csv(
        out / "fidelities.csv",
        ("state", "fidelity_trained", "fidelity_untrained"),
        [(k, float(a), float(b))
         for k, (a, b) in enumerate(zip(res_trained["fidelities"],
                                        res_untrained["fidelities"]))],
    )
    edges = res_trained["hist_edges"]
    write_csv(
        out / "histogram.csv",
        ("bin_low", "bin_high", "trained_count", "untrained_count"),
        [(float(edges[k]), float(edges[k + 1]),
          int(res_trained["hist_counts"][k]), int(res_untrained["hist_counts"][k]))
         for k in range(len(edges) - 1)],
    )
    if cfg.get("plot", plot):
        report.plot_histogram(edges, res_trained["hist_counts"],
                              res_untrained["hist_counts"], out / "histogram.png")
    write_metadata(out, _serializable(cfg), {
        "task": "eval-generalization",
        "mean_trained": res_trained["mean"],
        "mean_untrained": res_untrained["mean"],
    })
    click.echo(
        f"trained mean fidelity: {res_trained['mean']:.6f}; "
        f"untrained: {res_untrained['mean']:.6f}"
    )


@main.command("tomo-demo")
@with_common_options
def cmd_tomo_demo(config_path, seed, out_dir, restarts, gradient, noise_path,
                  tomographic, plot):
    """Sample a named state, reconstruct it and report the fidelity."""
    overrides = {"seed": seed, "out": out_dir}
    cfg = _prepare(config_path, overrides)
    names = cfg.get("state", ["+"])
    if isinstance(names, str):
        names = [names]
    try:
        rho = ket_to_density(product_ket(names))
    except KeyError as exc:
        raise click.ClickException(f"unknown state label {exc}")
    n = len(names)
    shots = int(cfg.get("shots", 10_000))
    exact = bool(cfg.get("exact", False))
    base_seed = int(cfg["seed"])

    if exact:
        records = tomography.exact_records(rho, n)
    else:
        records = tomography.sample_measurements(rho, n, shots, base_seed)
    recon = tomography.reconstruct_state(records, n)
    fid = linalg.fidelity(recon, rho)
    residual = float(np.linalg.norm(recon - rho))

    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    lines = []
    for rec in records:
        counts = "exact" if rec.counts is None else " ".join(map(str, rec.counts))
        lines.append(f"{rec.basis_label} {rec.shots} {counts}")
    (out / "records.txt").write_text("\n".join(lines) + "\n")
    write_json(out / "summary.json", {
        "state": names, "shots": shots, "exact": exact,
        "fidelity": fid, "frobenius_residual": residual,
    })
    write_metadata(out, _serializable(cfg), {"task": "tomo-demo"})
    click.echo(f"reconstruction fidelity: {fid:.6f}")


if __name__ == "__main__":
    main()
