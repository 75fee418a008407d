import numpy as np
import pytest

from dqnn import engine, linalg, training
from dqnn.gates import Z, ket_to_density, product_ket
from dqnn.network import dqnn1_topology, dqnn2_topology, random_params
from dqnn.training import (
    ChannelDataset,
    build_channel_dataset,
    derive_seed,
    generalization_test,
    make_target_channel,
    preset_input_states,
    random_input_state,
    restart_ensemble,
    train_channel,
    train_ground_state,
)


class TestDatasets:
    def test_presets(self):
        s1 = preset_input_states("dqnn1")
        s2 = preset_input_states("dqnn2")
        assert len(s1) == 4 and s1[0].shape == (4, 4)
        assert len(s2) == 3 and s2[0].shape == (2, 2)
        for rho in s1 + s2:
            linalg.check_density_matrix(rho)

    def test_channel_dataset_targets_from_forward_pass(self, rng):
        topo = dqnn2_topology()
        target = make_target_channel(topo, 7)
        inputs = preset_input_states("dqnn2")
        ds = build_channel_dataset(topo, target, inputs)
        assert len(ds) == 3
        for rho_in, tau in ds.pairs:
            np.testing.assert_allclose(
                tau, engine.forward_pass(rho_in, topo, target)[-1], atol=1e-12
            )

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            ChannelDataset([])

    def test_random_input_state_is_pure_product(self, rng):
        rho = random_input_state(2, rng)
        linalg.check_density_matrix(rho)
        assert abs(np.trace(rho @ rho) - 1) < 1e-10  # purity
        # product: marginal purity is also one
        for q in (0, 1):
            m = linalg.partial_trace(rho, [q], 2)
            assert abs(np.trace(m @ m) - 1) < 1e-10


class TestChannelTraining:
    def test_fidelity_curve_increases(self, rng):
        topo = dqnn2_topology()
        target = make_target_channel(topo, derive_seed(11, -1))
        ds = build_channel_dataset(topo, target, preset_input_states("dqnn2"))
        init = random_params(topo, np.random.default_rng(derive_seed(11, 0)))
        run = train_channel(topo, ds, init, eps=0.3, s0=60, seed=11)
        assert run.final_loss > run.curve[0]
        assert run.final_loss > 0.9
        assert len(run.curve) == 60

    def test_target_parameters_reach_unit_fidelity(self, rng):
        topo = dqnn2_topology()
        target = make_target_channel(topo, 3)
        ds = build_channel_dataset(topo, target, preset_input_states("dqnn2"))
        run = train_channel(topo, ds, target, eps=0.1, s0=2)
        assert run.final_loss > 1 - 1e-9
        assert run.curve[0] > 1 - 1e-9

    def test_shift_scheme_matches_analytic(self, rng):
        topo = dqnn2_topology()
        target = make_target_channel(topo, 5)
        ds = build_channel_dataset(topo, target, preset_input_states("dqnn2"))
        init = random_params(topo, np.random.default_rng(19))
        a = train_channel(topo, ds, init, eps=0.2, s0=8, scheme="analytic")
        s = train_channel(topo, ds, init, eps=0.2, s0=8, scheme="shift")
        np.testing.assert_allclose(a.curve, s.curve, atol=1e-10)
        assert abs(a.final_loss - s.final_loss) < 1e-10

    def test_init_params_preserved(self, rng):
        topo = dqnn2_topology()
        target = make_target_channel(topo, 5)
        ds = build_channel_dataset(topo, target, preset_input_states("dqnn2"))
        init = random_params(topo, np.random.default_rng(19))
        before = list(init.theta_items())
        run = train_channel(topo, ds, init, eps=0.2, s0=3)
        assert list(run.init_params.theta_items()) == before
        assert list(init.theta_items()) == before  # caller's copy untouched

    def test_bad_hyperparameters(self, rng):
        topo = dqnn2_topology()
        ds = build_channel_dataset(topo, make_target_channel(topo, 1),
                                   preset_input_states("dqnn2"))
        init = random_params(topo, rng)
        with pytest.raises(ValueError):
            train_channel(topo, ds, init, eps=-1.0, s0=10)
        with pytest.raises(ValueError):
            train_channel(topo, ds, init, eps=0.1, s0=0)


class TestGroundStateTraining:
    def test_single_qubit_pauli_z(self):
        topo = dqnn2_topology()
        init = random_params(topo, np.random.default_rng(2))
        run = train_ground_state(topo, Z.copy(), init, eps=0.2, s0=120, seed=2)
        assert run.final_loss < -0.999  # ground energy of Z is -1
        # the energy curve is monotonically non-increasing for small steps
        diffs = np.diff(run.curve)
        assert (diffs < 1e-3).all()

    def test_molecular_hamiltonian_descent(self):
        g = [-0.4804, 0.3435, -0.4347, 0.5716, 0.091, 0.091]
        h = engine.build_molecular_hamiltonian(g)
        topo = dqnn1_topology()
        init = random_params(topo, np.random.default_rng(4))
        run = train_ground_state(topo, h, init, eps=0.1, s0=80, seed=4)
        lam = np.linalg.eigvalsh(h)[0]
        assert run.final_loss < run.curve[0]
        assert run.final_loss > lam - 1e-9  # bounded below by the exact energy

    def test_non_hermitian_rejected(self, rng):
        topo = dqnn2_topology()
        init = random_params(topo, rng)
        bad = np.array([[0, 1], [0, 0]], dtype=complex)
        with pytest.raises(ValueError):
            train_ground_state(topo, bad, init, eps=0.1, s0=5)

    def test_dimension_mismatch_rejected(self, rng):
        topo = dqnn1_topology()
        init = random_params(topo, rng)
        with pytest.raises(ValueError):
            train_ground_state(topo, Z.copy(), init, eps=0.1, s0=5)


class TestGeneralization:
    def test_target_network_generalizes_perfectly(self):
        topo = dqnn2_topology()
        target = make_target_channel(topo, 13)
        res = generalization_test(topo, target, target, num_states=25, seed=99)
        assert res["mean"] > 1 - 1e-9
        assert res["fidelities"].shape == (25,)
        assert res["hist_counts"].sum() == 25

    def test_deterministic_in_seed(self):
        topo = dqnn2_topology()
        target = make_target_channel(topo, 13)
        other = make_target_channel(topo, 14)
        a = generalization_test(topo, other, target, num_states=10, seed=5)
        b = generalization_test(topo, other, target, num_states=10, seed=5)
        np.testing.assert_array_equal(a["fidelities"], b["fidelities"])

    def test_bad_state_count(self):
        topo = dqnn2_topology()
        target = make_target_channel(topo, 13)
        with pytest.raises(ValueError):
            generalization_test(topo, target, target, num_states=0, seed=1)


def _tiny_run(seed):
    topo = dqnn2_topology()
    init = random_params(topo, np.random.default_rng(seed))
    return train_ground_state(topo, Z.copy(), init, eps=0.2, s0=25, seed=seed)


class TestEnsembles:
    def test_derive_seed_deterministic_and_distinct(self):
        assert derive_seed(42, 0) == derive_seed(42, 0)
        assert derive_seed(42, 0) != derive_seed(42, 1)
        assert derive_seed(42, 0) != derive_seed(43, 0)

    def test_serial_matches_parallel(self):
        serial = restart_ensemble(_tiny_run, 3, 42, workers=0)
        parallel = restart_ensemble(_tiny_run, 3, 42, workers=2)
        np.testing.assert_allclose(serial.final_losses, parallel.final_losses, atol=0)
        for a, b in zip(serial.runs, parallel.runs):
            np.testing.assert_allclose(a.curve, b.curve, atol=0)

    def test_flagging_and_mean(self):
        stats = restart_ensemble(_tiny_run, 4, 7, flag_fn=lambda r: r.seed % 2 == 0)
        assert len(stats.final_losses) == 4
        assert stats.num_excluded == sum(s % 2 == 0 for s in
                                         [r.seed for r in stats.runs])
        if stats.num_excluded < 4:
            kept = [v for v, bad in zip(stats.final_losses, stats.local_minimum_flags)
                    if not bad]
            assert abs(stats.mean_converged() - np.mean(kept)) < 1e-15

    def test_all_flagged_raises(self):
        stats = restart_ensemble(_tiny_run, 2, 7, flag_fn=lambda r: True)
        with pytest.raises(ValueError):
            stats.mean_converged()

    def test_zero_restarts_rejected(self):
        with pytest.raises(ValueError):
            restart_ensemble(_tiny_run, 0, 7)
