import numpy as np
import pytest

from dqnn import linalg, tomography
from dqnn.gates import ket_to_density, product_ket
from dqnn.tomography import (
    TomographyRecord,
    basis_set,
    born_probabilities,
    exact_records,
    linear_inversion,
    reconstruct_state,
    sample_measurements,
)

from conftest import random_density, random_pure


class TestBases:
    def test_counts(self):
        assert len(basis_set(1)) == 4
        assert len(basis_set(2)) == 16

    def test_unitarity(self):
        for u in basis_set(2).values():
            np.testing.assert_allclose(u @ u.conj().T, np.eye(4), atol=1e-12)

    def test_ground_basis_is_computational(self):
        u = basis_set(1)["g"]
        np.testing.assert_allclose(u, np.eye(2), atol=1e-12)

    def test_probabilities_on_named_states(self):
        plus = ket_to_density(product_ket(["+"]))
        bases = basis_set(1)
        np.testing.assert_allclose(born_probabilities(plus, bases["+"]), [1, 0], atol=1e-12)
        np.testing.assert_allclose(born_probabilities(plus, bases["g"]), [0.5, 0.5], atol=1e-12)
        np.testing.assert_allclose(born_probabilities(plus, bases["i"]), [0.5, 0.5], atol=1e-12)

    def test_invalid_size(self):
        with pytest.raises(ValueError):
            basis_set(0)


class TestRecords:
    def test_counts_must_sum_to_shots(self):
        with pytest.raises(ValueError):
            TomographyRecord("g", 10, [3, 3])
        rec = TomographyRecord("g", 10, [7, 3])
        np.testing.assert_allclose(rec.frequencies, [0.7, 0.3])

    def test_sampling_is_deterministic(self, rng):
        rho = random_density(1, rng)
        a = sample_measurements(rho, 1, 500, seed=5)
        b = sample_measurements(rho, 1, 500, seed=5)
        for ra, rb in zip(a, b):
            np.testing.assert_array_equal(ra.counts, rb.counts)

    def test_sampling_covers_all_bases(self, rng):
        rho = random_density(2, rng)
        recs = sample_measurements(rho, 2, 100, seed=1)
        assert {r.basis_label for r in recs} == set(basis_set(2))
        assert all(r.counts.sum() == 100 for r in recs)

    def test_frequencies_converge_to_born_rule(self, rng):
        rho = random_density(1, rng)
        recs = sample_measurements(rho, 1, 200_000, seed=3)
        bases = basis_set(1)
        for rec in recs:
            p = born_probabilities(rho, bases[rec.basis_label])
            np.testing.assert_allclose(rec.frequencies, p, atol=5e-3)

    def test_zero_shots_rejected(self, rng):
        with pytest.raises(ValueError):
            sample_measurements(random_density(1, rng), 1, 0, seed=1)


class TestLinearInversion:
    def test_exact_frequencies_recover_state(self, rng):
        for n in (1, 2):
            rho = random_density(n, rng)
            recs = exact_records(rho, n)
            np.testing.assert_allclose(linear_inversion(recs, n), rho, atol=1e-10)

    def test_hermitian_unit_trace(self, rng):
        recs = sample_measurements(random_density(1, rng), 1, 200, seed=2)
        est = linear_inversion(recs, 1)
        assert linalg.is_hermitian(est)
        assert abs(np.trace(est).real - 1) < 1e-12

    def test_missing_basis_rejected(self, rng):
        recs = sample_measurements(random_density(1, rng), 1, 100, seed=2)[:-1]
        with pytest.raises(ValueError):
            linear_inversion(recs, 1)


class TestReconstruction:
    def test_matches_linear_inversion_on_exact_data(self, rng):
        """With infinite-shot frequencies both estimators agree with the truth."""
        for n in (1, 2):
            rho = random_density(n, rng)
            recs = exact_records(rho, n)
            mle = reconstruct_state(recs, n)
            lin = linear_inversion(recs, n)
            dist = 0.5 * np.abs(np.linalg.eigvalsh(mle - lin)).sum()
            assert dist < 1e-6
            assert linalg.fidelity(mle, rho) > 1 - 1e-6

    def test_output_is_physical(self, rng):
        recs = sample_measurements(random_pure(2, rng), 2, 300, seed=9)
        est = reconstruct_state(recs, 2)
        linalg.check_density_matrix(est)

    def test_high_shot_fidelity_single_qubit(self, rng):
        rho = random_pure(1, rng)
        recs = sample_measurements(rho, 1, 10_000, seed=17)
        est = reconstruct_state(recs, 1)
        assert linalg.fidelity(est, rho) > 0.99

    def test_high_shot_fidelity_two_qubits(self, rng):
        rho = random_pure(2, rng)
        recs = sample_measurements(rho, 2, 10_000, seed=17)
        est = reconstruct_state(recs, 2)
        assert linalg.fidelity(est, rho) > 0.98

    def test_deterministic(self, rng):
        recs = sample_measurements(random_density(1, rng), 1, 400, seed=23)
        a = reconstruct_state(recs, 1)
        b = reconstruct_state(recs, 1)
        np.testing.assert_array_equal(a, b)
