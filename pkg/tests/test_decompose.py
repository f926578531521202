"""CP-ALS, Tucker, explained variance, rank selection and factor matching."""

import numpy as np
import pytest

from tensor_align.decompose import (
    cp_als,
    explained_variance,
    factor_congruence,
    load_cp_model,
    mode_product,
    normalize_factors,
    save_cp_model,
    select_rank,
    tucker,
)
from tensor_align.tensor_core import synth_tensor


def rank1_tensor(t=12, a=6, f=5, seed=0):
    rng = np.random.default_rng(seed)
    u, v, w = rng.random(t) + 0.5, rng.random(a) + 0.5, rng.random(f) + 0.5
    return np.einsum("t,a,f->taf", u, v, w)


class TestExplainedVariance:
    def test_perfect_reconstruction_is_one(self):
        x = np.arange(24, dtype=float).reshape(2, 3, 4)
        assert explained_variance(x, x) == 1.0

    def test_mean_reconstruction_is_zero(self):
        x = np.arange(24, dtype=float).reshape(2, 3, 4)
        xhat = np.full_like(x, x.mean())
        assert explained_variance(x, xhat) == pytest.approx(0.0, abs=1e-15)

    def test_hand_case(self):
        # X = [1, 3], Xhat = [1, 2]: 1 - (0+1)/(1+1) = 0.5
        x = np.array([1.0, 3.0]).reshape(2, 1, 1)
        xhat = np.array([1.0, 2.0]).reshape(2, 1, 1)
        assert explained_variance(x, xhat) == pytest.approx(0.5)

    def test_constant_tensor_rejected(self):
        x = np.full((2, 2, 2), 3.0)
        with pytest.raises(ValueError, match="constant"):
            explained_variance(x, x)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shape"):
            explained_variance(np.zeros((2, 2, 2)), np.zeros((2, 2, 3)))


class TestCpAls:
    def test_exact_rank_one_recovery(self):
        model = cp_als(rank1_tensor(), rank=1, seed=0)
        assert model.explained_variance >= 1 - 1e-9
        assert model.converged

    def test_planted_rank_two_with_noise(self):
        t, planted = synth_tensor(shape=(80, 10, 5), rank=2, noise_sd=0.05, seed=3)
        model = cp_als(t, rank=2, seed=3)
        assert model.explained_variance >= 0.90
        assert factor_congruence(model.asset_factors, planted.asset_factors) >= 0.99

    def test_error_history_non_increasing(self):
        t, _ = synth_tensor(shape=(40, 8, 5), rank=2, noise_sd=0.05, seed=1)
        model = cp_als(t, rank=2, seed=1)
        errs = np.asarray(model.fit_history)
        assert errs.size >= 2
        assert np.all(np.diff(errs) <= 1e-10 * errs[:-1] + 1e-12)

    def test_canonical_form(self):
        t, _ = synth_tensor(shape=(40, 8, 5), rank=3, noise_sd=0.02, seed=2)
        model = cp_als(t, rank=3, seed=2)
        for m in (model.time_factors, model.asset_factors, model.feature_factors):
            np.testing.assert_allclose(np.linalg.norm(m, axis=0), 1.0, atol=1e-9)
        assert np.all(np.diff(model.weights) <= 0)
        assert np.all(model.weights > 0)
        for m in (model.asset_factors, model.feature_factors):
            for r in range(m.shape[1]):
                col = m[:, r]
                assert col[np.argmax(np.abs(col))] > 0

    def test_reconstruct_matches_naive_sum(self):
        t, _ = synth_tensor(shape=(12, 5, 5), rank=2, noise_sd=0.1, seed=4)
        model = cp_als(t, rank=2, seed=4)
        naive = np.zeros(t.values.shape)
        for r in range(model.rank):
            naive += model.weights[r] * np.einsum(
                "t,a,f->taf",
                model.time_factors[:, r],
                model.asset_factors[:, r],
                model.feature_factors[:, r],
            )
        recon = model.reconstruct()
        np.testing.assert_allclose(recon, naive, rtol=1e-9, atol=1e-12)

    def test_deterministic_given_seed(self):
        t, _ = synth_tensor(shape=(30, 6, 5), rank=2, noise_sd=0.05, seed=5)
        m1 = cp_als(t, rank=2, seed=7)
        m2 = cp_als(t, rank=2, seed=7)
        np.testing.assert_array_equal(m1.time_factors, m2.time_factors)
        np.testing.assert_array_equal(m1.asset_factors, m2.asset_factors)
        np.testing.assert_array_equal(m1.weights, m2.weights)
        assert m1.fit_history == m2.fit_history

    def test_seed_stability_of_asset_factors(self):
        t, _ = synth_tensor(shape=(60, 10, 5), rank=2, noise_sd=0.05, seed=6)
        models = [cp_als(t, rank=2, seed=s) for s in range(5)]
        for i in range(len(models)):
            for j in range(i + 1, len(models)):
                phi = factor_congruence(
                    models[i].asset_factors, models[j].asset_factors
                )
                assert phi >= 0.999, f"seeds {i},{j}: {phi}"

    def test_rank_validation(self):
        with pytest.raises(ValueError, match="rank"):
            cp_als(rank1_tensor(), rank=0)
        with pytest.raises(ValueError, match="max_iter"):
            cp_als(rank1_tensor(), rank=1, max_iter=0)

    def test_non_convergence_flagged_not_raised(self):
        t, _ = synth_tensor(shape=(30, 6, 5), rank=3, noise_sd=0.3, seed=8)
        model = cp_als(t, rank=3, seed=8, max_iter=2)
        assert not model.converged
        assert model.iterations == 2


class TestNormalizeFactors:
    def test_weight_is_product_of_column_norms(self):
        rng = np.random.default_rng(0)
        a, b, c = rng.normal(size=(6, 2)), rng.normal(size=(5, 2)), rng.normal(size=(4, 2))
        na, nb, nc, w = normalize_factors(a, b, c)
        expected = (
            np.linalg.norm(a, axis=0)
            * np.linalg.norm(b, axis=0)
            * np.linalg.norm(c, axis=0)
        )
        np.testing.assert_allclose(np.sort(w), np.sort(expected))
        # the rank-one sum is unchanged by renormalization
        before = np.einsum("tr,ar,fr->taf", a, b, c)
        after = np.einsum("tr,ar,fr,r->taf", na, nb, nc, w)
        np.testing.assert_allclose(before, after, rtol=1e-12)

    def test_zero_column_keeps_zero_weight(self):
        a = np.array([[1.0, 0.0], [0.0, 0.0]])
        b = np.array([[1.0, 0.0], [0.0, 0.0]])
        c = np.array([[1.0, 0.0], [0.0, 0.0]])
        _, _, _, w = normalize_factors(a, b, c)
        assert w[-1] == 0.0


class TestRankSelection:
    def test_planted_rank_two_selected(self):
        t, _ = synth_tensor(shape=(60, 10, 5), rank=2, noise_sd=0.05, seed=9)
        sel = select_rank(t, target_ev=0.90, max_rank=4, seed=9)
        assert sel.rank == 2
        assert sel.target_reached
        assert len(sel.ev_curve) == 4  # full curve kept for reporting
        assert sel.ev_curve[1] >= 0.90

    def test_unreachable_target_flagged(self):
        t, _ = synth_tensor(shape=(30, 6, 5), rank=4, noise_sd=0.5, seed=10)
        sel = select_rank(t, target_ev=0.999999, max_rank=2, seed=10)
        assert not sel.target_reached
        assert sel.rank == 2
        assert len(sel.ev_curve) == 2

    def test_target_validation(self):
        t = rank1_tensor()
        with pytest.raises(ValueError, match="target_ev"):
            select_rank(t, target_ev=0.0)
        with pytest.raises(ValueError, match="max_rank"):
            select_rank(t, max_rank=0)


class TestTucker:
    def test_full_ranks_lossless(self):
        x = np.random.default_rng(0).normal(size=(6, 5, 4))
        model = tucker(x, ranks=(6, 5, 4))
        assert model.explained_variance >= 1 - 1e-9

    def test_factor_orthonormality(self):
        t, _ = synth_tensor(shape=(40, 8, 5), rank=2, noise_sd=0.05, seed=11)
        model = tucker(t, ranks=(3, 2, 2))
        for m in (model.time_factors, model.asset_factors, model.feature_factors):
            np.testing.assert_allclose(m.T @ m, np.eye(m.shape[1]), atol=1e-9)

    def test_planted_low_rank_recovery(self):
        rng = np.random.default_rng(12)
        core = rng.normal(size=(2, 2, 2))
        factors = [np.linalg.qr(rng.normal(size=(d, 2)))[0] for d in (30, 8, 5)]
        x = mode_product(core, factors[0], 1)
        x = mode_product(x, factors[1], 2)
        x = mode_product(x, factors[2], 3)
        x += 0.01 * np.linalg.norm(x) / np.sqrt(x.size) * rng.normal(size=x.shape)
        model = tucker(x, ranks=(2, 2, 2))
        assert model.explained_variance >= 0.99

    def test_core_matches_projection(self):
        t, _ = synth_tensor(shape=(20, 6, 5), rank=2, noise_sd=0.05, seed=13)
        model = tucker(t, ranks=(2, 2, 2))
        proj = t.values
        for mode, m in enumerate(
            (model.time_factors, model.asset_factors, model.feature_factors), start=1
        ):
            proj = mode_product(proj, m.T, mode)
        np.testing.assert_allclose(model.core, proj, rtol=1e-9, atol=1e-12)

    def test_rank_validation(self):
        x = np.zeros((4, 3, 2))
        with pytest.raises(ValueError, match="ranks"):
            tucker(x, ranks=(5, 2, 2))
        with pytest.raises(ValueError, match="one rank per mode"):
            tucker(x, ranks=(2, 2))

    def test_deterministic(self):
        t, _ = synth_tensor(shape=(30, 6, 5), rank=2, noise_sd=0.05, seed=14)
        m1 = tucker(t, ranks=(2, 2, 2))
        m2 = tucker(t, ranks=(2, 2, 2))
        np.testing.assert_array_equal(m1.core, m2.core)
        np.testing.assert_array_equal(m1.asset_factors, m2.asset_factors)


class TestModeProduct:
    def test_matches_unfolding_definition(self):
        rng = np.random.default_rng(15)
        x = rng.normal(size=(4, 3, 5))
        m = rng.normal(size=(6, 3))
        out = mode_product(x, m, 2)
        assert out.shape == (4, 6, 5)
        for t in range(4):
            for f in range(5):
                np.testing.assert_allclose(out[t, :, f], m @ x[t, :, f])

    def test_invalid_mode(self):
        with pytest.raises(ValueError, match="mode"):
            mode_product(np.zeros((2, 2, 2)), np.eye(2), 4)


class TestFactorCongruence:
    def test_permutation_and_sign_invariant(self):
        rng = np.random.default_rng(16)
        b1 = rng.normal(size=(20, 3))
        b2 = b1[:, [2, 0, 1]] * np.array([1.0, -1.0, -1.0])
        assert factor_congruence(b1, b2) == pytest.approx(1.0)

    def test_random_matrices_near_zero(self):
        rng = np.random.default_rng(17)
        vals = [
            factor_congruence(rng.normal(size=(40, 2)), rng.normal(size=(40, 2)))
            for _ in range(20)
        ]
        assert np.mean(vals) < 0.3

    def test_column_count_mismatch_matches_min(self):
        rng = np.random.default_rng(18)
        b1 = rng.normal(size=(15, 3))
        assert factor_congruence(b1, b1[:, :2]) == pytest.approx(1.0)

    def test_split_sample_stability_on_stationary_tensor(self):
        t, _ = synth_tensor(shape=(160, 10, 5), rank=2, noise_sd=0.05, seed=19)
        first = cp_als(t.values[:80], rank=2, seed=19)
        second = cp_als(t.values[80:], rank=2, seed=19)
        assert factor_congruence(first.asset_factors, second.asset_factors) > 0.9

    def test_row_mismatch_rejected(self):
        with pytest.raises(ValueError, match="row"):
            factor_congruence(np.zeros((4, 2)), np.zeros((5, 2)))


class TestSerialization:
    def test_round_trip_bit_identical(self, tmp_path):
        t, _ = synth_tensor(shape=(20, 6, 5), rank=2, noise_sd=0.05, seed=20)
        model = cp_als(t, rank=2, seed=20)
        save_cp_model(model, tmp_path / "model")
        loaded = load_cp_model(tmp_path / "model")
        np.testing.assert_array_equal(loaded.time_factors, model.time_factors)
        np.testing.assert_array_equal(loaded.asset_factors, model.asset_factors)
        np.testing.assert_array_equal(loaded.feature_factors, model.feature_factors)
        np.testing.assert_array_equal(loaded.weights, model.weights)
        assert loaded.rank == model.rank
        assert loaded.explained_variance == model.explained_variance
        assert loaded.seed == model.seed
        assert loaded.converged == model.converged

    def test_wrong_manifest_kind_rejected(self, tmp_path):
        t, _ = synth_tensor(shape=(12, 5, 5), rank=1, noise_sd=0.05, seed=21)
        model = cp_als(t, rank=1, seed=21)
        save_cp_model(model, tmp_path / "model")
        manifest = tmp_path / "model" / "manifest.json"
        manifest.write_text(manifest.read_text().replace('"cp"', '"other"'))
        with pytest.raises(ValueError, match="not a CP model"):
            load_cp_model(tmp_path / "model")
