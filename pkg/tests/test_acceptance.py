"""Release acceptance checks.

One test per numbered criterion in the project's acceptance checklist;
``pytest -v tests/test_acceptance.py`` therefore prints one pass/fail
line per criterion.  These are the end-to-end guarantees a release must
hold; the finer-grained behavior lives in the per-module test files.
"""

import datetime as dt

import numpy as np
import pytest
from scipy.stats import ortho_group, special_ortho_group

from tensor_align.align import alt_alignment, procrustes, tucker_phi
from tensor_align.decompose import cp_als, factor_congruence
from tensor_align.inference import (
    bonferroni,
    disattenuate,
    permutation_test,
    power_simulation,
)
from tensor_align.market_stats import build_stats_matrix
from tensor_align.tensor_core import (
    FEATURES,
    MarketTensor,
    hourly_grid,
    synth_tensor,
    znormalize_feature_slices,
)

UTC = dt.timezone.utc


# ---------------------------------------------------------------------------
# 1. rotation optimality against brute force


def _candidate_losses(a, b, qs):
    rotated = np.einsum("np,kpq->knq", a, qs)
    return ((rotated - b[None]) ** 2).sum(axis=(1, 2))


def test_01_procrustes_rotation_is_global_optimum():
    """SVD rotation beats 10,000 brute-force candidates on 200 random pairs."""
    rng = np.random.default_rng(101)
    thetas = np.linspace(0.0, 2.0 * np.pi, 10_000, endpoint=False)
    cos, sin = np.cos(thetas), np.sin(thetas)
    planar = np.stack(
        [np.stack([cos, -sin], axis=-1), np.stack([sin, cos], axis=-1)], axis=1
    )
    flips = planar @ np.diag([1.0, -1.0])  # reflections too
    grid2 = np.concatenate([planar, flips])
    grids = {
        2: grid2,
        3: ortho_group.rvs(dim=3, size=10_000, random_state=102),
        4: ortho_group.rvs(dim=4, size=10_000, random_state=103),
    }
    counts = {2: 67, 3: 67, 4: 66}
    checked = 0
    for p, n_pairs in counts.items():
        for _ in range(n_pairs):
            a = rng.normal(size=(37, p))
            b = rng.normal(size=(37, p))
            q = procrustes(a, b).q
            svd_loss = ((a @ q - b) ** 2).sum()
            best_candidate = _candidate_losses(a, b, grids[p]).min()
            assert svd_loss <= best_candidate + 1e-9
            checked += 1
    assert checked == 200


# ---------------------------------------------------------------------------
# 2. congruence coefficient axioms


def test_02_congruence_axioms_hold_on_ten_thousand_pairs():
    """Boundedness, sign-of-scale equivariance, unity iff positive scaling."""
    rng = np.random.default_rng(201)
    violations = 0
    for _ in range(10_000):
        k = int(rng.integers(2, 12))
        x = rng.normal(size=k)
        y = rng.normal(size=k)
        c = float(rng.uniform(0.1, 10.0)) * (1 if rng.random() < 0.5 else -1)
        phi = tucker_phi(x, y)
        ok = (
            abs(phi) <= 1.0 + 1e-12
            and tucker_phi(c * x, y) == pytest.approx(np.sign(c) * phi, abs=1e-12)
            and tucker_phi(x, abs(c) * x) >= 1.0 - 1e-12
            and tucker_phi(x, -abs(c) * x) <= -(1.0 - 1e-12)
            and abs(phi) < 1.0  # random pair is never exactly collinear
        )
        violations += not ok
    assert violations == 0


# ---------------------------------------------------------------------------
# 3. CP-ALS planted-factor recovery and seed stability


def test_03_cp_als_recovers_planted_factors_across_seeds():
    t, planted = synth_tensor(shape=(200, 20, 5), rank=2, noise_sd=0.05, seed=301)
    model = cp_als(t, rank=2, seed=42)
    assert model.explained_variance >= 0.90
    assert factor_congruence(model.asset_factors, planted.asset_factors) >= 0.99
    history = np.asarray(model.fit_history)
    assert np.all(np.diff(history) <= 1e-12)

    factors = [cp_als(t, rank=2, seed=s).asset_factors for s in range(10)]
    for i in range(10):
        for j in range(i + 1, 10):
            assert factor_congruence(factors[i], factors[j]) >= 0.999


# ---------------------------------------------------------------------------
# 4. detection asymmetry: market structure found, fake narratives not


def _factor_market(n_hours=400, n_assets=37, seed=401):
    """Raw OHLCV tensor whose assets load on two latent return factors."""
    rng = np.random.default_rng(seed)
    t0 = dt.datetime(2023, 1, 1, tzinfo=UTC)
    grid = tuple(hourly_grid(t0, t0 + dt.timedelta(hours=n_hours - 1)))
    betas = rng.normal(0.0, 1.0, size=(n_assets, 2))
    f1 = 0.008 * rng.standard_normal(n_hours - 1)
    f2 = 0.006 * rng.standard_normal(n_hours - 1)
    values = np.zeros((n_hours, n_assets, len(FEATURES)))
    for j in range(n_assets):
        steps = (
            betas[j, 0] * f1 + betas[j, 1] * f2
            + 0.003 * rng.standard_normal(n_hours - 1)
        )
        close = 50.0 * np.exp(np.concatenate([[0.0], np.cumsum(steps)]))
        opens = np.concatenate([[close[0]], close[:-1]])
        values[:, j, FEATURES.index("open")] = opens
        values[:, j, FEATURES.index("close")] = close
        values[:, j, FEATURES.index("high")] = 1.005 * np.maximum(opens, close)
        values[:, j, FEATURES.index("low")] = 0.995 * np.minimum(opens, close)
        values[:, j, FEATURES.index("volume")] = np.exp(
            rng.normal(3.0 + 0.5 * betas[j, 0], 0.25, n_hours)
        )
    assets = tuple(f"A{j:02d}" for j in range(n_assets))
    return MarketTensor(values, grid, assets, FEATURES, normalization="raw")


def test_04_statistics_align_with_factors_but_random_claims_do_not():
    tensor = _factor_market()
    stats = build_stats_matrix(tensor, vol_window=48)
    model = cp_als(znormalize_feature_slices(tensor), rank=2, seed=42)

    detected = permutation_test(
        stats.values, model.asset_factors, n_permutations=1000, seed=42
    )
    assert detected.p_value < 0.01

    quiet = 0
    for trial in range(20):
        rng = np.random.default_rng(1000 + trial)
        fake_claims = rng.dirichlet(np.ones(10), size=37)
        result = permutation_test(
            fake_claims, model.asset_factors, n_permutations=500, seed=trial
        )
        quiet += result.p_value > 0.05
    assert quiet >= 17


# ---------------------------------------------------------------------------
# 5. power table for the planted-congruence generator


# Known deviation: the 0.65 reference sits below the chord of its own
# neighbors (interpolating 0.50->0.45 and 0.70->0.90 gives 0.79), while
# power curves of this generator are concave approaching 1; the measured
# value lands near 0.84 on every seed.  The simulation is kept faithful
# rather than tuned, so that row is expected to fail its +/-0.10 bound.
POWER_TARGETS = {0.30: 0.14, 0.50: 0.45, 0.65: 0.70, 0.70: 0.90}


@pytest.fixture(scope="module")
def power_rows():
    rows = power_simulation(
        37, sorted(POWER_TARGETS), iters=500, perms=200, seed=42
    )
    return {row.effect: row.power for row in rows}


@pytest.mark.parametrize("effect", sorted(POWER_TARGETS))
def test_05_power_within_ten_points_of_reference(power_rows, effect):
    power = power_rows[effect]
    target = POWER_TARGETS[effect]
    assert abs(power - target) <= 0.10, (
        f"power at effect {effect} is {power:.3f}, reference {target:.2f}"
    )


# ---------------------------------------------------------------------------
# 6. attenuation correction and multiple-testing threshold point checks


def test_06_disattenuation_and_bonferroni_reference_points():
    corrected = disattenuate(0.058, 0.30, 0.95)
    assert corrected.phi_disattenuated == pytest.approx(0.109, abs=1e-3)
    threshold = bonferroni([0.5] * 38, alpha=0.05).threshold
    assert threshold == pytest.approx(0.001316, abs=1e-6)


# ---------------------------------------------------------------------------
# 7. alternative-metric oracles


def _dcor_loop_oracle(a, b):
    """Textbook distance correlation via explicit double loops."""
    n = a.shape[0]
    da = np.zeros((n, n))
    db = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            da[i, j] = np.sqrt(((a[i] - a[j]) ** 2).sum())
            db[i, j] = np.sqrt(((b[i] - b[j]) ** 2).sum())

    def center(d):
        out = np.zeros_like(d)
        grand = d.mean()
        for i in range(n):
            for j in range(n):
                out[i, j] = d[i, j] - d[i].mean() - d[:, j].mean() + grand
        return out

    ca, cb = center(da), center(db)
    dcov_xy = (ca * cb).mean()
    dcov_xx = (ca * ca).mean()
    dcov_yy = (cb * cb).mean()
    if dcov_xy <= 0:
        return 0.0
    return float(np.sqrt(np.sqrt(dcov_xy**2 / (dcov_xx * dcov_yy))))


def test_07_alternative_metrics_match_independent_oracles():
    rng = np.random.default_rng(701)
    x = rng.normal(size=(25, 4))
    assert alt_alignment(x, x, "rv") == 1.0
    assert alt_alignment(x, x, "dcor") == 1.0

    for _ in range(50):
        n = int(rng.integers(8, 38))
        a = rng.normal(size=(n, int(rng.integers(2, 6))))
        b = rng.normal(size=(n, int(rng.integers(2, 6))))
        assert alt_alignment(a, b, "dcor") == pytest.approx(
            _dcor_loop_oracle(a, b), abs=1e-10
        )

    a = rng.normal(size=(37, 3))
    w = rng.normal(size=(3, 3)) + 4.0 * np.eye(3)
    assert alt_alignment(a, a @ w, "cca") >= 1 - 1e-6


# ---------------------------------------------------------------------------
# 8. permutation-test size under the null


def test_08_null_rejection_rate_is_calibrated():
    rejections = 0
    for trial in range(200):
        rng = np.random.default_rng(8000 + trial)
        a = rng.normal(size=(37, 3))
        b = rng.normal(size=(37, 3))
        result = permutation_test(a, b, n_permutations=200, seed=trial)
        rejections += result.p_value < 0.05
    size = rejections / 200
    assert 0.02 <= size <= 0.09, f"empirical size {size:.3f}"


# ---------------------------------------------------------------------------
# 9. published-dataset headline values (needs the external data drop)


@pytest.mark.skip(
    reason="requires the published market/corpus dataset; the build must "
    "pass without network access"
)
def test_09_published_headline_values_reproduce():
    pass


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
