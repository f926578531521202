"""Statistical inference for alignment scores.

The workhorse is a one-sided permutation test: the observed association
between two row-aligned matrices is compared against the distribution
obtained by permuting the rows of the second matrix, recomputing the full
score each time (including the Procrustes refit for the congruence metric).
The p-value is the plain unsmoothed estimator

    p = (1/B) * #{ b : score_b >= score_observed },

with the add-one smoothed variant available behind a flag.  On top of that
sit percentile bootstrap intervals (with bias diagnostics — resampled means
of the congruence score run high, so the bias estimate matters), a planted-
congruence power simulation, and the robustness battery: leave-one-out
entity impacts, category ablation, rolling windows, split-sample
cross-validation, attenuation correction, Bonferroni control, and
factor-loading decomposition.

All randomness is drawn from counter-based streams keyed by
(seed, consumer, iteration), so every replicate is reproducible independent
of execution order.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats as _sps

from ._rng import substream
from .align import alt_alignment, equalize_widths, matrix_congruence, tucker_phi
from .claims import ClaimsMatrix
from .decompose import cp_als, factor_congruence
from .market_stats import build_stats_matrix
from .tensor_core import (
    MarketTensor,
    per_asset_znormalize,
    to_returns,
    znormalize_feature_slices,
)

__all__ = [
    "resolve_metric",
    "PermutationReport",
    "permutation_test",
    "BootstrapReport",
    "bootstrap_ci",
    "PowerRow",
    "power_simulation",
    "leave_one_out",
    "feature_ablation",
    "RollingWindowResult",
    "RollingReport",
    "rolling_alignment",
    "SplitSampleReport",
    "split_sample",
    "DisattenuationResult",
    "disattenuate",
    "BonferroniResult",
    "bonferroni",
    "LoadingCell",
    "LoadingReport",
    "factor_loading_decomposition",
    "ScalingReport",
    "scaling_sensitivity",
]


def _phi_metric(a: np.ndarray, b: np.ndarray) -> float:
    """Mean |phi| after zero-padding to equal width and Procrustes rotation."""
    a2, b2 = equalize_widths(a, b, mode="pad")
    return matrix_congruence(a2, b2, rotate=True).mean_abs_phi


def resolve_metric(metric):
    """Turn a metric name or callable into ``f(a, b) -> float``.

    Names: ``phi`` (zero-pad + rotate + mean |phi|), ``rv``, ``dcor``,
    ``cca``, ``pls``.
    """
    if callable(metric):
        return metric, getattr(metric, "__name__", "custom")
    if metric == "phi":
        return _phi_metric, "phi"
    if metric in ("rv", "dcor", "cca", "pls"):
        return (lambda a, b, _m=metric: alt_alignment(a, b, _m)), metric
    raise ValueError(f"unknown metric {metric!r}")


def _rows(m) -> np.ndarray:
    if isinstance(m, ClaimsMatrix):
        return m.values
    if hasattr(m, "values") and not isinstance(m, np.ndarray):
        return np.asarray(m.values, dtype=float)
    return np.asarray(m, dtype=float)


@dataclass(frozen=True)
class PermutationReport:
    """Observed score, permutation null and one-sided p-value."""

    observed: float
    null_scores: np.ndarray
    p_value: float
    n_permutations: int
    seed: int
    metric: str
    smoothed: bool = False


def permutation_test(a, b, metric="phi", n_permutations: int = 1000, seed: int = 42,
                     smoothed: bool = False) -> PermutationReport:
    """One-sided permutation test of association between row-aligned matrices.

    Rows of ``b`` are permuted (``a`` untouched); the metric — including any
    rotation fit — is recomputed per permutation.  ``smoothed=True`` switches
    to the add-one estimator (B+1 denominator); the default is the plain
    count / B form.
    """
    fn, name = resolve_metric(metric)
    a = _rows(a)
    b = _rows(b)
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"row mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] < 3:
        raise ValueError("need at least 3 rows to permute meaningfully")
    if n_permutations < 1:
        raise ValueError("n_permutations must be >= 1")
    observed = float(fn(a, b))
    n = a.shape[0]
    null = np.empty(n_permutations)
    for it in range(n_permutations):
        perm = substream(seed, "perm", it).permutation(n)
        null[it] = fn(a, b[perm])
    count = int((null >= observed).sum())
    if smoothed:
        p = (count + 1) / (n_permutations + 1)
    else:
        p = count / n_permutations
    return PermutationReport(
        observed=observed,
        null_scores=null,
        p_value=float(p),
        n_permutations=n_permutations,
        seed=seed,
        metric=name,
        smoothed=smoothed,
    )


@dataclass(frozen=True)
class BootstrapReport:
    """Percentile bootstrap interval with bias/skew diagnostics.

    Joint row resampling preserves the entity pairing.  Note the resampled
    congruence distribution is biased upward relative to the point estimate
    (duplicated rows make rotations easier to fit), so ``bias`` should be
    read alongside the interval.
    """

    point: float
    lower: float
    upper: float
    level: float
    bias: float
    skewness: float
    n_boot: int
    seed: int
    metric: str
    samples: np.ndarray


def bootstrap_ci(a, b, metric="phi", n_boot: int = 1000, seed: int = 42,
                 level: float = 0.95) -> BootstrapReport:
    """Percentile bootstrap CI for an association score (joint row resampling)."""
    fn, name = resolve_metric(metric)
    a = _rows(a)
    b = _rows(b)
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"row mismatch: {a.shape[0]} vs {b.shape[0]}")
    if not 0 < level < 1:
        raise ValueError(f"level must be in (0, 1), got {level}")
    if n_boot < 2:
        raise ValueError("n_boot must be >= 2")
    n = a.shape[0]
    point = float(fn(a, b))
    samples = np.empty(n_boot)
    for it in range(n_boot):
        idx = substream(seed, "boot", it).integers(0, n, size=n)
        samples[it] = fn(a[idx], b[idx])
    tail = 100.0 * (1.0 - level) / 2.0
    return BootstrapReport(
        point=point,
        lower=float(np.percentile(samples, tail)),
        upper=float(np.percentile(samples, 100.0 - tail)),
        level=level,
        bias=float(samples.mean() - point),
        # skew is 0/0 on a constant resample distribution; report 0 directly
        skewness=0.0 if np.ptp(samples) == 0.0 else float(_sps.skew(samples)),
        n_boot=n_boot,
        seed=seed,
        metric=name,
        samples=samples,
    )


# ---------------------------------------------------------------------------
# power


@dataclass(frozen=True)
class PowerRow:
    """Rejection rate of the permutation test at one planted effect size."""

    effect: float
    power: float
    iters: int
    perms: int
    n: int
    n_cols: int


def _planted_pair(n: int, n_cols: int, effect: float, rng) -> tuple:
    """Matrices with per-column congruence exactly ``effect``.

    Each column of b is effect * unit(a_j) + sqrt(1-effect^2) * unit(e_j)
    with e_j re-orthogonalized against a_j, so tucker_phi(a_j, b_j) equals
    the requested effect up to rounding.  Reference columns a_j are drawn
    uniform on [0, 1): like loading and claims-profile columns they carry a
    positive mean component, which survives row permutation and keeps the
    permutation null proportional to the effect instead of centered at zero.
    """
    a = rng.random((n, n_cols))
    eps = rng.standard_normal((n, n_cols))
    b = np.empty_like(a)
    for j in range(n_cols):
        aj = a[:, j]
        ahat = aj / np.linalg.norm(aj)
        ej = eps[:, j] - (ahat @ eps[:, j]) * ahat
        ehat = ej / np.linalg.norm(ej)
        a[:, j] = ahat
        b[:, j] = effect * ahat + np.sqrt(1.0 - effect**2) * ehat
    return a, b


def power_simulation(n: int, effect_sizes, iters: int = 500, perms: int = 200,
                     seed: int = 42, n_cols: int = 1, alpha: float = 0.05) -> list:
    """Monte Carlo power of the congruence permutation test.

    For each planted effect size, ``iters`` matrix pairs with that exact
    per-column congruence are generated and the rejection rate of the
    one-sided permutation test at ``alpha`` is recorded.  ``n_cols`` fixes
    the width of the simulated matrices; the default single column makes the
    test statistic the planted congruence itself, with no averaging across
    columns (averaging shrinks the null and inflates power).
    """
    if n < 4:
        raise ValueError("n must be >= 4")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    rows = []
    for e_idx, effect in enumerate(effect_sizes):
        effect = float(effect)
        if not 0 <= effect < 1:
            raise ValueError(f"effect sizes must be in [0, 1), got {effect}")
        rejections = 0
        for it in range(iters):
            rng = substream(seed, "power", e_idx, it)
            a, b = _planted_pair(n, n_cols, effect, rng)
            child_seed = int(rng.integers(2**63))
            report = permutation_test(
                a, b, metric="phi", n_permutations=perms, seed=child_seed
            )
            rejections += report.p_value < alpha
        rows.append(
            PowerRow(
                effect=effect,
                power=rejections / iters,
                iters=iters,
                perms=perms,
                n=n,
                n_cols=n_cols,
            )
        )
    return rows


# ---------------------------------------------------------------------------
# robustness battery


def leave_one_out(a, b, metric="phi", labels=None) -> list:
    """Impact of dropping each row: score(all) - score(all minus row).

    Positive impact means the row helps alignment.  Returns
    [(label, impact), ...] sorted by impact descending (ties by label).
    """
    fn, _ = resolve_metric(metric)
    a = _rows(a)
    b = _rows(b)
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"row mismatch: {a.shape[0]} vs {b.shape[0]}")
    n = a.shape[0]
    if labels is None:
        labels = [str(i) for i in range(n)]
    labels = list(map(str, labels))
    if len(labels) != n:
        raise ValueError(f"{len(labels)} labels for {n} rows")
    if n < 4:
        raise ValueError("need at least 4 rows for leave-one-out")
    full = float(fn(a, b))
    impacts = []
    for i in range(n):
        keep = np.arange(n) != i
        impacts.append((labels[i], full - float(fn(a[keep], b[keep]))))
    return sorted(impacts, key=lambda kv: (-kv[1], kv[0]))


def feature_ablation(claims, target, metric="phi") -> list:
    """Impact of dropping each claim category on the alignment score.

    The dimension handling (zero-padding to equal width) is re-applied at
    every reduced width.  Returns [(category, impact), ...] sorted by impact
    descending, impact = score(all) - score(without category).
    """
    if isinstance(claims, ClaimsMatrix):
        values = claims.values
        labels = claims.taxonomy.categories
    else:
        values, labels = claims
        values = np.asarray(values, dtype=float)
        labels = tuple(labels)
    if values.shape[1] != len(labels):
        raise ValueError(f"{values.shape[1]} columns for {len(labels)} labels")
    if values.shape[1] < 2:
        raise ValueError("need at least two categories to ablate")
    fn, _ = resolve_metric(metric)
    target = _rows(target)
    full = float(fn(values, target))
    impacts = []
    for k, label in enumerate(labels):
        reduced = np.delete(values, k, axis=1)
        impacts.append((label, full - float(fn(reduced, target))))
    return sorted(impacts, key=lambda kv: (-kv[1], kv[0]))


@dataclass(frozen=True)
class RollingWindowResult:
    """Alignment within one time window."""

    start_index: int
    end_index: int
    start_time: object
    end_time: object
    score: float


@dataclass(frozen=True)
class RollingReport:
    """Alignment recomputed over rolling windows of the raw tensor."""

    windows: tuple
    mean_score: float
    sd_score: float
    skipped: tuple
    metric: str


def rolling_alignment(tensor: MarketTensor, claims: ClaimsMatrix, window_hours: int,
                      stride_hours: int, metric="phi", refit_factors: bool = False,
                      rank: int = 2, seed: int = 42, vol_window: int = 168) -> RollingReport:
    """Claims-versus-market alignment over rolling time windows.

    Windows start at multiples of ``stride_hours`` and must fit entirely
    inside the grid (full windows only).  Within each window the statistics
    matrix is recomputed from the raw tensor (optionally CP factors are refit
    instead) and scored against the claims matrix.  Windows where the
    computation degenerates are skipped with a warning.
    """
    if tensor.normalization != "raw":
        raise ValueError("rolling alignment needs the raw tensor")
    T = tensor.shape[0]
    if not 0 < window_hours <= T:
        raise ValueError(f"window_hours must be in [1, {T}], got {window_hours}")
    if stride_hours < 1:
        raise ValueError("stride_hours must be >= 1")
    common = sorted(set(tensor.asset_labels) & set(claims.entity_labels))
    if not common:
        raise ValueError("no common entities between tensor and claims")
    sub_tensor = tensor.select_assets(common)
    sub_claims = claims.select_entities(common)
    fn, name = resolve_metric(metric)

    results, skipped = [], []
    start = 0
    while start + window_hours <= T:
        stop = start + window_hours
        window = sub_tensor.slice_time(start, stop)
        try:
            if refit_factors:
                model = cp_als(znormalize_feature_slices(window), rank, seed=seed)
                target = model.asset_factors
            else:
                target = build_stats_matrix(window, vol_window=vol_window).values
            score = float(fn(sub_claims.values, target))
        except ValueError as exc:
            skipped.append((start, stop, str(exc)))
            warnings.warn(f"window [{start}, {stop}) skipped: {exc}", stacklevel=2)
            start += stride_hours
            continue
        results.append(
            RollingWindowResult(
                start_index=start,
                end_index=stop,
                start_time=window.time_labels[0],
                end_time=window.time_labels[-1],
                score=score,
            )
        )
        start += stride_hours
    scores = np.array([r.score for r in results])
    return RollingReport(
        windows=tuple(results),
        mean_score=float(scores.mean()) if scores.size else float("nan"),
        sd_score=float(scores.std(ddof=1)) if scores.size > 1 else float("nan"),
        skipped=tuple(skipped),
        metric=name,
    )


@dataclass(frozen=True)
class SplitSampleReport:
    """Cross-half validation: factors from one half, statistics from the other."""

    phi_h1_factors_h2_stats: float
    p_h1_factors_h2_stats: float
    phi_h2_factors_h1_stats: float
    p_h2_factors_h1_stats: float
    split_index: int
    rank: int
    seed: int


def split_sample(tensor: MarketTensor, rank: int = 2, seed: int = 42,
                 n_permutations: int = 1000, vol_window: int = 168) -> SplitSampleReport:
    """Fit factors on one time half, compute statistics on the other, align.

    Both directions are reported with permutation p-values.  Guards against
    the optimistic bias of fitting and evaluating on the same sample.
    """
    if tensor.normalization != "raw":
        raise ValueError("split-sample needs the raw tensor")
    T = tensor.shape[0]
    half = T // 2
    if half < vol_window + 2:
        raise ValueError(
            f"each half needs at least vol_window + 2 = {vol_window + 2} hours, have {half}"
        )
    first, second = tensor.slice_time(0, half), tensor.slice_time(half, T)

    def one_direction(fit_half, eval_half):
        model = cp_als(znormalize_feature_slices(fit_half), rank, seed=seed)
        stats = build_stats_matrix(eval_half, vol_window=vol_window)
        report = permutation_test(
            stats.values, model.asset_factors, metric="phi",
            n_permutations=n_permutations, seed=seed,
        )
        return report.observed, report.p_value

    phi_fwd, p_fwd = one_direction(first, second)
    phi_rev, p_rev = one_direction(second, first)
    return SplitSampleReport(
        phi_h1_factors_h2_stats=phi_fwd,
        p_h1_factors_h2_stats=p_fwd,
        phi_h2_factors_h1_stats=phi_rev,
        p_h2_factors_h1_stats=p_rev,
        split_index=half,
        rank=rank,
        seed=seed,
    )


@dataclass(frozen=True)
class DisattenuationResult:
    """Observed score corrected for measurement unreliability."""

    phi_observed: float
    phi_disattenuated: float
    clamped: bool


def disattenuate(phi_obs: float, rel_x: float, rel_y: float) -> DisattenuationResult:
    """Correct an observed congruence for attenuation: phi / sqrt(rx * ry).

    Reliabilities must lie in (0, 1].  If the corrected value exceeds 1 in
    magnitude (possible when reliabilities are underestimated) it is reported
    as computed with ``clamped=True``.
    """
    for name, rel in (("rel_x", rel_x), ("rel_y", rel_y)):
        if not 0 < rel <= 1:
            raise ValueError(f"{name} must be in (0, 1], got {rel}")
    raw = phi_obs / float(np.sqrt(rel_x * rel_y))
    return DisattenuationResult(
        phi_observed=float(phi_obs),
        phi_disattenuated=float(raw),
        clamped=bool(abs(raw) > 1.0),
    )


@dataclass(frozen=True)
class BonferroniResult:
    """Family-wise corrected significance threshold and per-test decisions."""

    alpha: float
    m: int
    threshold: float
    reject: tuple


def bonferroni(p_values, alpha: float = 0.05) -> BonferroniResult:
    """Bonferroni control: reject where p < alpha / m."""
    p = [float(v) for v in p_values]
    if not p:
        raise ValueError("empty p-value list")
    if any(not 0 <= v <= 1 for v in p):
        raise ValueError("p-values must be in [0, 1]")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    threshold = alpha / len(p)
    return BonferroniResult(
        alpha=alpha,
        m=len(p),
        threshold=threshold,
        reject=tuple(v < threshold for v in p),
    )


@dataclass(frozen=True)
class LoadingCell:
    """Correlation of one input column with one factor."""

    label: str
    factor: int
    r: float
    p_value: float
    stars: str


@dataclass(frozen=True)
class LoadingReport:
    """Which raw statistics and claim categories each factor loads on."""

    stat_cells: tuple
    claim_cells: tuple


def _stars(p: float) -> str:
    if np.isnan(p):
        return ""
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


def _loading_cells(matrix: np.ndarray, labels, factors: np.ndarray) -> list:
    cells = []
    for k, label in enumerate(labels):
        col = matrix[:, k]
        for r_idx in range(factors.shape[1]):
            f = factors[:, r_idx]
            if np.ptp(col) == 0 or np.ptp(f) == 0:
                r, p = float("nan"), float("nan")
            else:
                res = _sps.pearsonr(col, f)
                r, p = float(res.statistic), float(res.pvalue)
            cells.append(LoadingCell(str(label), r_idx + 1, r, p, _stars(p)))
    return cells


def factor_loading_decomposition(stats, claims, factors) -> LoadingReport:
    """Pearson correlations (with two-sided p-values and significance stars)
    of every statistic column and claim category against every factor.

    Constant columns yield NaN cells rather than an error, so a degenerate
    input is visible instead of fatal.  Rows of all three matrices must refer
    to the same entities in the same order.
    """
    stat_values = _rows(stats)
    stat_labels = getattr(stats, "stat_labels", None) or [
        f"stat_{i}" for i in range(stat_values.shape[1])
    ]
    if isinstance(claims, ClaimsMatrix):
        claim_values, claim_labels = claims.values, claims.taxonomy.categories
    else:
        claim_values = _rows(claims)
        claim_labels = [f"claim_{i}" for i in range(claim_values.shape[1])]
    factors = np.asarray(factors, dtype=float)
    n = factors.shape[0]
    if stat_values.shape[0] != n or claim_values.shape[0] != n:
        raise ValueError("stats, claims and factors must have matching rows")
    if n < 4:
        raise ValueError("need at least 4 rows for loading correlations")
    return LoadingReport(
        stat_cells=tuple(_loading_cells(stat_values, stat_labels, factors)),
        claim_cells=tuple(_loading_cells(claim_values, claim_labels, factors)),
    )


@dataclass(frozen=True)
class ScalingReport:
    """Asset-factor congruence across tensor preprocessing variants."""

    variants: tuple
    pairwise: dict
    mean_congruence: float


def scaling_sensitivity(tensor: MarketTensor, rank: int = 2, seed: int = 42) -> ScalingReport:
    """Refit CP under three preprocessing variants and compare asset factors.

    Variants: feature-wise z-scored levels, z-scored log returns, and
    per-asset z-scored series.  Pairwise asset-factor congruence (greedy
    matched mean |phi|) quantifies how much the factor structure depends on
    the scaling choice.
    """
    if tensor.normalization != "raw":
        raise ValueError("scaling sensitivity needs the raw tensor")
    returns = to_returns(tensor, kind="log")
    # standardize the return slices so all variants enter CP on a common scale
    ret_z = znormalize_feature_slices(
        MarketTensor(
            returns.values, returns.time_labels, returns.asset_labels,
            returns.feature_labels, "raw",
        )
    )
    variants = {
        "normalized_levels": znormalize_feature_slices(tensor),
        "log_returns": MarketTensor(
            ret_z.values, returns.time_labels, returns.asset_labels,
            returns.feature_labels, "returns",
        ),
        "per_asset_z": per_asset_znormalize(tensor),
    }
    factors = {
        name: cp_als(t, rank, seed=seed).asset_factors for name, t in variants.items()
    }
    names = tuple(variants)
    pairwise = {}
    for i, n1 in enumerate(names):
        for n2 in names[i + 1:]:
            pairwise[(n1, n2)] = factor_congruence(factors[n1], factors[n2])
    return ScalingReport(
        variants=names,
        pairwise=pairwise,
        mean_congruence=float(np.mean(list(pairwise.values()))),
    )
