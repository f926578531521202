"""Market tensor factorization and narrative-market alignment toolkit.

Builds (time x asset x feature) tensors from hourly OHLCV data, factors them
(CP via alternating least squares, Tucker via HOOI), summarizes each asset
with seven market statistics, aggregates text-derived functional-claim
scores, aligns the resulting matrices with orthogonal Procrustes rotation
and Tucker's congruence coefficient, and quantifies the evidence with
permutation tests, bootstrap intervals and a robustness battery.
"""

from .align import (
    AlignmentResult,
    RotationMatrix,
    alt_alignment,
    equalize_widths,
    matrix_congruence,
    pad_columns,
    procrustes,
    svd_reduce,
    tucker_phi,
)
from .claims import (
    ChunkScores,
    ClaimsMatrix,
    Taxonomy,
    aggregate_claims,
    agreement_stats,
    bootstrap_category_ci,
    default_taxonomy,
    fleiss_kappa,
    method_correlations,
    read_chunk_scores_csv,
    read_claims_csv,
    write_chunk_scores_csv,
    write_claims_csv,
)
from .decompose import (
    CpModel,
    RankSelection,
    TuckerModel,
    cp_als,
    explained_variance,
    factor_congruence,
    load_cp_model,
    save_cp_model,
    select_rank,
    tucker,
)
from .inference import (
    bonferroni,
    bootstrap_ci,
    disattenuate,
    factor_loading_decomposition,
    feature_ablation,
    leave_one_out,
    permutation_test,
    power_simulation,
    rolling_alignment,
    scaling_sensitivity,
    split_sample,
)
from .market_stats import (
    STAT_NAMES,
    StatsMatrix,
    StatVector,
    build_stats_matrix,
    compute_asset_stats,
    residualize,
)
from .pipeline import (
    ConfigError,
    ReportBundle,
    StageError,
    StudyConfig,
    emit_plot_data,
    run_study,
    validate_config,
)
from .tensor_core import (
    FEATURES,
    MarketTensor,
    OhlcvRecord,
    build_tensor,
    hourly_grid,
    khatri_rao,
    load_tensor,
    matricize,
    read_ohlcv_csv,
    refold,
    save_tensor,
    synth_tensor,
    znormalize_feature_slices,
)

__version__ = "0.1.0"
