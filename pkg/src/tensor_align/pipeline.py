"""End-to-end study orchestration from a single YAML configuration.

A study runs five stages in order: ingest the market data and claim
scores, fit the tensor decomposition, build the entity-by-statistic and
entity-by-category matrices on their common entities, score the
alignments, and run the inference battery.  Everything lands in one
output directory: a manifest, a machine-readable summary, per-analysis
CSV tables, and tidy per-figure plot-data files.

Reruns with the same config and seed reproduce the tables byte for
byte; the manifest carries the only timestamp.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .align import ALT_METRICS, alt_alignment, equalize_widths, matrix_congruence
from .claims import (
    ClaimsMatrix,
    aggregate_claims,
    read_chunk_scores_csv,
    read_claims_csv,
)
from .decompose import cp_als, save_cp_model, select_rank, tucker
from .inference import (
    bootstrap_ci,
    factor_loading_decomposition,
    feature_ablation,
    leave_one_out,
    permutation_test,
    rolling_alignment,
    scaling_sensitivity,
    split_sample,
)
from .market_stats import STAT_NAMES, StatsMatrix, build_stats_matrix
from .tensor_core import (
    MarketTensor,
    build_tensor,
    read_ohlcv_csv,
    znormalize_feature_slices,
)

SCHEMA_VERSION = 1
STAGE_NAMES = ("ingest", "decompose", "matrices", "align", "inference")
DECOMPOSE_METHODS = ("cp", "tucker")
DIM_MODES = ("pad", "reduce")
METRIC_CHOICES = ("phi",) + tuple(sorted(ALT_METRICS))


class ConfigError(ValueError):
    """Raised when a study config is invalid; carries every problem found."""

    def __init__(self, errors):
        self.errors = tuple(errors)
        super().__init__("; ".join(self.errors))


class StageError(RuntimeError):
    """A study stage failed; the message names the stage."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        super().__init__(f"stage {STAGE_NAMES.index(stage) + 1} ({stage}): {cause}")


@dataclass(frozen=True)
class StudyConfig:
    """Validated study parameters; see ``validate_config``."""

    ohlcv_csv: Path
    out_dir: Path
    claims_csv: Path | None = None
    chunk_scores_csv: Path | None = None
    seed: int = 42
    max_gap: int = 3
    min_coverage: float = 0.9
    method: str = "cp"
    rank: int | None = 2
    target_ev: float | None = None
    max_rank: int = 8
    dim_mode: str = "pad"
    metrics: tuple = ("phi",) + tuple(sorted(ALT_METRICS))
    n_permutations: int = 1000
    n_boot: int = 1000
    window_hours: int = 4392
    stride_hours: int = 2196
    vol_window: int = 168
    min_chunks: int = 10
    ablation: bool = True
    source_path: Path | None = None
    raw: dict | None = None


@dataclass(frozen=True)
class ReportBundle:
    """Paths to everything a finished study wrote."""

    out_dir: Path
    manifest_path: Path
    summary_path: Path
    table_paths: tuple
    plot_paths: tuple


# ---------------------------------------------------------------------------
# configuration


def _get(section: dict, key: str, default):
    value = section.get(key, default)
    return default if value is None else value


def validate_config(path) -> StudyConfig:
    """Parse and validate a YAML study config.

    Every problem is collected before reporting, so one round of fixes
    addresses all of them.

    Raises
    ------
    ConfigError
        With the full list of validation errors.
    """
    path = Path(path)
    errors = []
    try:
        raw = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError([f"cannot read config {path}: {exc}"]) from exc
    if not isinstance(raw, dict):
        raise ConfigError([f"config {path} must be a mapping, got {type(raw).__name__}"])

    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        errors.append(
            f"schema_version must be {SCHEMA_VERSION}, got {version!r}"
        )

    data = raw.get("data") or {}
    base = path.parent

    def resolve(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    ohlcv = data.get("ohlcv_csv")
    if not ohlcv:
        errors.append("data.ohlcv_csv is required")
        ohlcv_path = Path("missing")
    else:
        ohlcv_path = resolve(ohlcv)
        if not ohlcv_path.is_file():
            errors.append(f"data.ohlcv_csv not found: {ohlcv_path}")

    claims = data.get("claims_csv")
    chunks = data.get("chunk_scores_csv")
    claims_path = resolve(claims) if claims else None
    chunks_path = resolve(chunks) if chunks else None
    if bool(claims) == bool(chunks):
        errors.append(
            "exactly one of data.claims_csv or data.chunk_scores_csv is required"
        )
    for label, p in (("claims_csv", claims_path), ("chunk_scores_csv", chunks_path)):
        if p is not None and not p.is_file():
            errors.append(f"data.{label} not found: {p}")

    seed = _get(raw, "seed", 42)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        errors.append(f"seed must be a non-negative integer, got {seed!r}")

    tensor = raw.get("tensor") or {}
    max_gap = _get(tensor, "max_gap", 3)
    if not isinstance(max_gap, int) or max_gap < 0:
        errors.append(f"tensor.max_gap must be a non-negative integer, got {max_gap!r}")
    min_coverage = _get(tensor, "min_coverage", 0.9)
    if not isinstance(min_coverage, (int, float)) or not 0 < min_coverage <= 1:
        errors.append(f"tensor.min_coverage must be in (0, 1], got {min_coverage!r}")

    deco = raw.get("decomposition") or {}
    method = _get(deco, "method", "cp")
    if method not in DECOMPOSE_METHODS:
        errors.append(f"decomposition.method must be one of {DECOMPOSE_METHODS}, got {method!r}")
    rank = deco.get("rank")
    target_ev = deco.get("target_ev")
    if rank is None and target_ev is None:
        rank = 2
    if rank is not None and (not isinstance(rank, int) or rank < 1):
        errors.append(f"decomposition.rank must be a positive integer, got {rank!r}")
    if target_ev is not None and not 0 < float(target_ev) < 1:
        errors.append(f"decomposition.target_ev must be in (0, 1), got {target_ev!r}")
    max_rank = _get(deco, "max_rank", 8)
    if not isinstance(max_rank, int) or max_rank < 1:
        errors.append(f"decomposition.max_rank must be a positive integer, got {max_rank!r}")

    alignment = raw.get("alignment") or {}
    dim_mode = _get(alignment, "dim_mode", "pad")
    if dim_mode not in DIM_MODES:
        errors.append(f"alignment.dim_mode must be one of {DIM_MODES}, got {dim_mode!r}")
    metrics = tuple(_get(alignment, "metrics", list(METRIC_CHOICES)))
    bad = [m for m in metrics if m not in METRIC_CHOICES]
    if bad:
        errors.append(f"alignment.metrics contains unknown metrics {bad}")
    if "phi" not in metrics:
        errors.append("alignment.metrics must include 'phi'")

    infer = raw.get("inference") or {}
    n_permutations = _get(infer, "n_permutations", 1000)
    n_boot = _get(infer, "n_boot", 1000)
    window_hours = _get(infer, "window_hours", 4392)
    stride_hours = _get(infer, "stride_hours", 2196)
    vol_window = _get(infer, "vol_window", 168)
    min_chunks = _get(infer, "min_chunks", 10)
    ablation = bool(_get(infer, "ablation", True))
    for label, value, floor in (
        ("n_permutations", n_permutations, 1),
        ("n_boot", n_boot, 2),
        ("window_hours", window_hours, 2),
        ("stride_hours", stride_hours, 1),
        ("vol_window", vol_window, 2),
        ("min_chunks", min_chunks, 1),
    ):
        if not isinstance(value, int) or value < floor:
            errors.append(f"inference.{label} must be an integer >= {floor}, got {value!r}")

    out_dir = raw.get("output_dir")
    if not out_dir:
        errors.append("output_dir is required")
        out_path = Path("out")
    else:
        out_path = resolve(out_dir)

    if errors:
        raise ConfigError(errors)
    return StudyConfig(
        ohlcv_csv=ohlcv_path,
        out_dir=out_path,
        claims_csv=claims_path,
        chunk_scores_csv=chunks_path,
        seed=seed,
        max_gap=max_gap,
        min_coverage=float(min_coverage),
        method=method,
        rank=rank,
        target_ev=None if target_ev is None else float(target_ev),
        max_rank=max_rank,
        dim_mode=dim_mode,
        metrics=metrics,
        n_permutations=n_permutations,
        n_boot=n_boot,
        window_hours=window_hours,
        stride_hours=stride_hours,
        vol_window=vol_window,
        min_chunks=min_chunks,
        ablation=ablation,
        source_path=path,
        raw=raw,
    )


def _config_hash(config: StudyConfig) -> str:
    canonical = json.dumps(config.raw, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()


# ---------------------------------------------------------------------------
# deterministic writers


def _fmt(value) -> str:
    if isinstance(value, float) or isinstance(value, np.floating):
        return repr(float(value))
    return str(value)


def write_table(path, header, rows) -> Path:
    """Write a CSV table with repr-exact floats; returns the path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def write_stats_csv(stats: StatsMatrix, path) -> Path:
    """Write a statistics matrix as ``asset,<stat names...>`` rows."""
    rows = [
        (asset, *stats.values[i])
        for i, asset in enumerate(stats.asset_labels)
    ]
    return write_table(path, ("asset",) + tuple(stats.stat_labels), rows)


def read_matrix_csv(path):
    """Read a labelled matrix CSV: header row, first column is the label.

    Returns
    -------
    tuple
        ``(labels, values, column_names)``.
    """
    path = Path(path)
    lines = path.read_text().strip().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty matrix file")
    header = lines[0].split(",")
    if len(header) < 2:
        raise ValueError(f"{path}: expected a label column plus data columns")
    labels, rows = [], []
    for i, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != len(header):
            raise ValueError(f"{path}: line {i}: expected {len(header)} fields, got {len(fields)}")
        labels.append(fields[0])
        try:
            rows.append([float(v) for v in fields[1:]])
        except ValueError as exc:
            raise ValueError(f"{path}: line {i}: {exc}") from exc
    return tuple(labels), np.asarray(rows, dtype=float), tuple(header[1:])


def _write_json(path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _jsonable(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (Path, dt.datetime)):
        return str(value)
    if isinstance(value, frozenset):
        return sorted(value)
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(value).items()}
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


# ---------------------------------------------------------------------------
# stages


def _restrict(matrix, labels, wanted):
    index = {label: i for i, label in enumerate(labels)}
    return matrix[[index[w] for w in wanted]]


def _stage_ingest(config: StudyConfig):
    records = read_ohlcv_csv(config.ohlcv_csv)
    tensor = build_tensor(
        records, max_gap=config.max_gap, min_coverage=config.min_coverage
    )
    if config.claims_csv is not None:
        claims = read_claims_csv(config.claims_csv)
    else:
        chunks, taxonomy = read_chunk_scores_csv(config.chunk_scores_csv)
        claims = aggregate_claims(chunks, taxonomy, min_chunks=config.min_chunks)
    return tensor, claims


def _stage_decompose(config: StudyConfig, tensor: MarketTensor):
    zt = znormalize_feature_slices(tensor)
    selection = select_rank(
        zt, target_ev=config.target_ev if config.target_ev is not None else 0.9,
        max_rank=min(config.max_rank, min(zt.values.shape)), seed=config.seed,
    )
    rank = config.rank if config.rank is not None else selection.rank
    if config.method == "cp":
        model = cp_als(zt, rank=rank, seed=config.seed)
        factors = model.asset_factors
        ev = model.explained_variance
    else:
        shape = zt.values.shape
        ranks = tuple(min(rank, s) for s in shape)
        model = tucker(zt, ranks=ranks)
        factors = model.asset_factors
        ev = model.explained_variance
    return model, factors, ev, rank, selection, zt


def _stage_matrices(config: StudyConfig, tensor, claims, factors):
    stats = build_stats_matrix(tensor, vol_window=config.vol_window)
    common = sorted(set(stats.asset_labels) & set(claims.entity_labels))
    if not common:
        raise ValueError(
            "no common entities between market assets and claims entities"
        )
    excluded_market = sorted(set(stats.asset_labels) - set(common))
    excluded_claims = sorted(set(claims.entity_labels) - set(common))
    stats_m = _restrict(stats.values, stats.asset_labels, common)
    claims_m = _restrict(claims.values, claims.entity_labels, common)
    factors_m = _restrict(factors, stats.asset_labels, common)
    return {
        "stats_full": stats,
        "common": tuple(common),
        "excluded_market": tuple(excluded_market),
        "excluded_claims": tuple(excluded_claims),
        "stats": stats_m,
        "claims": claims_m,
        "factors": factors_m,
        "claims_obj": claims,
        "stats_common": StatsMatrix(stats_m, tuple(common), stats.stat_labels, True),
        "claims_common": ClaimsMatrix(
            claims_m, tuple(common), claims.taxonomy,
            low_data=claims.low_data & set(common),
        ),
    }


_PAIRS = (
    ("claims_vs_stats", "claims", "stats"),
    ("claims_vs_factors", "claims", "factors"),
    ("stats_vs_factors", "stats", "factors"),
)


def _congruence(a, b, dim_mode: str):
    ea, eb = equalize_widths(a, b, mode=dim_mode)
    return matrix_congruence(
        ea, eb, method="zero_pad" if dim_mode == "pad" else "svd_reduce"
    )


def _stage_align(config: StudyConfig, mats):
    results = {}
    for pair, left, right in _PAIRS:
        a, b = mats[left], mats[right]
        scores = {}
        phi = _congruence(a, b, config.dim_mode)
        scores["phi"] = phi.mean_abs_phi
        for metric in config.metrics:
            if metric == "phi":
                continue
            scores[metric] = alt_alignment(a, b, metric)
        results[pair] = {"scores": scores, "phi_result": phi}
    return results


def _stage_inference(config: StudyConfig, tensor, mats, factors, zt, rank):
    out = {}
    perms = {}
    for pair, left, right in _PAIRS:
        perms[pair] = permutation_test(
            mats[left], mats[right],
            n_permutations=config.n_permutations, seed=config.seed,
        )
    out["permutation"] = perms
    out["bootstrap"] = bootstrap_ci(
        mats["claims"], mats["stats"], n_boot=config.n_boot, seed=config.seed
    )
    out["leave_one_out"] = leave_one_out(
        mats["claims"], mats["stats"], labels=list(mats["common"])
    )
    if config.ablation:
        out["ablation"] = feature_ablation(mats["claims_common"], mats["stats"])
    n_hours = tensor.values.shape[0]
    if config.window_hours <= n_hours:
        out["rolling"] = rolling_alignment(
            tensor, mats["claims_obj"],
            window_hours=config.window_hours, stride_hours=config.stride_hours,
            vol_window=config.vol_window, seed=config.seed,
        )
    else:
        out["rolling_skipped"] = (
            f"window_hours={config.window_hours} exceeds series length {n_hours}"
        )
    if n_hours // 2 >= config.vol_window + 2:
        out["split_sample"] = split_sample(
            tensor, rank=rank, seed=config.seed,
            n_permutations=config.n_permutations, vol_window=config.vol_window,
        )
    else:
        out["split_sample_skipped"] = (
            f"halves of {n_hours} hours are too short for vol_window={config.vol_window}"
        )
    out["loadings"] = factor_loading_decomposition(
        mats["stats_common"], mats["claims_common"], mats["factors"]
    )
    out["scaling"] = scaling_sensitivity(tensor, rank=rank, seed=config.seed)
    return out


# ---------------------------------------------------------------------------
# artifact emission


def _phi_by_rank(zt, assets, claims_m, common, selection, config):
    """Alignment of claims vs asset factors at each rank on the EV curve."""
    rows = []
    for rank_i, ev_i in enumerate(selection.ev_curve, start=1):
        model = cp_als(zt, rank=rank_i, seed=config.seed)
        factors_i = _restrict(model.asset_factors, assets, common)
        phi_i = _congruence(claims_m, factors_i, config.dim_mode).mean_abs_phi
        rows.append((rank_i, ev_i, phi_i))
    return rows


def _emit_tables(config, out_dir, mats, ev, rank, selection, aligned, inferred, rank_phi):
    tables = {}
    tdir = out_dir / "tables"

    tables["stats_matrix"] = write_stats_csv(
        StatsMatrix(mats["stats"], mats["common"], STAT_NAMES, normalized=True),
        tdir / "stats_matrix.csv",
    )
    claims_header = ("entity",) + mats["claims_obj"].taxonomy.categories
    tables["claims_matrix"] = write_table(
        tdir / "claims_matrix.csv", claims_header,
        [(e, *mats["claims"][i]) for i, e in enumerate(mats["common"])],
    )
    tables["rank_curve"] = write_table(
        tdir / "rank_curve.csv", ("rank", "ev", "phi"), rank_phi
    )
    align_rows = []
    for pair, _, _ in _PAIRS:
        for metric in ("phi",) + tuple(m for m in config.metrics if m != "phi"):
            align_rows.append((pair, metric, aligned[pair]["scores"][metric]))
    tables["alignment"] = write_table(
        tdir / "alignment.csv", ("pair", "metric", "score"), align_rows
    )
    perm_rows = [
        (pair, r.observed, r.p_value, r.n_permutations)
        for pair, r in inferred["permutation"].items()
    ]
    tables["permutation"] = write_table(
        tdir / "permutation.csv",
        ("pair", "observed", "p_value", "n_permutations"), perm_rows,
    )
    boot = inferred["bootstrap"]
    tables["bootstrap"] = write_table(
        tdir / "bootstrap.csv",
        ("pair", "point", "lower", "upper", "level", "bias", "skewness"),
        [("claims_vs_stats", boot.point, boot.lower, boot.upper,
          boot.level, boot.bias, boot.skewness)],
    )
    tables["entity_impact"] = write_table(
        tdir / "entity_impact.csv", ("entity", "impact"),
        inferred["leave_one_out"],
    )
    if "ablation" in inferred:
        tables["ablation"] = write_table(
            tdir / "ablation.csv", ("category", "impact"), inferred["ablation"]
        )
    if "rolling" in inferred:
        rolling = inferred["rolling"]
        tables["rolling"] = write_table(
            tdir / "rolling.csv",
            ("start_index", "end_index", "start_time", "end_time", "score"),
            [
                (w.start_index, w.end_index, w.start_time.isoformat(),
                 w.end_time.isoformat(), w.score)
                for w in rolling.windows
            ],
        )
    loadings = inferred["loadings"]
    loading_rows = [
        ("stat", c.label, c.factor, c.r, c.p_value, c.stars)
        for c in loadings.stat_cells
    ] + [
        ("claim", c.label, c.factor, c.r, c.p_value, c.stars)
        for c in loadings.claim_cells
    ]
    tables["loadings"] = write_table(
        tdir / "loadings.csv", ("block", "label", "factor", "r", "p_value", "stars"),
        loading_rows,
    )
    scaling = inferred["scaling"]
    tables["scaling"] = write_table(
        tdir / "scaling.csv", ("variant_a", "variant_b", "phi"),
        [(a, b, phi) for (a, b), phi in sorted(scaling.pairwise.items())],
    )
    return tables


def emit_plot_data(bundle: ReportBundle) -> tuple:
    """Regenerate tidy per-figure CSVs from a finished bundle's artifacts.

    One file per figure: factor scatter, claims heatmap, rank curve,
    entity impact, category ablation, and the loading heatmap.  Files
    are derived from the bundle's tables and summary, so this can run
    long after the study without recomputing anything.
    """
    out_dir = Path(bundle.out_dir)
    pdir = out_dir / "plot_data"
    summary = json.loads(Path(bundle.summary_path).read_text())
    paths = []

    factors = np.asarray(summary["factors"]["asset_factors_common"])
    entities = summary["entities"]["common"]
    header = ("entity",) + tuple(f"factor_{j + 1}" for j in range(factors.shape[1]))
    paths.append(write_table(
        pdir / "factor_scatter.csv", header,
        [(e, *factors[i]) for i, e in enumerate(entities)],
    ))

    labels, values, columns = read_matrix_csv(out_dir / "tables" / "claims_matrix.csv")
    heat_rows = [
        (entity, category, values[i, j])
        for i, entity in enumerate(labels)
        for j, category in enumerate(columns)
    ]
    paths.append(write_table(
        pdir / "claims_heatmap.csv", ("entity", "category", "weight"), heat_rows
    ))

    for name in ("rank_curve", "entity_impact"):
        src = out_dir / "tables" / f"{name}.csv"
        dst = pdir / f"{name}.csv"
        dst.parent.mkdir(parents=True, exist_ok=True)
        dst.write_bytes(src.read_bytes())
        paths.append(dst)

    ablation_src = out_dir / "tables" / "ablation.csv"
    if ablation_src.is_file():
        dst = pdir / "ablation.csv"
        dst.write_bytes(ablation_src.read_bytes())
        paths.append(dst)

    src = out_dir / "tables" / "loadings.csv"
    dst = pdir / "loadings.csv"
    dst.write_bytes(src.read_bytes())
    paths.append(dst)
    return tuple(paths)


def run_study(config: StudyConfig) -> ReportBundle:
    """Execute all five study stages and write the report bundle.

    Raises
    ------
    StageError
        If any stage fails; the message names the stage and the cause.
    """
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stage_log = []

    def run_stage(name, fn, *args):
        try:
            result = fn(*args)
        except Exception as exc:
            raise StageError(name, exc) from exc
        stage_log.append(name)
        return result

    tensor, claims = run_stage("ingest", _stage_ingest, config)
    model, factors, ev, rank, selection, zt = run_stage(
        "decompose", _stage_decompose, config, tensor
    )
    mats = run_stage("matrices", _stage_matrices, config, tensor, claims, factors)
    aligned = run_stage("align", _stage_align, config, mats)
    inferred = run_stage(
        "inference", _stage_inference, config, tensor, mats, factors, zt, rank
    )
    rank_phi = _phi_by_rank(
        zt, mats["stats_full"].asset_labels, mats["claims"],
        mats["common"], selection, config,
    )

    tables = _emit_tables(
        config, out_dir, mats, ev, rank, selection, aligned, inferred, rank_phi
    )

    if config.method == "cp":
        save_cp_model(model, out_dir / "model")

    summary = {
        "schema_version": SCHEMA_VERSION,
        "seed": config.seed,
        "decomposition": {
            "method": config.method,
            "rank": rank,
            "explained_variance": ev,
            "ev_curve": [float(v) for v in selection.ev_curve],
            "target_reached": selection.target_reached,
        },
        "entities": {
            "common": list(mats["common"]),
            "excluded_market": list(mats["excluded_market"]),
            "excluded_claims": list(mats["excluded_claims"]),
            "n_common": len(mats["common"]),
        },
        "factors": {"asset_factors_common": _jsonable(mats["factors"])},
        "alignment": {
            pair: _jsonable(aligned[pair]["scores"]) for pair, _, _ in _PAIRS
        },
        "inference": {
            "permutation": {
                pair: {
                    "observed": r.observed,
                    "p_value": r.p_value,
                    "n_permutations": r.n_permutations,
                }
                for pair, r in inferred["permutation"].items()
            },
            "bootstrap": {
                k: _jsonable(getattr(inferred["bootstrap"], k))
                for k in ("point", "lower", "upper", "level", "bias", "skewness")
            },
            "leave_one_out": _jsonable(inferred["leave_one_out"]),
            "ablation": _jsonable(inferred.get("ablation")),
            "rolling": (
                {
                    "mean_score": inferred["rolling"].mean_score,
                    "sd_score": inferred["rolling"].sd_score,
                    "n_windows": len(inferred["rolling"].windows),
                    "n_skipped": len(inferred["rolling"].skipped),
                }
                if "rolling" in inferred
                else inferred.get("rolling_skipped")
            ),
            "split_sample": _jsonable(inferred.get("split_sample", inferred.get("split_sample_skipped"))),
            "loadings": _jsonable(inferred["loadings"]),
            "scaling": {
                "pairwise": {
                    f"{a}_vs_{b}": float(phi)
                    for (a, b), phi in sorted(inferred["scaling"].pairwise.items())
                },
                "mean_congruence": inferred["scaling"].mean_congruence,
            },
        },
    }
    summary_path = _write_json(out_dir / "summary.json", summary)

    import scipy

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "config_hash": _config_hash(config),
        "config_path": _jsonable(config.source_path),
        "seed": config.seed,
        "created_utc": dt.datetime.now(dt.timezone.utc).isoformat(),
        "versions": {"numpy": np.__version__, "scipy": scipy.__version__},
        "stages_completed": stage_log,
        "entities": summary["entities"],
        "tables": {name: str(p) for name, p in sorted(tables.items())},
    }
    manifest_path = _write_json(out_dir / "manifest.json", manifest)

    bundle = ReportBundle(
        out_dir=out_dir,
        manifest_path=manifest_path,
        summary_path=summary_path,
        table_paths=tuple(p for _, p in sorted(tables.items())),
        plot_paths=(),
    )
    plot_paths = emit_plot_data(bundle)
    return dataclasses.replace(bundle, plot_paths=plot_paths)
