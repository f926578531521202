"""Command-line interface: ``tensor-align <subcommand>``.

Each subcommand writes a JSON report (and a CSV table where the result
is tabular) into the output directory.  Exit codes: 0 on success, 1 for
validation problems (bad flags, bad config, bad input data), 2 for
runtime failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .align import ALT_METRICS, alt_alignment, equalize_widths, matrix_congruence
from .claims import read_claims_csv
from .decompose import cp_als, save_cp_model, select_rank, tucker
from .inference import (
    bootstrap_ci,
    factor_loading_decomposition,
    feature_ablation,
    leave_one_out,
    permutation_test,
    power_simulation,
    rolling_alignment,
    split_sample,
)
from .market_stats import build_stats_matrix
from .pipeline import (
    ConfigError,
    StageError,
    _jsonable,
    read_matrix_csv,
    run_study,
    validate_config,
    write_stats_csv,
    write_table,
)
from .tensor_core import build_tensor, read_ohlcv_csv, znormalize_feature_slices

METRICS = ("phi",) + tuple(sorted(ALT_METRICS))


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags by default; bad flags are validation
    # errors here, so remap to exit code 1
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(1)


def _write_json(path: Path, payload) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
    return path


def _load_tensor(args):
    records = read_ohlcv_csv(args.ohlcv)
    return build_tensor(records)


def _load_pair(args):
    labels_a, a, _ = read_matrix_csv(args.a)
    labels_b, b, _ = read_matrix_csv(args.b)
    return labels_a, a, labels_b, b


# ---------------------------------------------------------------------------
# subcommands


def _cmd_run(args):
    config = validate_config(args.config)
    if args.out_given:
        config = dataclasses.replace(config, out_dir=Path(args.out))
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    bundle = run_study(config)
    print(f"report bundle written to {bundle.out_dir}")
    return 0


def _cmd_decompose(args):
    tensor = znormalize_feature_slices(_load_tensor(args))
    out = Path(args.out)
    seed = args.seed if args.seed is not None else 42
    if args.target_ev is not None:
        selection = select_rank(tensor, target_ev=args.target_ev, seed=seed)
        rank = selection.rank
        curve = {"ev_curve": list(selection.ev_curve),
                 "target_reached": selection.target_reached}
    else:
        rank = args.rank
        curve = {}
    if args.method == "cp":
        model = cp_als(tensor, rank=rank, seed=seed)
        save_cp_model(model, out / "model")
        report = {
            "method": "cp", "rank": rank, "seed": seed,
            "explained_variance": model.explained_variance,
            "converged": model.converged, "iterations": model.iterations,
            "weights": model.weights, **curve,
        }
    else:
        ranks = tuple(min(rank, s) for s in tensor.values.shape)
        model = tucker(tensor, ranks=ranks)
        report = {
            "method": "tucker", "ranks": ranks,
            "explained_variance": model.explained_variance,
            "converged": model.converged, "iterations": model.iterations,
            **curve,
        }
    _write_json(out / "decompose.json", report)
    print(f"explained variance {report['explained_variance']:.4f}")
    return 0


def _cmd_stats(args):
    tensor = _load_tensor(args)
    out = Path(args.out)
    raw = build_stats_matrix(tensor, vol_window=args.vol_window, normalize=False)
    normalized = build_stats_matrix(tensor, vol_window=args.vol_window)
    write_stats_csv(raw, out / "stats_matrix_raw.csv")
    path = write_stats_csv(normalized, out / "stats_matrix.csv")
    print(f"stats for {len(raw.asset_labels)} assets written to {path}")
    return 0


def _cmd_align(args):
    _, a, _, b = _load_pair(args)
    out = Path(args.out)
    if args.metric == "phi":
        ea, eb = equalize_widths(a, b, mode=args.dim_mode)
        result = matrix_congruence(
            ea, eb, method="zero_pad" if args.dim_mode == "pad" else "svd_reduce"
        )
        report = {
            "metric": "phi",
            "mean_abs_phi": result.mean_abs_phi,
            "per_dim_phi": result.per_dim_phi,
            "padded_dims": result.padded_dims,
            "method": result.method,
            "n_entities": result.n_entities,
            "rotation": result.rotation.q,
        }
        print(f"mean |phi| = {result.mean_abs_phi:.4f}")
    else:
        score = alt_alignment(a, b, args.metric)
        report = {"metric": args.metric, "score": score}
        print(f"{args.metric} = {score:.4f}")
    _write_json(out / "align.json", report)
    return 0


def _cmd_permtest(args):
    _, a, _, b = _load_pair(args)
    report = permutation_test(
        a, b, metric=args.metric,
        n_permutations=args.permutations,
        seed=args.seed if args.seed is not None else 42,
        smoothed=args.smoothed,
    )
    _write_json(Path(args.out) / "permtest.json", report)
    print(f"observed {report.observed:.4f}, p = {report.p_value:.4f}")
    return 0


def _cmd_bootstrap(args):
    _, a, _, b = _load_pair(args)
    report = bootstrap_ci(
        a, b, metric=args.metric, n_boot=args.n_boot, level=args.level,
        seed=args.seed if args.seed is not None else 42,
    )
    _write_json(Path(args.out) / "bootstrap.json", report)
    print(
        f"point {report.point:.4f}, {report.level:.0%} CI "
        f"[{report.lower:.4f}, {report.upper:.4f}], bias {report.bias:+.4f}"
    )
    return 0


def _cmd_power(args):
    effects = [float(v) for v in args.effects.split(",") if v]
    rows = power_simulation(
        args.n, effects, iters=args.iters, perms=args.perms,
        alpha=args.alpha, seed=args.seed if args.seed is not None else 42,
    )
    out = Path(args.out)
    _write_json(out / "power.json", {"rows": rows})
    write_table(
        out / "power.csv", ("effect", "power", "iters", "perms", "n"),
        [(r.effect, r.power, r.iters, r.perms, r.n) for r in rows],
    )
    for r in rows:
        print(f"effect {r.effect:.2f}: power {r.power:.3f}")
    return 0


def _cmd_loo(args):
    labels_a, a, _, b = _load_pair(args)
    impacts = leave_one_out(a, b, metric=args.metric, labels=list(labels_a))
    out = Path(args.out)
    _write_json(out / "loo.json", {"impacts": impacts})
    write_table(out / "loo.csv", ("entity", "impact"), impacts)
    print(f"strongest positive: {impacts[0][0]}, strongest negative: {impacts[-1][0]}")
    return 0


def _cmd_ablate(args):
    claims = read_claims_csv(args.claims)
    _, target, _ = read_matrix_csv(args.target)
    impacts = feature_ablation(claims, target, metric=args.metric)
    out = Path(args.out)
    _write_json(out / "ablate.json", {"impacts": impacts})
    write_table(out / "ablate.csv", ("category", "impact"), impacts)
    print(f"largest impact: {impacts[0][0]} ({impacts[0][1]:+.4f})")
    return 0


def _cmd_rolling(args):
    tensor = _load_tensor(args)
    claims = read_claims_csv(args.claims)
    report = rolling_alignment(
        tensor, claims, window_hours=args.window, stride_hours=args.stride,
        metric=args.metric, vol_window=args.vol_window,
        seed=args.seed if args.seed is not None else 42,
    )
    out = Path(args.out)
    _write_json(out / "rolling.json", report)
    write_table(
        out / "rolling.csv",
        ("start_index", "end_index", "start_time", "end_time", "score"),
        [
            (w.start_index, w.end_index, w.start_time.isoformat(),
             w.end_time.isoformat(), w.score)
            for w in report.windows
        ],
    )
    print(
        f"{len(report.windows)} windows, mean {report.mean_score:.4f} "
        f"± {report.sd_score:.4f}"
    )
    return 0


def _cmd_split_sample(args):
    tensor = _load_tensor(args)
    report = split_sample(
        tensor, rank=args.rank,
        seed=args.seed if args.seed is not None else 42,
        n_permutations=args.permutations, vol_window=args.vol_window,
    )
    _write_json(Path(args.out) / "split_sample.json", report)
    print(
        f"h1->h2 phi {report.phi_h1_factors_h2_stats:.4f} "
        f"(p {report.p_h1_factors_h2_stats:.4f}); "
        f"h2->h1 phi {report.phi_h2_factors_h1_stats:.4f} "
        f"(p {report.p_h2_factors_h1_stats:.4f})"
    )
    return 0


def _cmd_decompose_loadings(args):
    tensor = _load_tensor(args)
    claims = read_claims_csv(args.claims)
    seed = args.seed if args.seed is not None else 42
    stats = build_stats_matrix(tensor, vol_window=args.vol_window)
    common = sorted(set(stats.asset_labels) & set(claims.entity_labels))
    if not common:
        raise ValueError("no common entities between market assets and claims")
    sidx = {a: i for i, a in enumerate(stats.asset_labels)}
    cidx = {e: i for i, e in enumerate(claims.entity_labels)}
    model = cp_als(znormalize_feature_slices(tensor), rank=args.rank, seed=seed)
    stats_m = stats.values[[sidx[e] for e in common]]
    claims_m = claims.values[[cidx[e] for e in common]]
    factors_m = model.asset_factors[[sidx[e] for e in common]]
    from .claims import ClaimsMatrix
    from .market_stats import StatsMatrix

    report = factor_loading_decomposition(
        StatsMatrix(stats_m, tuple(common), stats.stat_labels, True),
        ClaimsMatrix(claims_m, tuple(common), claims.taxonomy),
        factors_m,
    )
    out = Path(args.out)
    _write_json(out / "loadings.json", report)
    rows = [
        ("stat", c.label, c.factor, c.r, c.p_value, c.stars)
        for c in report.stat_cells
    ] + [
        ("claim", c.label, c.factor, c.r, c.p_value, c.stars)
        for c in report.claim_cells
    ]
    write_table(
        out / "loadings.csv",
        ("block", "label", "factor", "r", "p_value", "stars"), rows,
    )
    starred = sum(1 for _, _, _, _, _, s in rows if s)
    print(f"{len(rows)} loading cells, {starred} significant")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    # global flags live on a parent parser shared with every subcommand, so
    # they are accepted both before and after the subcommand name; SUPPRESS
    # keeps a subparser's default from clobbering a value parsed earlier
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="override RNG seed")
    common.add_argument("--out", default=argparse.SUPPRESS,
                        help="output directory (default: out)")
    common.add_argument("--config", default=argparse.SUPPRESS,
                        help="study config file (for run)")
    parser = _Parser(prog="tensor-align", description=__doc__, parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_parser(name, **kwargs):
        return sub.add_parser(name, parents=[common], **kwargs)

    p = add_parser("run", help="run the full study from a config file")
    p.set_defaults(fn=_cmd_run)

    p = add_parser("decompose", help="fit a tensor decomposition")
    p.add_argument("ohlcv", help="OHLCV CSV path")
    p.add_argument("--rank", type=int, default=2)
    p.add_argument("--target-ev", type=float, default=None)
    p.add_argument("--method", choices=("cp", "tucker"), default="cp")
    p.set_defaults(fn=_cmd_decompose)

    p = add_parser("stats", help="build the asset statistics matrix")
    p.add_argument("ohlcv")
    p.add_argument("--vol-window", type=int, default=168)
    p.set_defaults(fn=_cmd_stats)

    p = add_parser("align", help="score alignment between two matrices")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--dim-mode", choices=("pad", "reduce"), default="pad")
    p.add_argument("--metric", choices=METRICS, default="phi")
    p.set_defaults(fn=_cmd_align)

    p = add_parser("permtest", help="row-permutation null test")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--metric", choices=METRICS, default="phi")
    p.add_argument("--permutations", type=int, default=1000)
    p.add_argument("--smoothed", action="store_true")
    p.set_defaults(fn=_cmd_permtest)

    p = add_parser("bootstrap", help="bootstrap confidence interval")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--metric", choices=METRICS, default="phi")
    p.add_argument("--n-boot", type=int, default=1000)
    p.add_argument("--level", type=float, default=0.95)
    p.set_defaults(fn=_cmd_bootstrap)

    p = add_parser("power", help="power curve for planted alignments")
    p.add_argument("--n", type=int, required=True, help="rows per matrix")
    p.add_argument("--effects", required=True, help="comma-separated true phis")
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--perms", type=int, default=200)
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(fn=_cmd_power)

    p = add_parser("loo", help="leave-one-entity-out impacts")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--metric", choices=METRICS, default="phi")
    p.set_defaults(fn=_cmd_loo)

    p = add_parser("ablate", help="claim-category ablation impacts")
    p.add_argument("--claims", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--metric", choices=METRICS, default="phi")
    p.set_defaults(fn=_cmd_ablate)

    p = add_parser("rolling", help="rolling-window alignment")
    p.add_argument("ohlcv")
    p.add_argument("--claims", required=True)
    p.add_argument("--window", type=int, required=True, help="window hours")
    p.add_argument("--stride", type=int, required=True, help="stride hours")
    p.add_argument("--metric", choices=METRICS, default="phi")
    p.add_argument("--vol-window", type=int, default=168)
    p.set_defaults(fn=_cmd_rolling)

    p = add_parser("split-sample", help="cross-half factor stability")
    p.add_argument("ohlcv")
    p.add_argument("--rank", type=int, default=2)
    p.add_argument("--permutations", type=int, default=1000)
    p.add_argument("--vol-window", type=int, default=168)
    p.set_defaults(fn=_cmd_split_sample)

    p = add_parser(
        "decompose-loadings", help="statistic/claim correlations per factor"
    )
    p.add_argument("ohlcv")
    p.add_argument("--claims", required=True)
    p.add_argument("--rank", type=int, default=2)
    p.add_argument("--vol-window", type=int, default=168)
    p.set_defaults(fn=_cmd_decompose_loadings)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.seed = getattr(args, "seed", None)
    args.out_given = hasattr(args, "out")
    args.out = getattr(args, "out", "out")
    args.config = getattr(args, "config", None)
    if args.command == "run" and args.config is None:
        print("run requires --config", file=sys.stderr)
        return 1
    try:
        return args.fn(args)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (StageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
