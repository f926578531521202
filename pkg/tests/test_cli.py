"""Command-line interface: subcommand wiring, artifacts, exit codes."""

import json
from pathlib import Path

import pytest

from tensor_align.cli import main

REPO = Path(__file__).resolve().parents[1]
DEMO_CONFIG = REPO / "demos" / "study.yaml"
OHLCV = REPO / "demos" / "data" / "ohlcv.csv"


@pytest.fixture(scope="module")
def stats_csvs(tmp_path_factory):
    out = tmp_path_factory.mktemp("stats")
    assert main(["--out", str(out), "stats", str(OHLCV), "--vol-window", "48"]) == 0
    return out / "stats_matrix.csv", out / "stats_matrix_raw.csv"


@pytest.fixture(scope="module")
def claims_csv(tmp_path_factory, stats_csvs):
    # a claims matrix over the same entities, derived from the demo fixture
    import numpy as np

    from tensor_align import ClaimsMatrix, default_taxonomy, write_claims_csv
    from tensor_align.pipeline import read_matrix_csv

    labels, _, _ = read_matrix_csv(stats_csvs[0])
    taxonomy = default_taxonomy()
    rng = np.random.default_rng(0)
    values = rng.dirichlet(np.ones(taxonomy.size), size=len(labels))
    path = tmp_path_factory.mktemp("claims") / "claims.csv"
    write_claims_csv(ClaimsMatrix(values, labels, taxonomy), path)
    return path


class TestStats:
    def test_writes_both_variants(self, stats_csvs):
        normalized, raw = stats_csvs
        header = normalized.read_text().splitlines()[0]
        assert header == (
            "asset,mean_return,volatility,sharpe,max_drawdown,"
            "avg_volume,vol_of_vol,trend"
        )
        assert raw.is_file()


class TestDecompose:
    def test_cp_model_saved(self, tmp_path):
        code = main(
            ["--out", str(tmp_path), "decompose", str(OHLCV), "--rank", "2"]
        )
        assert code == 0
        report = json.loads((tmp_path / "decompose.json").read_text())
        assert report["method"] == "cp"
        assert report["rank"] == 2
        assert report["seed"] == 42  # default per contract
        assert 0.0 <= report["explained_variance"] <= 1.0
        assert (tmp_path / "model").is_dir()

    def test_target_ev_selects_rank(self, tmp_path):
        code = main(
            ["--out", str(tmp_path), "decompose", str(OHLCV), "--target-ev", "0.9"]
        )
        assert code == 0
        report = json.loads((tmp_path / "decompose.json").read_text())
        assert report["target_reached"]
        assert len(report["ev_curve"]) >= report["rank"]

    def test_tucker_method(self, tmp_path):
        code = main(
            ["--out", str(tmp_path), "decompose", str(OHLCV),
             "--method", "tucker", "--rank", "2"]
        )
        assert code == 0
        report = json.loads((tmp_path / "decompose.json").read_text())
        assert report["method"] == "tucker"


class TestAlign:
    def test_phi_report_has_per_dim_table(self, stats_csvs, tmp_path):
        a, b = stats_csvs
        code = main(
            ["--out", str(tmp_path), "align", "--a", str(a), "--b", str(b)]
        )
        assert code == 0
        report = json.loads((tmp_path / "align.json").read_text())
        assert report["metric"] == "phi"
        assert len(report["per_dim_phi"]) == 7
        assert len(report["rotation"]) == 7
        assert 0.0 <= report["mean_abs_phi"] <= 1.0

    def test_alt_metric(self, stats_csvs, tmp_path):
        a, b = stats_csvs
        code = main(
            ["--out", str(tmp_path), "align",
             "--a", str(a), "--b", str(b), "--metric", "rv"]
        )
        assert code == 0
        report = json.loads((tmp_path / "align.json").read_text())
        assert report["metric"] == "rv"


class TestInferenceCommands:
    def test_permtest(self, stats_csvs, tmp_path):
        a, b = stats_csvs
        code = main(
            ["--out", str(tmp_path), "permtest", "--a", str(a), "--b", str(b),
             "--permutations", "100"]
        )
        assert code == 0
        report = json.loads((tmp_path / "permtest.json").read_text())
        assert report["n_permutations"] == 100
        assert 0.0 <= report["p_value"] <= 1.0

    def test_seed_flag_position_is_free(self, stats_csvs, tmp_path):
        a, b = stats_csvs
        assert main(
            ["--seed", "7", "--out", str(tmp_path / "x"), "permtest",
             "--a", str(a), "--b", str(b), "--permutations", "50"]
        ) == 0
        assert main(
            ["permtest", "--a", str(a), "--b", str(b), "--permutations", "50",
             "--seed", "7", "--out", str(tmp_path / "y")]
        ) == 0
        rx = json.loads((tmp_path / "x" / "permtest.json").read_text())
        ry = json.loads((tmp_path / "y" / "permtest.json").read_text())
        assert rx == ry
        assert rx["seed"] == 7

    def test_bootstrap(self, stats_csvs, tmp_path):
        a, b = stats_csvs
        code = main(
            ["--out", str(tmp_path), "bootstrap", "--a", str(a), "--b", str(b),
             "--n-boot", "100"]
        )
        assert code == 0
        report = json.loads((tmp_path / "bootstrap.json").read_text())
        assert report["lower"] <= report["upper"]

    def test_power_table(self, tmp_path):
        code = main(
            ["--out", str(tmp_path), "power", "--n", "10",
             "--effects", "0.0,0.8", "--iters", "25", "--perms", "40"]
        )
        assert code == 0
        lines = (tmp_path / "power.csv").read_text().strip().splitlines()
        assert lines[0] == "effect,power,iters,perms,n"
        assert len(lines) == 3

    def test_loo_sorted(self, stats_csvs, tmp_path):
        a, b = stats_csvs
        code = main(
            ["--out", str(tmp_path), "loo", "--a", str(a), "--b", str(b)]
        )
        assert code == 0
        lines = (tmp_path / "loo.csv").read_text().strip().splitlines()[1:]
        impacts = [float(line.split(",")[1]) for line in lines]
        assert impacts == sorted(impacts, reverse=True)
        assert len(impacts) == 6

    def test_ablate(self, stats_csvs, claims_csv, tmp_path):
        code = main(
            ["--out", str(tmp_path), "ablate", "--claims", str(claims_csv),
             "--target", str(stats_csvs[0])]
        )
        assert code == 0
        lines = (tmp_path / "ablate.csv").read_text().strip().splitlines()
        assert lines[0] == "category,impact"
        assert len(lines) == 11  # ten categories

    def test_rolling(self, claims_csv, tmp_path):
        code = main(
            ["--out", str(tmp_path), "rolling", str(OHLCV),
             "--claims", str(claims_csv), "--window", "240", "--stride", "120",
             "--vol-window", "48"]
        )
        assert code == 0
        report = json.loads((tmp_path / "rolling.json").read_text())
        assert len(report["windows"]) == 3

    def test_split_sample(self, tmp_path):
        code = main(
            ["--out", str(tmp_path), "split-sample", str(OHLCV),
             "--vol-window", "48", "--permutations", "60"]
        )
        assert code == 0
        report = json.loads((tmp_path / "split_sample.json").read_text())
        assert report["split_index"] == 240

    def test_decompose_loadings(self, claims_csv, tmp_path):
        code = main(
            ["--out", str(tmp_path), "decompose-loadings", str(OHLCV),
             "--claims", str(claims_csv), "--vol-window", "48"]
        )
        assert code == 0
        lines = (tmp_path / "loadings.csv").read_text().strip().splitlines()
        assert lines[0] == "block,label,factor,r,p_value,stars"
        # 7 stats + 10 categories, 2 factors each
        assert len(lines) == 1 + 34


class TestRun:
    def test_full_study(self, tmp_path):
        code = main(
            ["run", "--config", str(DEMO_CONFIG), "--out", str(tmp_path / "out")]
        )
        assert code == 0
        assert (tmp_path / "out" / "manifest.json").is_file()
        assert (tmp_path / "out" / "tables" / "alignment.csv").is_file()

    def test_run_without_config_fails(self, capsys):
        assert main(["run"]) == 1
        assert "config" in capsys.readouterr().err


class TestExitCodes:
    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 1

    def test_missing_input_file(self, stats_csvs, tmp_path):
        code = main(
            ["--out", str(tmp_path), "align",
             "--a", "/nonexistent.csv", "--b", str(stats_csvs[0])]
        )
        assert code == 1

    def test_invalid_config(self, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("schema_version: 1\noutput_dir: out\n")
        assert main(["run", "--config", str(bad)]) == 1

    def test_stage_failure_is_runtime_error(self, tmp_path, stats_csvs):
        # structurally valid config whose claims never intersect the market
        import numpy as np

        from tensor_align import ClaimsMatrix, default_taxonomy, write_claims_csv

        taxonomy = default_taxonomy()
        rng = np.random.default_rng(1)
        foreign = tmp_path / "foreign.csv"
        write_claims_csv(
            ClaimsMatrix(
                rng.dirichlet(np.ones(taxonomy.size), size=4),
                ("W1", "W2", "W3", "W4"), taxonomy,
            ),
            foreign,
        )
        cfg = tmp_path / "study.yaml"
        cfg.write_text(
            "schema_version: 1\n"
            "data:\n"
            f"  ohlcv_csv: {OHLCV}\n"
            f"  claims_csv: {foreign}\n"
            "decomposition: {rank: 2, max_rank: 2}\n"
            "inference: {n_permutations: 50, n_boot: 50, "
            "window_hours: 240, stride_hours: 120, vol_window: 48}\n"
            f"output_dir: {tmp_path / 'out'}\n"
        )
        assert main(["run", "--config", str(cfg)]) == 2
