import numpy as np
import pytest

from claims_extractor import (
    ChunkScores,
    Taxonomy,
    default_taxonomy,
    read_chunk_scores_csv,
    write_chunk_scores_csv,
)

TAX = default_taxonomy()


def row(entity="BTC", chunk_id=0, method="nli", peak=0):
    scores = np.full(TAX.size, 0.05)
    scores[peak] = 1.0 - 0.05 * (TAX.size - 1)
    return ChunkScores(entity, chunk_id, method, scores)


SAMPLE = [row("ETH", 1, peak=2), row("ETH", 0, peak=2),
          row("BTC", 0, peak=0), row("BTC", 1, peak=0), row("ZEC", 0, peak=6)]


class TestRowValidation:
    def test_rejects_off_simplex_sum(self):
        with pytest.raises(ValueError, match="sum to"):
            ChunkScores("BTC", 0, "nli", np.full(10, 0.2))

    def test_rejects_negative_score(self):
        scores = np.full(10, 0.2)
        scores[0] = -0.8
        with pytest.raises(ValueError, match="negative"):
            ChunkScores("BTC", 0, "nli", scores)

    def test_rejects_negative_chunk_id(self):
        with pytest.raises(ValueError, match="chunk_id"):
            ChunkScores("BTC", -1, "nli", np.full(10, 0.1))

    def test_rejects_blank_entity_and_method(self):
        with pytest.raises(ValueError, match="entity"):
            ChunkScores("", 0, "nli", np.full(10, 0.1))
        with pytest.raises(ValueError, match="method"):
            ChunkScores("BTC", 0, "", np.full(10, 0.1))

    def test_rejects_non_finite(self):
        scores = np.full(10, 0.1)
        scores[3] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            ChunkScores("BTC", 0, "nli", scores)


class TestWriteRead:
    def test_round_trip_preserves_rows(self, tmp_path):
        path = write_chunk_scores_csv(SAMPLE, TAX, tmp_path / "scores.csv")
        rows, tax = read_chunk_scores_csv(path)
        assert tax.categories == TAX.categories
        assert len(rows) == len(SAMPLE)
        by_key = {(r.entity, r.chunk_id): r for r in rows}
        for original in SAMPLE:
            np.testing.assert_array_equal(
                by_key[(original.entity, original.chunk_id)].scores, original.scores)

    def test_header_and_sort_order(self, tmp_path):
        path = write_chunk_scores_csv(SAMPLE, TAX, tmp_path / "scores.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "entity,chunk_id,method," + ",".join(TAX.categories)
        keys = [tuple(line.split(",")[:2]) for line in lines[1:]]
        assert keys == sorted(keys)

    def test_write_is_deterministic(self, tmp_path):
        a = write_chunk_scores_csv(SAMPLE, TAX, tmp_path / "a.csv")
        b = write_chunk_scores_csv(list(reversed(SAMPLE)), TAX, tmp_path / "b.csv")
        assert a.read_bytes() == b.read_bytes()

    def test_write_rejects_empty_and_width_mismatch(self, tmp_path):
        with pytest.raises(ValueError, match="no score rows"):
            write_chunk_scores_csv([], TAX, tmp_path / "x.csv")
        narrow = Taxonomy(("a", "b"))
        bad = ChunkScores("BTC", 0, "nli", np.array([0.5, 0.5]))
        with pytest.raises(ValueError, match="width"):
            write_chunk_scores_csv([bad], TAX, tmp_path / "x.csv")

    def test_read_rejects_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("entity,method,a,b\n")
        with pytest.raises(ValueError, match="bad header"):
            read_chunk_scores_csv(path)

    def test_read_rejects_duplicate_key_with_line_number(self, tmp_path):
        path = tmp_path / "dup.csv"
        half = ",".join(["0.1"] * 10)
        path.write_text(
            "entity,chunk_id,method," + ",".join(TAX.categories) + "\n"
            f"BTC,0,nli,{half}\nBTC,0,nli,{half}\n")
        with pytest.raises(ValueError, match="line 3: duplicate"):
            read_chunk_scores_csv(path)

    def test_read_rejects_short_row_with_line_number(self, tmp_path):
        path = tmp_path / "short.csv"
        path.write_text(
            "entity,chunk_id,method," + ",".join(TAX.categories) + "\n"
            "BTC,0,nli,0.5,0.5\n")
        with pytest.raises(ValueError, match="line 2: expected 13 fields"):
            read_chunk_scores_csv(path)

    def test_read_rejects_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(ValueError, match="empty file"):
            read_chunk_scores_csv(path)

    def test_read_checks_taxonomy_match(self, tmp_path):
        path = write_chunk_scores_csv(SAMPLE, TAX, tmp_path / "scores.csv")
        with pytest.raises(ValueError, match="do not match taxonomy"):
            read_chunk_scores_csv(path, Taxonomy(("x", "y")))
