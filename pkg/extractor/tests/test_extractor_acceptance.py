"""Release acceptance for the extractor.

Emitted files must satisfy the chunk-score contract shared with the
alignment toolkit, end to end: its reader accepts every row, chunk
arithmetic is exact, rows lie on the probability simplex, and reruns are
byte-identical.  One pass/fail line per check.
"""

import numpy as np
import pytest
from tensor_align.claims import (
    aggregate_claims,
    default_taxonomy,
    method_correlations,
    read_chunk_scores_csv,
)

from claims_extractor import ChunkSpec, chunk_document, load_documents
from claims_extractor.cli import main

METHODS = ("nli", "embed", "llm")


@pytest.fixture(scope="module")
def emitted(corpus_dir, llm_endpoint, tmp_path_factory):
    out = tmp_path_factory.mktemp("emitted")
    code = main(["--method", "all", "--backend", "lexical", str(corpus_dir),
                 "--out", str(out), "--endpoint", llm_endpoint])
    assert code == 0
    return out


def test_emitted_files_pass_the_alignment_reader(emitted):
    taxonomy = default_taxonomy()
    for method in METHODS:
        rows, _ = read_chunk_scores_csv(emitted / f"chunk_scores_{method}.csv",
                                        taxonomy)
        assert {r.method for r in rows} == {method}
        by_entity = {}
        for r in rows:
            by_entity.setdefault(r.entity, []).append(r.chunk_id)
        assert set(by_entity) == {"BTC", "ETH", "ZEC"}
        for entity, ids in by_entity.items():
            assert ids == list(range(len(ids))), f"{method}/{entity}: ids not sequential"
        claims = aggregate_claims(rows, taxonomy, min_chunks=1)
        assert claims.entity_labels == ("BTC", "ETH", "ZEC")


def test_1200_word_document_yields_exactly_three_chunks(corpus_dir):
    zec = [d for d in load_documents(corpus_dir) if d.entity == "ZEC"]
    assert len(zec) == 1 and zec[0].word_count == 1200
    chunks = chunk_document(zec[0], ChunkSpec(size=500))
    assert [c.word_count for c in chunks] == [500, 500, 200]
    assert [c.chunk_id for c in chunks] == [0, 1, 2]


def test_nli_rows_lie_on_the_simplex(emitted):
    rows, _ = read_chunk_scores_csv(emitted / "chunk_scores_nli.csv")
    for r in rows:
        assert np.all(r.scores >= 0.0)
        assert abs(float(r.scores.sum()) - 1.0) <= 1e-6


def test_rerun_emits_byte_identical_files(emitted, corpus_dir, llm_endpoint,
                                          tmp_path_factory):
    again = tmp_path_factory.mktemp("again")
    code = main(["--method", "all", "--backend", "lexical", str(corpus_dir),
                 "--out", str(again), "--endpoint", llm_endpoint])
    assert code == 0
    for method in METHODS:
        name = f"chunk_scores_{method}.csv"
        assert (again / name).read_bytes() == (emitted / name).read_bytes(), name


def test_methods_correlate_through_claims_aggregation(emitted):
    taxonomy = default_taxonomy()
    named = []
    for method in ("nli", "embed"):
        rows, _ = read_chunk_scores_csv(emitted / f"chunk_scores_{method}.csv",
                                        taxonomy)
        named.append((method, aggregate_claims(rows, taxonomy, min_chunks=1)))
    corr = method_correlations(named)
    assert corr.methods == ("nli", "embed")
    assert -1.0 <= corr.mean_pearson <= 1.0
    assert -1.0 <= corr.mean_spearman <= 1.0
    assert set(corr.per_category) == set(taxonomy.categories)
