"""Functional-claim score handling: aggregation, agreement, wire formats.

Upstream classifiers score each text chunk of an entity's documentation
against a fixed taxonomy of functional categories; every score row is a
probability distribution over the taxonomy.  This module turns chunk-level
rows into an entity-by-category claims matrix (mean over an entity's
chunks), measures agreement between classification methods, and reads and
writes the two CSV wire formats:

* chunk scores:  ``entity,chunk_id,method,<category...>``
* claims matrix: ``entity,<category...>``

Entities with fewer chunks than ``min_chunks`` stay in the matrix but are
flagged as low-data.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats as _sps

from ._rng import substream

__all__ = [
    "SIMPLEX_TOL",
    "Taxonomy",
    "ChunkScores",
    "ClaimsMatrix",
    "default_taxonomy",
    "aggregate_claims",
    "agreement_stats",
    "fleiss_kappa",
    "method_correlations",
    "bootstrap_category_ci",
    "read_chunk_scores_csv",
    "write_chunk_scores_csv",
    "read_claims_csv",
    "write_claims_csv",
]

#: Tolerance on |sum(scores) - 1| for a valid probability row.
SIMPLEX_TOL = 1e-6

_DEFAULT_CATEGORIES = (
    ("store_of_value", "Value preservation, scarcity, inflation hedging"),
    ("medium_of_exchange", "Payments, transfers, transaction settlement"),
    ("smart_contracts", "Programmable computation, decentralized applications"),
    ("defi", "Lending, trading, yield, financial primitives"),
    ("governance", "Voting, protocol control, treasury management"),
    ("scalability", "Throughput, layer-2, performance engineering"),
    ("privacy", "Anonymous transactions, zero-knowledge proofs"),
    ("interoperability", "Cross-chain bridges, multi-network communication"),
    ("data_storage", "Decentralized file and data persistence"),
    ("oracle", "External data feeds, real-world information"),
)


@dataclass(frozen=True)
class Taxonomy:
    """Ordered category labels (ties break by this order) with descriptions."""

    categories: tuple
    descriptions: tuple = ()

    def __post_init__(self):
        cats = tuple(map(str, self.categories))
        object.__setattr__(self, "categories", cats)
        desc = tuple(map(str, self.descriptions)) if self.descriptions else ("",) * len(cats)
        object.__setattr__(self, "descriptions", desc)
        if len(cats) < 2:
            raise ValueError("taxonomy needs at least two categories")
        if len(set(cats)) != len(cats):
            raise ValueError("duplicate category labels")
        if len(desc) != len(cats):
            raise ValueError("descriptions must pair one-to-one with categories")

    @property
    def size(self) -> int:
        return len(self.categories)

    def index(self, category: str) -> int:
        try:
            return self.categories.index(category)
        except ValueError:
            raise ValueError(f"unknown category {category!r}") from None


def default_taxonomy() -> Taxonomy:
    """The ten functional categories used throughout the pipeline."""
    names, descs = zip(*_DEFAULT_CATEGORIES)
    return Taxonomy(names, descs)


def _check_simplex(scores: np.ndarray, context: str) -> None:
    if np.any(scores < 0):
        raise ValueError(f"{context}: negative score")
    if abs(float(scores.sum()) - 1.0) > SIMPLEX_TOL:
        raise ValueError(
            f"{context}: scores sum to {scores.sum():.8f}, not 1 within {SIMPLEX_TOL}"
        )


@dataclass(frozen=True)
class ChunkScores:
    """Category distribution assigned to one text chunk by one method."""

    entity: str
    chunk_id: int
    method: str
    scores: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64).ravel()
        object.__setattr__(self, "scores", scores)
        if not self.entity:
            raise ValueError("entity must be non-empty")
        if self.chunk_id < 0:
            raise ValueError(f"{self.entity}: chunk_id must be >= 0")
        if not self.method:
            raise ValueError(f"{self.entity}#{self.chunk_id}: method must be non-empty")
        if not np.all(np.isfinite(scores)):
            raise ValueError(f"{self.entity}#{self.chunk_id}: non-finite score")
        _check_simplex(scores, f"{self.entity}#{self.chunk_id}")


@dataclass(frozen=True)
class ClaimsMatrix:
    """(entity x category) claim intensities; rows are probability vectors."""

    values: np.ndarray
    entity_labels: tuple
    taxonomy: Taxonomy
    low_data: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "entity_labels", tuple(map(str, self.entity_labels)))
        object.__setattr__(self, "low_data", frozenset(self.low_data))
        if values.shape != (len(self.entity_labels), self.taxonomy.size):
            raise ValueError(
                f"shape {values.shape} does not match {len(self.entity_labels)} entities "
                f"x {self.taxonomy.size} categories"
            )
        if len(set(self.entity_labels)) != len(self.entity_labels):
            raise ValueError("duplicate entity labels")
        for entity, row in zip(self.entity_labels, values):
            _check_simplex(row, entity)
        unknown = self.low_data - set(self.entity_labels)
        if unknown:
            raise ValueError(f"low_data flags for unknown entities: {sorted(unknown)}")

    def select_entities(self, entities) -> "ClaimsMatrix":
        idx = [self.entity_labels.index(e) for e in entities]
        keep = frozenset(e for e in self.low_data if e in set(entities))
        return ClaimsMatrix(self.values[idx], tuple(entities), self.taxonomy, keep)


def aggregate_claims(chunks, taxonomy: Taxonomy, min_chunks: int = 10) -> ClaimsMatrix:
    """Mean chunk distribution per entity, entities sorted lexicographically.

    All chunks must come from a single method (mixing methods would average
    incomparable score scales).  Entities with fewer than ``min_chunks``
    chunks are kept but flagged in ``low_data``.
    """
    chunks = list(chunks)
    if not chunks:
        raise ValueError("no chunk scores")
    methods = sorted({c.method for c in chunks})
    if len(methods) > 1:
        raise ValueError(f"chunks mix methods {methods}; aggregate one method at a time")
    by_entity = {}
    for c in chunks:
        if c.scores.size != taxonomy.size:
            raise ValueError(
                f"{c.entity}#{c.chunk_id}: {c.scores.size} scores for "
                f"{taxonomy.size} categories"
            )
        by_entity.setdefault(c.entity, []).append(c)
    entities = tuple(sorted(by_entity))
    values = np.vstack([
        np.mean([c.scores for c in by_entity[e]], axis=0) for e in entities
    ])
    low = frozenset(e for e in entities if len(by_entity[e]) < min_chunks)
    return ClaimsMatrix(values, entities, taxonomy, low)


# ---------------------------------------------------------------------------
# agreement between classification methods


@dataclass(frozen=True)
class AgreementStats:
    """Chunk-level agreement between two methods' score sets."""

    exact: float
    relaxed_top3: float
    cohen_kappa: float
    n_chunks: int


def _top_labels(scores: np.ndarray, k: int) -> np.ndarray:
    # stable sort so score ties resolve to the earlier taxonomy index
    return np.argsort(-scores, kind="stable")[:k]


def agreement_stats(a, b) -> AgreementStats:
    """Agreement between two chunk-score sets keyed by (entity, chunk_id).

    ``exact`` is top-1 label agreement, ``relaxed_top3`` the share of chunks
    where b's top label appears in a's top three, and ``cohen_kappa`` the
    chance-corrected top-1 agreement.  Both sets must cover identical keys.
    """
    a, b = list(a), list(b)
    a_by_key = {(c.entity, c.chunk_id): c for c in a}
    b_by_key = {(c.entity, c.chunk_id): c for c in b}
    if len(a_by_key) != len(a):
        raise ValueError("duplicate (entity, chunk_id) keys in first score set")
    if len(b_by_key) != len(b):
        raise ValueError("duplicate (entity, chunk_id) keys in second score set")
    missing_b = sorted(set(a_by_key) - set(b_by_key))
    missing_a = sorted(set(b_by_key) - set(a_by_key))
    if missing_a or missing_b:
        parts = []
        if missing_b:
            parts.append(f"missing from second set: {missing_b[:5]}")
        if missing_a:
            parts.append(f"missing from first set: {missing_a[:5]}")
        raise ValueError("chunk key mismatch; " + "; ".join(parts))
    if not a_by_key:
        raise ValueError("empty score sets")

    keys = sorted(a_by_key)
    a_top = np.array([_top_labels(a_by_key[k].scores, 1)[0] for k in keys])
    b_top = np.array([_top_labels(b_by_key[k].scores, 1)[0] for k in keys])
    a_top3 = [set(_top_labels(a_by_key[k].scores, 3).tolist()) for k in keys]

    exact = float((a_top == b_top).mean())
    relaxed = float(np.mean([b_top[i] in a_top3[i] for i in range(len(keys))]))

    n = len(keys)
    labels = sorted(set(a_top.tolist()) | set(b_top.tolist()))
    pa = np.array([(a_top == lab).mean() for lab in labels])
    pb = np.array([(b_top == lab).mean() for lab in labels])
    pe = float(pa @ pb)
    if pe >= 1.0:
        kappa = 1.0 if exact == 1.0 else 0.0
    else:
        kappa = (exact - pe) / (1.0 - pe)
    return AgreementStats(exact=exact, relaxed_top3=relaxed, cohen_kappa=float(kappa), n_chunks=n)


def fleiss_kappa(label_sets) -> float:
    """Fleiss' kappa across methods' top-1 labels.

    ``label_sets`` is one sequence of labels per method, all the same length
    (one label per chunk).  Requires at least two methods.
    """
    label_sets = [list(s) for s in label_sets]
    if len(label_sets) < 2:
        raise ValueError("fleiss_kappa needs at least two methods")
    n_items = len(label_sets[0])
    if n_items == 0:
        raise ValueError("empty label sets")
    if any(len(s) != n_items for s in label_sets):
        raise ValueError("all label sets must have the same length")
    n_raters = len(label_sets)
    categories = sorted({lab for s in label_sets for lab in s}, key=str)
    cat_index = {c: j for j, c in enumerate(categories)}
    counts = np.zeros((n_items, len(categories)))
    for s in label_sets:
        for i, lab in enumerate(s):
            counts[i, cat_index[lab]] += 1
    p_i = ((counts * counts).sum(axis=1) - n_raters) / (n_raters * (n_raters - 1))
    p_bar = float(p_i.mean())
    p_j = counts.sum(axis=0) / (n_items * n_raters)
    p_e = float((p_j * p_j).sum())
    if p_e >= 1.0:
        return 1.0 if p_bar == 1.0 else 0.0
    return float((p_bar - p_e) / (1.0 - p_e))


@dataclass(frozen=True)
class MethodCorrelations:
    """Pairwise correlations between methods' claims matrices."""

    methods: tuple
    pearson: np.ndarray
    spearman: np.ndarray
    mean_pearson: float
    mean_spearman: float
    per_category: dict


def method_correlations(named_matrices) -> MethodCorrelations:
    """Pearson/Spearman correlations of flattened claims matrices.

    ``named_matrices`` is a sequence of (name, ClaimsMatrix) over identical
    entities and taxonomy.  ``per_category`` maps each category to the mean
    pairwise Pearson correlation of that category's column across entities.
    """
    named = list(named_matrices)
    if len(named) < 2:
        raise ValueError("need at least two methods to correlate")
    names = tuple(name for name, _ in named)
    mats = [m for _, m in named]
    ref = mats[0]
    for name, m in named[1:]:
        if m.entity_labels != ref.entity_labels:
            raise ValueError(f"{name}: entity labels differ from {names[0]}")
        if m.taxonomy.categories != ref.taxonomy.categories:
            raise ValueError(f"{name}: taxonomy differs from {names[0]}")
    k = len(named)
    pearson = np.eye(k)
    spearman = np.eye(k)
    off_p, off_s = [], []
    for i in range(k):
        for j in range(i + 1, k):
            x = mats[i].values.ravel()
            y = mats[j].values.ravel()
            r_p = float(_sps.pearsonr(x, y).statistic)
            r_s = float(_sps.spearmanr(x, y).statistic)
            pearson[i, j] = pearson[j, i] = r_p
            spearman[i, j] = spearman[j, i] = r_s
            off_p.append(r_p)
            off_s.append(r_s)
    per_category = {}
    for c, category in enumerate(ref.taxonomy.categories):
        rs = []
        for i in range(k):
            for j in range(i + 1, k):
                x = mats[i].values[:, c]
                y = mats[j].values[:, c]
                if np.ptp(x) == 0 or np.ptp(y) == 0:
                    continue  # constant column: correlation undefined
                rs.append(float(_sps.pearsonr(x, y).statistic))
        per_category[category] = float(np.mean(rs)) if rs else float("nan")
    return MethodCorrelations(
        methods=names,
        pearson=pearson,
        spearman=spearman,
        mean_pearson=float(np.mean(off_p)),
        mean_spearman=float(np.mean(off_s)),
        per_category=per_category,
    )


@dataclass(frozen=True)
class CategoryCi:
    """Bootstrap percentile intervals for mean category scores."""

    categories: tuple
    means: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    n_boot: int
    level: float
    seed: int


def bootstrap_category_ci(chunks, taxonomy: Taxonomy, n_boot: int = 1000,
                          seed: int = 42, level: float = 0.95) -> CategoryCi:
    """Percentile bootstrap CIs for the mean score of each category.

    Chunks are resampled with replacement; each replicate draws its indices
    from a stream keyed (seed, iteration), so results do not depend on
    execution order.
    """
    chunks = list(chunks)
    if not chunks:
        raise ValueError("no chunk scores")
    if not 0 < level < 1:
        raise ValueError(f"level must be in (0, 1), got {level}")
    scores = np.vstack([c.scores for c in chunks])
    if scores.shape[1] != taxonomy.size:
        raise ValueError(
            f"{scores.shape[1]} score columns for {taxonomy.size} categories"
        )
    n = scores.shape[0]
    boot = np.empty((n_boot, taxonomy.size))
    for it in range(n_boot):
        idx = substream(seed, "claims-boot", it).integers(0, n, size=n)
        boot[it] = scores[idx].mean(axis=0)
    tail = 100.0 * (1.0 - level) / 2.0
    return CategoryCi(
        categories=taxonomy.categories,
        means=scores.mean(axis=0),
        lower=np.percentile(boot, tail, axis=0),
        upper=np.percentile(boot, 100.0 - tail, axis=0),
        n_boot=n_boot,
        level=level,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# wire formats


def write_chunk_scores_csv(chunks, taxonomy: Taxonomy, path) -> Path:
    """Write chunk scores as ``entity,chunk_id,method,<category...>``."""
    path = Path(path)
    chunks = sorted(chunks, key=lambda c: (c.entity, c.chunk_id, c.method))
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["entity", "chunk_id", "method", *taxonomy.categories])
        for c in chunks:
            if c.scores.size != taxonomy.size:
                raise ValueError(f"{c.entity}#{c.chunk_id}: score width != taxonomy size")
            writer.writerow(
                [c.entity, c.chunk_id, c.method, *(repr(float(v)) for v in c.scores)]
            )
    return path


def read_chunk_scores_csv(path, taxonomy: Taxonomy = None) -> tuple:
    """Read a chunk-score CSV; returns (chunks, taxonomy).

    When ``taxonomy`` is given, the file's category columns must match it
    exactly; otherwise the taxonomy is taken from the header.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if header[:3] != ["entity", "chunk_id", "method"] or len(header) < 5:
            raise ValueError(
                f"{path}: bad header; expected entity,chunk_id,method,<categories...>"
            )
        cats = tuple(header[3:])
        if taxonomy is None:
            taxonomy = Taxonomy(cats)
        elif cats != taxonomy.categories:
            raise ValueError(
                f"{path}: category columns {cats} do not match taxonomy "
                f"{taxonomy.categories}"
            )
        chunks = []
        seen = set()
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3 + taxonomy.size:
                raise ValueError(f"{path} line {lineno}: expected {3 + taxonomy.size} fields")
            try:
                chunk = ChunkScores(
                    entity=row[0].strip(),
                    chunk_id=int(row[1]),
                    method=row[2].strip(),
                    scores=np.array([float(v) for v in row[3:]]),
                )
            except ValueError as exc:
                raise ValueError(f"{path} line {lineno}: {exc}") from None
            key = (chunk.entity, chunk.chunk_id, chunk.method)
            if key in seen:
                raise ValueError(f"{path} line {lineno}: duplicate key {key}")
            seen.add(key)
            chunks.append(chunk)
    if not chunks:
        raise ValueError(f"{path}: no data rows")
    return chunks, taxonomy


def write_claims_csv(claims: ClaimsMatrix, path) -> Path:
    """Write a claims matrix as ``entity,<category...>``."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["entity", *claims.taxonomy.categories])
        for entity, row in zip(claims.entity_labels, claims.values):
            writer.writerow([entity, *(repr(float(v)) for v in row)])
    return path


def read_claims_csv(path, taxonomy: Taxonomy = None) -> ClaimsMatrix:
    """Read a claims-matrix CSV written by :func:`write_claims_csv`."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if not header or header[0] != "entity" or len(header) < 3:
            raise ValueError(f"{path}: bad header; expected entity,<categories...>")
        cats = tuple(header[1:])
        if taxonomy is None:
            taxonomy = Taxonomy(cats)
        elif cats != taxonomy.categories:
            raise ValueError(f"{path}: category columns do not match taxonomy")
        entities, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 1 + taxonomy.size:
                raise ValueError(f"{path} line {lineno}: expected {1 + taxonomy.size} fields")
            try:
                entities.append(row[0].strip())
                rows.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise ValueError(f"{path} line {lineno}: {exc}") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return ClaimsMatrix(np.array(rows), tuple(entities), taxonomy)
