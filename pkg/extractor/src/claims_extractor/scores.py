"""Chunk-score rows and their CSV wire format.

One row is the probability distribution one method assigned to one chunk.
Files are written ``entity,chunk_id,method,<category...>`` with rows sorted
by (entity, chunk_id, method) and ``repr`` float cells, so a rerun on
identical inputs produces a byte-identical file.  This is the same format
the alignment toolkit ingests, which is the only coupling between the two
packages.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .taxonomy import Taxonomy

__all__ = [
    "SIMPLEX_TOL",
    "ChunkScores",
    "write_chunk_scores_csv",
    "read_chunk_scores_csv",
]

#: Tolerance on |sum(scores) - 1| for a valid probability row.
SIMPLEX_TOL = 1e-6


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
        if np.any(scores < 0):
            raise ValueError(f"{self.entity}#{self.chunk_id}: negative score")
        if abs(float(scores.sum()) - 1.0) > SIMPLEX_TOL:
            raise ValueError(
                f"{self.entity}#{self.chunk_id}: scores sum to "
                f"{scores.sum():.8f}, not 1 within {SIMPLEX_TOL}"
            )


def write_chunk_scores_csv(rows, taxonomy: Taxonomy, path) -> Path:
    """Write chunk scores as ``entity,chunk_id,method,<category...>``."""
    path = Path(path)
    rows = sorted(rows, key=lambda r: (r.entity, r.chunk_id, r.method))
    if not rows:
        raise ValueError("no score rows to write")
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["entity", "chunk_id", "method", *taxonomy.categories])
        for r in rows:
            if r.scores.size != taxonomy.size:
                raise ValueError(f"{r.entity}#{r.chunk_id}: score width != taxonomy size")
            writer.writerow(
                [r.entity, r.chunk_id, r.method, *(repr(float(v)) for v in r.scores)]
            )
    return path


def read_chunk_scores_csv(path, taxonomy: Taxonomy = None) -> tuple:
    """Read a chunk-score CSV back; returns (rows, taxonomy).

    When ``taxonomy`` is given the file's category columns must match it
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
        rows = []
        seen = set()
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3 + taxonomy.size:
                raise ValueError(f"{path} line {lineno}: expected {3 + taxonomy.size} fields")
            try:
                parsed = ChunkScores(
                    entity=row[0].strip(),
                    chunk_id=int(row[1]),
                    method=row[2].strip(),
                    scores=np.array([float(v) for v in row[3:]]),
                )
            except ValueError as exc:
                raise ValueError(f"{path} line {lineno}: {exc}") from None
            key = (parsed.entity, parsed.chunk_id, parsed.method)
            if key in seen:
                raise ValueError(f"{path} line {lineno}: duplicate key {key}")
            seen.add(key)
            rows.append(parsed)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return tuple(rows), taxonomy
