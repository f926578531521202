"""Document loading and fixed-size word-window chunking.

A document is one entity's source text: a ``.txt`` or ``.md`` file named
after the entity (``btc.txt`` becomes entity ``BTC``).  Chunking slices the
whitespace-tokenized word sequence into fixed-size windows so every
classification method scores the same units of text.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

__all__ = [
    "DocumentRecord",
    "ChunkSpec",
    "Chunk",
    "chunk_document",
    "chunk_corpus",
    "load_documents",
]

_EXTENSIONS = (".txt", ".md")


@dataclass(frozen=True)
class DocumentRecord:
    """One entity's source text, word-counted on construction."""

    entity: str
    source: Path
    text: str
    word_count: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "source", Path(self.source))
        if not self.entity or self.entity != self.entity.strip():
            raise ValueError(f"bad entity label {self.entity!r}")
        words = self.text.split()
        if not words:
            raise ValueError(f"{self.source}: document has no text")
        object.__setattr__(self, "word_count", len(words))


@dataclass(frozen=True)
class ChunkSpec:
    """Word-window size and overlap used to slice documents."""

    size: int = 500
    overlap: int = 0

    def __post_init__(self):
        if self.size < 50:
            raise ValueError(f"chunk size must be >= 50 words, got {self.size}")
        if not 0 <= self.overlap < self.size:
            raise ValueError(
                f"overlap must lie in [0, size), got {self.overlap} for size {self.size}"
            )


@dataclass(frozen=True)
class Chunk:
    """One word window of one entity's text, ready for classification."""

    entity: str
    chunk_id: int
    text: str
    word_count: int

    def __post_init__(self):
        if not self.entity:
            raise ValueError("entity must be non-empty")
        if self.chunk_id < 0:
            raise ValueError(f"{self.entity}: chunk_id must be >= 0")
        if not self.text.strip():
            raise ValueError(f"{self.entity}#{self.chunk_id}: empty chunk text")


def chunk_document(doc: DocumentRecord, spec: ChunkSpec = ChunkSpec()) -> tuple:
    """Slice one document into word windows.

    Parameters
    ----------
    doc : DocumentRecord
        Source text to slice.
    spec : ChunkSpec
        Window size and overlap, in words.

    Returns
    -------
    tuple of Chunk
        Windows in reading order with ``chunk_id`` sequential from 0.  With
        zero overlap there are exactly ``ceil(word_count / size)`` windows
        and only the last may be short; with overlap, consecutive windows
        share ``overlap`` words and a window is only emitted when it adds
        unseen words.
    """
    words = doc.text.split()
    step = spec.size - spec.overlap
    starts = range(0, max(len(words) - spec.overlap, 1), step)
    return tuple(
        Chunk(doc.entity, cid, " ".join(words[start:start + spec.size]),
              min(spec.size, len(words) - start))
        for cid, start in enumerate(starts)
    )


def chunk_corpus(docs, spec: ChunkSpec = ChunkSpec()) -> tuple:
    """Chunk every document, numbering chunks sequentially per entity.

    Documents sharing an entity label contribute to a single chunk sequence
    in document order, keeping (entity, chunk_id) unique across the corpus.
    """
    next_id = {}
    chunks = []
    for doc in docs:
        for piece in chunk_document(doc, spec):
            cid = next_id.get(doc.entity, 0)
            chunks.append(Chunk(doc.entity, cid, piece.text, piece.word_count))
            next_id[doc.entity] = cid + 1
    if not chunks:
        raise ValueError("no documents to chunk")
    return tuple(chunks)


def load_documents(directory, extensions: tuple = _EXTENSIONS) -> tuple:
    """Read every ``.txt``/``.md`` file in a directory as one document.

    The entity label is the file stem uppercased; files with other
    extensions are ignored.  Documents come back sorted by file name.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"document directory {directory} does not exist")
    paths = sorted(p for p in directory.iterdir()
                   if p.is_file() and p.suffix.lower() in extensions)
    if not paths:
        raise ValueError(f"{directory}: no {'/'.join(extensions)} documents found")
    return tuple(
        DocumentRecord(p.stem.upper(), p, p.read_text(encoding="utf-8")) for p in paths
    )
