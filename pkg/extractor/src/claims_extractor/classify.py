"""Chunk classification: entailment, embedding-similarity, and LLM scoring.

All three methods emit :class:`~claims_extractor.scores.ChunkScores` rows on
the probability simplex, normalized by a softmax over category scores, and
canonicalize output order by (entity, chunk_id) so batched or parallel
scoring yields identical files.
"""

from __future__ import annotations

import json
import warnings

import numpy as np
from scipy.special import softmax

from .scores import ChunkScores
from .taxonomy import Taxonomy

__all__ = [
    "DEFAULT_TEMPLATE",
    "DEFAULT_TAU",
    "LLM_TEMPLATE",
    "MAX_ATTEMPTS",
    "MAX_DROP_FRACTION",
    "classify_nli",
    "classify_embedding",
    "classify_llm",
]

#: Hypothesis template for entailment scoring; {} receives the category name.
DEFAULT_TEMPLATE = "This text is about {}."

#: Temperature dividing cosine similarities before their softmax.  Cosines
#: live in a narrow band, so without sharpening every profile would sit
#: near uniform.
DEFAULT_TAU = 0.1

#: Prompt for structured LLM scoring; needs {categories} and {passage}.
LLM_TEMPLATE = (
    "Score how strongly the passage is about each category.\n"
    "Categories: {categories}.\n"
    "Reply with a single JSON object mapping every category to a "
    "non-negative number. No other text.\n"
    "Passage:\n{passage}"
)

#: A chunk's reply may fail this many times before the row is dropped.
MAX_ATTEMPTS = 3

#: Dropping more than this fraction of chunks aborts the run.
MAX_DROP_FRACTION = 0.05


def _display(category: str) -> str:
    return category.replace("_", " ")


def _rows(chunks, method: str, matrix: np.ndarray) -> tuple:
    rows = [
        ChunkScores(c.entity, c.chunk_id, method, scores)
        for c, scores in zip(chunks, matrix)
    ]
    return tuple(sorted(rows, key=lambda r: (r.entity, r.chunk_id)))


def _checked(chunks) -> tuple:
    chunks = tuple(chunks)
    if not chunks:
        raise ValueError("no chunks to classify")
    return chunks


def classify_nli(chunks, taxonomy: Taxonomy, backend,
                 template: str = DEFAULT_TEMPLATE) -> tuple:
    """Score chunks by entailment against one hypothesis per category.

    Parameters
    ----------
    chunks : iterable of Chunk
        Text windows to score.
    taxonomy : Taxonomy
        Categories; each yields the hypothesis ``template`` formatted with
        the category name (underscores spaced).
    backend : NLI backend
        Provides ``entailment(text, hypotheses)`` raw scores.
    template : str
        Hypothesis template containing one ``{}`` placeholder.

    Returns
    -------
    tuple of ChunkScores
        Method ``"nli"``; per chunk, the softmax over per-category
        entailment scores, so every row is a probability distribution.
    """
    chunks = _checked(chunks)
    if "{}" not in template:
        raise ValueError(f"template {template!r} needs a {{}} placeholder")
    hypotheses = tuple(template.format(_display(c)) for c in taxonomy.categories)
    raw = np.vstack([backend.entailment(c.text, hypotheses) for c in chunks])
    return _rows(chunks, "nli", softmax(raw, axis=1))


def classify_embedding(chunks, taxonomy: Taxonomy, backend,
                       tau: float = DEFAULT_TAU) -> tuple:
    """Score chunks by cosine similarity to category descriptions.

    Parameters
    ----------
    chunks : iterable of Chunk
        Text windows to score.
    taxonomy : Taxonomy
        Categories; a blank description falls back to the spaced name.
    backend : embedding backend
        Provides ``embed(texts)`` with unit-norm rows.
    tau : float
        Temperature dividing similarities before the softmax.

    Returns
    -------
    tuple of ChunkScores
        Method ``"embed"``; rows are probability distributions.
    """
    chunks = _checked(chunks)
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    anchors = tuple(
        desc if desc else _display(cat)
        for cat, desc in zip(taxonomy.categories, taxonomy.descriptions)
    )
    cat_vecs = backend.embed(anchors)
    chunk_vecs = backend.embed(tuple(c.text for c in chunks))
    sims = chunk_vecs @ cat_vecs.T  # unit rows, so this is cosine
    return _rows(chunks, "embed", softmax(sims / tau, axis=1))


def _strip_fence(reply: str) -> str:
    # Models often wrap JSON in a ``` fence; unwrap before strict parsing.
    reply = reply.strip()
    if reply.startswith("```"):
        reply = reply.split("\n", 1)[1] if "\n" in reply else ""
        if reply.rstrip().endswith("```"):
            reply = reply.rstrip()[:-3]
    return reply.strip()


def _parse_llm_reply(reply: str, taxonomy: Taxonomy) -> np.ndarray:
    data = json.loads(_strip_fence(reply))
    if not isinstance(data, dict):
        raise ValueError("reply is not a JSON object")
    if set(data) != set(taxonomy.categories):
        raise ValueError("reply keys do not match the taxonomy categories")
    raw = np.array([float(data[c]) for c in taxonomy.categories])
    if not np.all(np.isfinite(raw)):
        raise ValueError("non-finite score")
    if np.any(raw < 0):
        raise ValueError("negative score")
    total = float(raw.sum())
    if total <= 0:
        raise ValueError("scores sum to zero")
    return raw / total


def classify_llm(chunks, taxonomy: Taxonomy, client,
                 template: str = LLM_TEMPLATE) -> tuple:
    """Score chunks by structured-JSON LLM prompting.

    Parameters
    ----------
    chunks : iterable of Chunk
        Text windows to score.
    taxonomy : Taxonomy
        Categories the reply object must cover exactly.
    client : LLM client
        Provides ``complete(prompt) -> str``.
    template : str
        Prompt with ``{categories}`` and ``{passage}`` placeholders.

    Returns
    -------
    tuple of ChunkScores
        Method ``"llm"``; replies normalized by their sum.  A chunk whose
        replies fail to parse ``MAX_ATTEMPTS`` times is dropped with a
        warning; dropping more than ``MAX_DROP_FRACTION`` of the chunks
        raises, because at that point the endpoint, not the corpus, is the
        problem.
    """
    chunks = _checked(chunks)
    if "{categories}" not in template or "{passage}" not in template:
        raise ValueError("template needs {categories} and {passage} placeholders")
    categories = ", ".join(taxonomy.categories)
    kept, rows, n_dropped = [], [], 0
    for chunk in chunks:
        prompt = template.format(categories=categories, passage=chunk.text)
        reason = ""
        for _attempt in range(MAX_ATTEMPTS):
            try:
                parsed = _parse_llm_reply(client.complete(prompt), taxonomy)
            except (ValueError, TypeError) as exc:
                reason = str(exc)
                continue
            kept.append(chunk)
            rows.append(parsed)
            break
        else:
            n_dropped += 1
            warnings.warn(
                f"{chunk.entity}#{chunk.chunk_id}: dropped after "
                f"{MAX_ATTEMPTS} invalid replies ({reason})",
                RuntimeWarning,
                stacklevel=2,
            )
    if n_dropped > MAX_DROP_FRACTION * len(chunks):
        raise RuntimeError(
            f"{n_dropped} of {len(chunks)} chunks dropped "
            f"(> {MAX_DROP_FRACTION:.0%}); check the endpoint"
        )
    return _rows(kept, "llm", np.vstack(rows))
