"""Turn entity documents into chunk-level functional-claim score files.

Pipeline: load ``.txt``/``.md`` documents (one entity per file), slice each
into fixed-size word windows, score every window against a category
taxonomy by zero-shot entailment, embedding similarity, or structured LLM
prompting, and emit one ``entity,chunk_id,method,<category...>`` CSV per
method for downstream aggregation.
"""

from .backends import (
    HashedEmbeddingBackend,
    HttpLlmClient,
    LexicalNliBackend,
    LlmEndpointError,
    ModelLoadError,
    ScriptedLlmClient,
    SentenceTransformerBackend,
    TransformersNliBackend,
)
from .classify import (
    DEFAULT_TAU,
    DEFAULT_TEMPLATE,
    LLM_TEMPLATE,
    classify_embedding,
    classify_llm,
    classify_nli,
)
from .documents import (
    Chunk,
    ChunkSpec,
    DocumentRecord,
    chunk_corpus,
    chunk_document,
    load_documents,
)
from .scores import (
    SIMPLEX_TOL,
    ChunkScores,
    read_chunk_scores_csv,
    write_chunk_scores_csv,
)
from .taxonomy import Taxonomy, default_taxonomy

__version__ = "0.1.0"

__all__ = [
    "Chunk",
    "ChunkScores",
    "ChunkSpec",
    "DEFAULT_TAU",
    "DEFAULT_TEMPLATE",
    "DocumentRecord",
    "HashedEmbeddingBackend",
    "HttpLlmClient",
    "LLM_TEMPLATE",
    "LexicalNliBackend",
    "LlmEndpointError",
    "ModelLoadError",
    "SIMPLEX_TOL",
    "ScriptedLlmClient",
    "SentenceTransformerBackend",
    "Taxonomy",
    "TransformersNliBackend",
    "chunk_corpus",
    "chunk_document",
    "classify_embedding",
    "classify_llm",
    "classify_nli",
    "default_taxonomy",
    "load_documents",
    "read_chunk_scores_csv",
    "write_chunk_scores_csv",
]
