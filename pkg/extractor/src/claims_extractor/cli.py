"""Command line entry point: a document directory in, scores files out.

``claims-extract --method nli docs/ --out out/`` chunks every ``.txt``/
``.md`` file in ``docs/`` and writes ``out/chunk_scores_nli.csv`` plus a
``manifest.json`` recording models, template, temperature, and chunk
settings.  ``--method all`` runs every method, one scores file per method.

Exit codes: 0 success, 1 validation error (arguments, paths, settings),
2 runtime failure (model loading, endpoint, excessive dropped rows).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import backends, classify
from .documents import ChunkSpec, chunk_corpus, load_documents
from .scores import write_chunk_scores_csv
from .taxonomy import default_taxonomy

__all__ = ["main"]

METHODS = ("nli", "embed", "llm")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; keep 2 for runtime failures only.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="claims-extract",
        description="Chunk documents and score functional-category claims.",
    )
    parser.add_argument("docs", help="directory of .txt/.md documents, one entity per file stem")
    parser.add_argument("--method", required=True, choices=METHODS + ("all",),
                        help="scoring method, or 'all' for one file per method")
    parser.add_argument("--out", default="out", help="output directory (default: out)")
    parser.add_argument("--chunk-size", type=int, default=500,
                        help="words per chunk (default: 500)")
    parser.add_argument("--overlap", type=int, default=0,
                        help="words shared by consecutive chunks (default: 0)")
    parser.add_argument("--template", default=classify.DEFAULT_TEMPLATE,
                        help="alternative NLI hypothesis template; {} receives the category")
    parser.add_argument("--tau", type=float, default=classify.DEFAULT_TAU,
                        help="softmax temperature for embedding similarities (default: 0.1)")
    parser.add_argument("--backend", choices=("model", "lexical"), default="model",
                        help="'model' uses hub-hosted weights; 'lexical' uses the "
                             "deterministic offline stand-ins")
    parser.add_argument("--nli-model", default="facebook/bart-large-mnli",
                        help="NLI checkpoint for --backend model")
    parser.add_argument("--embed-model", default="sentence-transformers/all-MiniLM-L6-v2",
                        help="embedding checkpoint for --backend model")
    parser.add_argument("--endpoint", default=None,
                        help="chat-completions URL; required when the method includes llm")
    parser.add_argument("--llm-model", default="local",
                        help="model name sent to the LLM endpoint")
    return parser


def _nli_backend(args):
    if args.backend == "lexical":
        return backends.LexicalNliBackend()
    return backends.TransformersNliBackend(args.nli_model)


def _embed_backend(args):
    if args.backend == "lexical":
        return backends.HashedEmbeddingBackend()
    return backends.SentenceTransformerBackend(args.embed_model)


def _run(args) -> int:
    methods = METHODS if args.method == "all" else (args.method,)
    if "llm" in methods and not args.endpoint:
        raise ValueError("--endpoint is required when the method includes llm")
    docs = load_documents(args.docs)
    spec = ChunkSpec(size=args.chunk_size, overlap=args.overlap)
    chunks = chunk_corpus(docs, spec)
    taxonomy = default_taxonomy()

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "chunk_size": spec.size,
        "overlap": spec.overlap,
        "taxonomy": list(taxonomy.categories),
        "documents": [
            {"entity": d.entity, "source": str(d.source), "words": d.word_count}
            for d in docs
        ],
        "methods": {},
    }
    for method in methods:
        if method == "nli":
            backend = _nli_backend(args)
            rows = classify.classify_nli(chunks, taxonomy, backend,
                                         template=args.template)
            detail = {"model": backend.model_name, "template": args.template}
        elif method == "embed":
            backend = _embed_backend(args)
            rows = classify.classify_embedding(chunks, taxonomy, backend,
                                               tau=args.tau)
            detail = {"model": backend.model_name, "tau": args.tau}
        else:
            client = backends.HttpLlmClient(args.endpoint, model=args.llm_model)
            rows = classify.classify_llm(chunks, taxonomy, client)
            detail = {"model": args.llm_model, "endpoint": args.endpoint,
                      "dropped": len(chunks) - len(rows)}
        path = out_dir / f"chunk_scores_{method}.csv"
        write_chunk_scores_csv(rows, taxonomy, path)
        detail["rows"] = len(rows)
        detail["file"] = path.name
        manifest["methods"][method] = detail
        print(f"{method}: {len(rows)} rows -> {path}")
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"manifest -> {manifest_path}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _run(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (backends.ModelLoadError, backends.LlmEndpointError,
            RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
