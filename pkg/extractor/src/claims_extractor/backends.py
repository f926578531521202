"""Scoring backends: entailment models, sentence embeddings, LLM chat clients.

Hub-hosted models (``transformers`` / ``sentence-transformers``) do the
real scoring when their weights are available; the lexical and hashed
backends are deterministic, dependency-light stand-ins so extraction can
run and be tested on machines with no model cache.  Every backend is
deterministic given fixed inputs.

Backend contracts
-----------------
* NLI backends expose ``entailment(text, hypotheses) -> (len(hypotheses),)``
  raw scores, larger meaning more entailed.
* Embedding backends expose ``embed(texts) -> (n, d)`` rows of unit L2 norm
  (all-zero rows allowed for texts with no tokens).
* LLM clients expose ``complete(prompt) -> str``.
"""

from __future__ import annotations

import hashlib
import re
from collections import Counter

import numpy as np

__all__ = [
    "ModelLoadError",
    "LlmEndpointError",
    "TransformersNliBackend",
    "LexicalNliBackend",
    "SentenceTransformerBackend",
    "HashedEmbeddingBackend",
    "HttpLlmClient",
    "ScriptedLlmClient",
]


class ModelLoadError(RuntimeError):
    """A scoring model could not be loaded."""


class LlmEndpointError(RuntimeError):
    """The LLM endpoint is unreachable or replied with a non-chat payload."""


_TOKEN = re.compile(r"[a-z0-9]+")

# Function words plus hypothesis-template boilerplate; the lexical backend
# must not score a hypothesis by these.
STOPWORDS = frozenset(
    "a an and are as at be by for from has in is it its of on or that the "
    "this to was were will with about concerns discusses text passage".split()
)


def _tokenize(text: str) -> list:
    return _TOKEN.findall(text.lower())


class TransformersNliBackend:
    """Entailment scores from a hub-hosted NLI cross-encoder."""

    def __init__(self, model_name: str = "facebook/bart-large-mnli"):
        try:
            from transformers import AutoModelForSequenceClassification, AutoTokenizer

            self._tokenizer = AutoTokenizer.from_pretrained(model_name)
            self._model = AutoModelForSequenceClassification.from_pretrained(model_name)
        except Exception as exc:
            raise ModelLoadError(
                f"could not load NLI model {model_name!r}: {exc}; download the "
                "weights into the local hub cache, pass a cached model name, or "
                "switch to the lexical backend"
            ) from exc
        self._model.eval()
        label2id = {k.lower(): v for k, v in self._model.config.label2id.items()}
        if "entailment" not in label2id:
            raise ModelLoadError(
                f"{model_name!r} has no 'entailment' label; pick an NLI checkpoint"
            )
        self._entail = label2id["entailment"]
        self.model_name = model_name

    def entailment(self, text: str, hypotheses) -> np.ndarray:
        """Entailment logit of ``text`` against each hypothesis."""
        import torch

        hypotheses = list(hypotheses)
        with torch.no_grad():
            enc = self._tokenizer(
                [text] * len(hypotheses), hypotheses,
                truncation=True, padding=True, return_tensors="pt",
            )
            logits = self._model(**enc).logits
        return logits[:, self._entail].numpy().astype(np.float64)


class LexicalNliBackend:
    """Deterministic entailment proxy: content-word hit rates.

    A hypothesis scores by how often its content tokens occur in the
    premise, per hundred premise tokens and averaged over the hypothesis
    tokens.  No weights, no randomness; a stand-in for offline runs and
    tests, not a statement about classification quality.
    """

    model_name = "lexical-overlap"

    def __init__(self, ignore=frozenset()):
        self._ignore = STOPWORDS | frozenset(ignore)

    def entailment(self, text: str, hypotheses) -> np.ndarray:
        premise = _tokenize(text)
        counts = Counter(premise)
        scale = 100.0 / max(len(premise), 1)
        out = np.zeros(len(list(hypotheses)))
        for j, hyp in enumerate(hypotheses):
            content = [t for t in _tokenize(hyp) if t not in self._ignore]
            if content:
                out[j] = scale * sum(counts[t] for t in content) / len(content)
        return out


class SentenceTransformerBackend:
    """Sentence embeddings from a hub-hosted encoder, rows unit-normalized."""

    def __init__(self, model_name: str = "sentence-transformers/all-MiniLM-L6-v2"):
        try:
            from sentence_transformers import SentenceTransformer

            self._model = SentenceTransformer(model_name)
        except Exception as exc:
            raise ModelLoadError(
                f"could not load embedding model {model_name!r}: {exc}; download "
                "the weights into the local hub cache, pass a cached model name, "
                "or switch to the hashed backend"
            ) from exc
        self.model_name = model_name

    def embed(self, texts) -> np.ndarray:
        return np.asarray(
            self._model.encode(list(texts), normalize_embeddings=True),
            dtype=np.float64,
        )


class HashedEmbeddingBackend:
    """Deterministic bag-of-words embeddings via feature hashing.

    Each token maps to a signed bucket through a BLAKE2 digest, so
    identical texts embed identically on any platform without weights.
    Rows are unit-normalized (zero kept for token-free texts).
    """

    model_name = "hashed-bow"

    def __init__(self, dim: int = 512):
        if dim < 8:
            raise ValueError(f"embedding dim must be >= 8, got {dim}")
        self.dim = int(dim)

    def _vector(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        for token, count in Counter(_tokenize(text)).items():
            digest = hashlib.blake2b(token.encode(), digest_size=5).digest()
            index = int.from_bytes(digest[:4], "big") % self.dim
            sign = 1.0 if digest[4] % 2 else -1.0
            vec[index] += sign * count
        return vec

    def embed(self, texts) -> np.ndarray:
        mat = np.vstack([self._vector(t) for t in texts])
        norms = np.linalg.norm(mat, axis=1, keepdims=True)
        return mat / np.where(norms == 0.0, 1.0, norms)


class HttpLlmClient:
    """Chat-completions client pinned to temperature 0 for stable reruns."""

    def __init__(self, endpoint: str, model: str = "local", timeout: float = 60.0):
        if not endpoint:
            raise ValueError("endpoint must be non-empty")
        self.endpoint = endpoint
        self.model = model
        self.timeout = float(timeout)

    def payload(self, prompt: str) -> dict:
        return {
            "model": self.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt}],
        }

    def complete(self, prompt: str) -> str:
        import requests

        try:
            resp = requests.post(self.endpoint, json=self.payload(prompt),
                                 timeout=self.timeout)
            resp.raise_for_status()
        except requests.RequestException as exc:
            raise LlmEndpointError(
                f"LLM endpoint {self.endpoint} unreachable: {exc}; start the "
                "local server or point --endpoint at a running one"
            ) from exc
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise LlmEndpointError(
                f"LLM endpoint {self.endpoint} returned a non-chat payload: {exc}"
            ) from exc


class ScriptedLlmClient:
    """Replays canned replies and records prompts; for tests and dry runs.

    ``replies`` is either a callable mapping prompt -> reply or an iterable
    of replies consumed in call order.
    """

    model = "scripted"

    def __init__(self, replies):
        if callable(replies):
            self._reply = replies
        else:
            queue = iter(list(replies))

            def _reply(_prompt, _queue=queue):
                try:
                    return next(_queue)
                except StopIteration:
                    raise RuntimeError("scripted replies exhausted") from None

            self._reply = _reply
        self.prompts = []

    def complete(self, prompt: str) -> str:
        self.prompts.append(prompt)
        return self._reply(prompt)
