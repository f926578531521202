"""Shared fixtures: a designed document corpus and a local chat endpoint.

The corpus plants one dominant category per entity (BTC value-preservation,
ETH programmable contracts, ZEC privacy) by interleaving topic vocabulary
with neutral filler, so argmax checks have a known answer.  The ZEC
document is exactly 1200 words to pin chunk arithmetic.  The chat server
returns deterministic per-category scores derived from a checksum of the
prompt, so LLM-method runs are reproducible end to end.
"""

from __future__ import annotations

import json
import threading
import zlib
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from claims_extractor import default_taxonomy

# Filler tokens share nothing with category names or descriptions, so they
# add length without shifting any category score.
FILLER = ("morning", "harbor", "garden", "stone", "cloud",
          "winter", "letter", "music", "copper", "meadow")

TOPIC_WORDS = {
    "BTC": ("store", "value", "scarcity", "scarce", "inflation",
            "hedging", "preservation"),
    "ETH": ("smart", "contracts", "programmable", "computation",
            "decentralized", "applications"),
    "ZEC": ("privacy", "anonymous", "transactions", "zero",
            "knowledge", "proofs", "shielded"),
}

WORD_COUNTS = {"BTC": 680, "ETH": 540, "ZEC": 1200}


def make_text(topic_words, n_words: int) -> str:
    words = [
        topic_words[(i // 2) % len(topic_words)] if i % 2 == 0
        else FILLER[(i // 2) % len(FILLER)]
        for i in range(n_words)
    ]
    return " ".join(words)


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    (root / "btc.txt").write_text(make_text(TOPIC_WORDS["BTC"], WORD_COUNTS["BTC"]))
    (root / "eth.md").write_text(make_text(TOPIC_WORDS["ETH"], WORD_COUNTS["ETH"]))
    (root / "zec.txt").write_text(make_text(TOPIC_WORDS["ZEC"], WORD_COUNTS["ZEC"]))
    (root / "notes.pdf").write_bytes(b"%PDF-1.4 ignored")
    return root


def scripted_scores(prompt: str) -> dict:
    """Deterministic per-category scores keyed by a prompt checksum."""
    return {
        c: (zlib.crc32(f"{c}|{prompt}".encode()) % 97 + 1) / 10.0
        for c in default_taxonomy().categories
    }


class _ChatHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        prompt = body["messages"][0]["content"]
        reply = json.dumps(scripted_scores(prompt))
        payload = json.dumps({"choices": [{"message": {"content": reply}}]}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):  # keep test output quiet
        pass


@pytest.fixture(scope="session")
def llm_endpoint():
    server = HTTPServer(("127.0.0.1", 0), _ChatHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/v1/chat/completions"
    server.shutdown()
    thread.join()
