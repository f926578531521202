"""Regenerate the bundled synthetic fixture under demos/data/.

The fixture is a 480-hour, six-asset OHLCV series plus NLI-style chunk
scores for five of those assets (and one entity with no market data, to
exercise the entity-intersection logic).  Claim profiles are planted
from each asset's own statistics, so the alignment analyses have real
signal to find.  Everything is seeded; rerunning this script reproduces
the same files byte for byte.
"""

from __future__ import annotations

import datetime as dt
from pathlib import Path

import numpy as np

from tensor_align import (
    ChunkScores,
    build_stats_matrix,
    build_tensor,
    default_taxonomy,
    read_ohlcv_csv,
    write_chunk_scores_csv,
)

HERE = Path(__file__).parent
DATA = HERE / "data"
UTC = dt.timezone.utc

N_HOURS = 480
ASSETS = ("ADA", "BNB", "BTC", "ETH", "LTC", "SOL")
CLAIM_ENTITIES = ("ADA", "BNB", "BTC", "ETH", "SOL", "WYV")  # WYV has no market data
DRIFT = {"ADA": -2e-4, "BNB": 1e-4, "BTC": 3e-4, "ETH": 2e-4, "LTC": 0.0, "SOL": 5e-4}
VOL = {"ADA": 0.006, "BNB": 0.004, "BTC": 0.003, "ETH": 0.004, "LTC": 0.004, "SOL": 0.009}
BASE = {"ADA": 0.6, "BNB": 310.0, "BTC": 43000.0, "ETH": 2300.0, "LTC": 72.0, "SOL": 98.0}
# loadings on two common hourly return factors, so the tensor has real
# low-rank structure for the decomposition demos to find
BETAS = {
    "ADA": (1.2, -0.8), "BNB": (0.8, 0.4), "BTC": (1.0, 0.9),
    "ETH": (1.0, 0.7), "LTC": (0.9, -0.3), "SOL": (1.5, -1.2),
}


def make_ohlcv(path: Path, seed: int = 11) -> None:
    rng = np.random.default_rng(seed)
    t0 = dt.datetime(2024, 1, 1, tzinfo=UTC)
    market = 0.007 * rng.standard_normal(N_HOURS)
    rotation = 0.005 * rng.standard_normal(N_HOURS)
    lines = ["timestamp,asset,open,high,low,close,volume"]
    for asset in ASSETS:
        b1, b2 = BETAS[asset]
        steps = (
            DRIFT[asset] + b1 * market + b2 * rotation
            + VOL[asset] * rng.standard_normal(N_HOURS)
        )
        close = BASE[asset] * np.exp(np.cumsum(steps))
        opens = np.concatenate([[BASE[asset]], close[:-1]])
        spread = np.abs(VOL[asset] * rng.standard_normal(N_HOURS)) + 1e-4
        high = np.maximum(opens, close) * (1 + spread)
        low = np.minimum(opens, close) * (1 - spread)
        volume = np.exp(rng.normal(np.log(BASE[asset] * 900), 0.4, N_HOURS))
        for h in range(N_HOURS):
            # two short in-gap holes per asset to exercise forward-fill
            if h % 211 == 97 or h % 307 == 151:
                continue
            ts = (t0 + dt.timedelta(hours=h)).strftime("%Y-%m-%dT%H:%M:%SZ")
            lines.append(
                f"{ts},{asset},{opens[h]:.6f},{high[h]:.6f},"
                f"{low[h]:.6f},{close[h]:.6f},{volume[h]:.2f}"
            )
    path.write_text("\n".join(lines) + "\n")


def make_chunk_scores(ohlcv_path: Path, path: Path, seed: int = 12) -> None:
    rng = np.random.default_rng(seed)
    taxonomy = default_taxonomy()
    tensor = build_tensor(read_ohlcv_csv(ohlcv_path))
    stats = build_stats_matrix(tensor, vol_window=48)
    idx = {a: i for i, a in enumerate(stats.asset_labels)}
    # each category listens to a fixed random blend of the z-scored stats,
    # so entities with similar market behaviour get similar claim profiles
    mixing = rng.normal(0.0, 1.0, size=(taxonomy.size, len(stats.stat_labels)))
    chunks = []
    for entity in CLAIM_ENTITIES:
        if entity in idx:
            logits = 0.8 * mixing @ stats.values[idx[entity]]
        else:
            logits = rng.normal(0.0, 1.0, size=taxonomy.size)
        profile = np.exp(logits - logits.max())
        profile /= profile.sum()
        n_chunks = int(rng.integers(14, 25))
        for c in range(n_chunks):
            scores = rng.dirichlet(40.0 * profile + 0.05)
            chunks.append(
                ChunkScores(entity=entity, chunk_id=c, method="nli", scores=scores)
            )
    write_chunk_scores_csv(chunks, taxonomy, path)


def main() -> None:
    DATA.mkdir(exist_ok=True)
    ohlcv = DATA / "ohlcv.csv"
    make_ohlcv(ohlcv)
    make_chunk_scores(ohlcv, DATA / "chunk_scores.csv")
    print(f"fixture written under {DATA}")


if __name__ == "__main__":
    main()
