"""
Two views of the same assets: statistics and claims
===================================================

Build the per-asset statistics matrix from market data, and the
per-entity claim-category matrix from chunk-level classifier scores.
These are the two matrices the alignment analyses compare.
"""

from pathlib import Path

from tensor_align import (
    aggregate_claims,
    build_stats_matrix,
    build_tensor,
    read_chunk_scores_csv,
    read_ohlcv_csv,
)

DATA = Path(__file__).parent / "data"

# %% Market side: seven statistics per asset (mean return, volatility,
# Sharpe, max drawdown, volume, vol-of-vol, trend), z-scored per column
# so no single scale dominates the geometry.
tensor = build_tensor(read_ohlcv_csv(DATA / "ohlcv.csv"))
stats = build_stats_matrix(tensor, vol_window=48)
print(f"stats matrix: {stats.values.shape[0]} assets x {len(stats.stat_labels)} stats")
print("\n      " + "  ".join(f"{s[:7]:>7}" for s in stats.stat_labels))
for asset, row in zip(stats.asset_labels, stats.values):
    print(f"  {asset:<4}" + "  ".join(f"{v:+7.2f}" for v in row))

# %% Narrative side: each text chunk got a probability profile over ten
# claim categories; per-entity profiles are the mean over chunks.
chunks, taxonomy = read_chunk_scores_csv(DATA / "chunk_scores.csv")
claims = aggregate_claims(chunks, taxonomy, min_chunks=10)
print(f"\nclaims matrix: {claims.values.shape[0]} entities x {taxonomy.size} categories")
if claims.low_data:
    print(f"low-data entities (under 10 chunks): {sorted(claims.low_data)}")

# %% Top claim categories per entity.
for entity, row in zip(claims.entity_labels, claims.values):
    top = sorted(zip(taxonomy.categories, row), key=lambda kv: -kv[1])[:3]
    shown = ", ".join(f"{c} {w:.2f}" for c, w in top)
    print(f"  {entity:<4} {shown}")

# %% Note the mismatch: the market file has LTC but no claims were
# written about it, and WYV has claims but no market data.  Downstream
# analyses intersect the two entity sets and report the exclusions.
market_only = set(stats.asset_labels) - set(claims.entity_labels)
claims_only = set(claims.entity_labels) - set(stats.asset_labels)
print(f"\nmarket only: {sorted(market_only)}; claims only: {sorted(claims_only)}")
