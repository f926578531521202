"""Functional-category taxonomy the score files are keyed by.

The category tuple doubles as the CSV column order of every emitted scores
file, so any consumer reading those files must agree on it; the default set
below matches the alignment toolkit's.  Descriptions anchor the
embedding-similarity method and default to blank when omitted.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["Taxonomy", "default_taxonomy"]

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


def default_taxonomy() -> Taxonomy:
    """The ten functional categories used across the study tooling."""
    names, descs = zip(*_DEFAULT_CATEGORIES)
    return Taxonomy(names, descs)
