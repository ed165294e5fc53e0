"""Synonym lexicon: canonical anatomical terms and their variant phrasings.

The shipped lexicon covers the 29 chest structures used by the scene-graph
schema, each with four handcrafted variants. A different generator (e.g. a
text model behind an API) can be plugged in by building a
:class:`SynonymLexicon` from any ``{canonical: [variants]}`` mapping; nothing
here touches the network.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

VARIANTS_PER_TERM = 5  # canonical + 4 synonyms


class LexiconError(ValueError):
    """Raised when a lexicon violates the variant-count or uniqueness rules."""


@dataclass(frozen=True)
class SynonymLexicon:
    """Map from canonical term to its full variant list (canonical included)."""

    entries: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for term, variants in self.entries.items():
            if len(variants) != VARIANTS_PER_TERM:
                raise LexiconError(
                    f"term {term!r} has {len(variants)} variants, "
                    f"expected {VARIANTS_PER_TERM}"
                )
            if len(set(variants)) != len(variants):
                raise LexiconError(f"term {term!r} has duplicate variants")
            if any(not v.strip() for v in variants):
                raise LexiconError(f"term {term!r} has an empty variant")
            if variants[0] != term:
                raise LexiconError(f"first variant of {term!r} must be the term itself")

    @property
    def canonical_terms(self) -> tuple[str, ...]:
        return tuple(self.entries.keys())

    def variants(self, term: str) -> tuple[str, ...]:
        return self.entries[term]

    def __contains__(self, term: str) -> bool:
        return term in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def all_texts(self) -> list[str]:
        return [v for variants in self.entries.values() for v in variants]

    @classmethod
    def from_mapping(cls, mapping: dict[str, list[str]]) -> "SynonymLexicon":
        """Build from a ``{canonical: [4 synonyms]}`` mapping (file schema)."""
        entries = {
            term: (term, *variants) for term, variants in mapping.items()
        }
        return cls(entries=entries)

    @classmethod
    def from_file(cls, path) -> "SynonymLexicon":
        with open(path, encoding="utf-8") as f:
            return cls.from_mapping(json.load(f))

    def to_mapping(self) -> dict[str, list[str]]:
        return {term: list(variants[1:]) for term, variants in self.entries.items()}


def load_default_lexicon() -> SynonymLexicon:
    """Load the shipped 29-structure lexicon."""
    data = resources.files("medground.data").joinpath("lexicon_en.json")
    return SynonymLexicon.from_mapping(json.loads(data.read_text(encoding="utf-8")))
