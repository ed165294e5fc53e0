from __future__ import annotations

import pytest

from medground.data.lexicon import LexiconError, SynonymLexicon, load_default_lexicon
from medground.data.synthetic import REGION_LAYOUT


def test_default_lexicon_covers_29_structures():
    lex = load_default_lexicon()
    assert len(lex) == 29
    assert set(lex.canonical_terms) == set(REGION_LAYOUT)


def test_every_entry_has_five_distinct_variants():
    lex = load_default_lexicon()
    for term in lex.canonical_terms:
        variants = lex.variants(term)
        assert len(variants) == 5
        assert len(set(variants)) == 5
        assert variants[0] == term
        assert all(v.strip() for v in variants)


def test_example_entry_matches_clinical_usage():
    lex = load_default_lexicon()
    assert "left basal lung" in lex.variants("left lung base")
    assert "left lower lung base" in lex.variants("left lung base")


def test_wrong_variant_count_rejected():
    with pytest.raises(LexiconError):
        SynonymLexicon.from_mapping({"spine": ["a", "b", "c"]})


def test_duplicate_variant_rejected():
    with pytest.raises(LexiconError):
        SynonymLexicon.from_mapping({"spine": ["a", "a", "b", "c"]})


def test_empty_variant_rejected():
    with pytest.raises(LexiconError):
        SynonymLexicon.from_mapping({"spine": ["a", " ", "b", "c"]})


def test_mapping_round_trip():
    mapping = {"spine": ["a", "b", "c", "d"]}
    lex = SynonymLexicon.from_mapping(mapping)
    assert lex.to_mapping() == mapping
    assert "spine" in lex
    assert "rib" not in lex
