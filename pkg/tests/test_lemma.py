"""Lemmatizer: suffix rules, the inflection table, and idempotence."""

from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from kgqa.lemma import Lexicon, default_lexicon, lemmatize, lemmatize_token

FIXTURES = Path(__file__).parent / "fixtures"


def load_table():
    rows = []
    for line in (FIXTURES / "inflection_table.txt").read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        form, lemma = line.split()
        rows.append((form, lemma))
    return rows


TABLE = load_table()


class TestBasics:
    def test_third_person_s(self):
        assert lemmatize_token("comes") == "come"

    def test_base_form_is_fixed_point(self):
        assert lemmatize_token("come") == "come"

    def test_ies_suffix(self):
        assert lemmatize_token("studies") == "study"

    def test_possessive_stripped(self):
        assert lemmatize_token("earth's") == "earth"

    def test_case_folding(self):
        assert lemmatize_token("Comes") == "come"

    def test_phrase_lemmatization(self):
        assert lemmatize("seeds of oaks") == "seed of oak"

    def test_stacked_suffixes_resolve(self):
        assert lemmatize_token("buildings") == "build"


class TestInflectionTable:
    def test_table_has_two_hundred_rows(self):
        assert len(TABLE) == 200

    @pytest.mark.parametrize("form,lemma", TABLE)
    def test_row(self, form, lemma):
        assert lemmatize_token(form) == lemma


_words = st.text(alphabet=st.sampled_from("abcdefghinorstuy'"), min_size=1,
                 max_size=12)


class TestInvariants:
    @given(_words)
    def test_idempotent(self, word):
        once = lemmatize_token(word)
        assert lemmatize_token(once) == once

    @given(_words)
    def test_never_empty(self, word):
        assert lemmatize_token(word) != ""

    @given(st.lists(_words, min_size=1, max_size=5))
    def test_phrase_never_empty(self, words):
        assert lemmatize(" ".join(words)) != ""

    def test_lexicon_rejects_non_idempotent_map(self):
        with pytest.raises(ValueError, match="not idempotent"):
            Lexicon(exceptions={"a": "b", "b": "c"}, known=frozenset())

    def test_default_lexicon_exceptions_are_fixed_points(self):
        lexicon = default_lexicon()
        for form, lemma in lexicon.exceptions.items():
            assert lemmatize_token(lemma) == lemma, (form, lemma)

    def test_stopwords_loaded(self):
        lexicon = default_lexicon()
        assert lexicon.is_stopword("the")
        assert not lexicon.is_stopword("oak")
