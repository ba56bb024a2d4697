"""Hypothesis generation: rewrite rules, fixture cases, and invariants."""

from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from kgqa.hypothesis import (REPLACEABLE_WH_WORDS, default_phrase_table,
                             generate_hypothesis, load_phrase_table)

FIXTURES = Path(__file__).parent / "fixtures"


def load_cases():
    cases = []
    for line in (FIXTURES / "hypothesis_cases.txt").read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        stem, option, expected = [part.strip(" ") for part in line.split("|||")]
        cases.append((stem, option, expected.strip()))
    return cases


CASES = load_cases()


class TestRewriteRules:
    def test_wh_phrase_replacement(self):
        hypo = generate_hypothesis(
            "Which of these occurs due to the rotation of Earth?",
            "day and night")
        assert hypo.text == "Day and night occurs due to the rotation of Earth."
        assert hypo.rule_applied == "wh-phrase-replace"

    def test_append_fallback(self):
        hypo = generate_hypothesis("Plants need sunlight.", "water")
        assert hypo.text == "Plants need sunlight. water."
        assert hypo.rule_applied == "append"

    def test_wh_word_replacement(self):
        hypo = generate_hypothesis("What is H2O?", "water")
        assert hypo.text == "Water is H2O."
        assert hypo.rule_applied == "wh-replace"

    def test_how_question_appends(self):
        hypo = generate_hypothesis("How many legs does a spider have?", "eight")
        assert hypo.rule_applied == "append"
        assert hypo.text.endswith("eight.")

    def test_multi_sentence_stem_keeps_context(self):
        hypo = generate_hypothesis(
            "The sun heats the land. Which of these happens next?", "air rises")
        assert hypo.text.startswith("The sun heats the land.")
        assert "air rises happens next." in hypo.text

    def test_empty_inputs_rejected(self):
        with pytest.raises(ValueError):
            generate_hypothesis("", "water")
        with pytest.raises(ValueError):
            generate_hypothesis("What is it?", "   ")

    @pytest.mark.parametrize("stem,option,expected", CASES)
    def test_fixture_case(self, stem, option, expected):
        assert generate_hypothesis(stem, option).text == expected

    def test_fixture_has_twenty_cases(self):
        assert len(CASES) == 20


class TestPhraseTable:
    def test_default_table_contains_documented_phrases(self):
        table = default_phrase_table()
        assert "which of these" in table
        assert "which of the following" in table

    def test_longest_match_wins(self):
        # "which one of these" must be consumed whole, not via "which".
        hypo = generate_hypothesis("Which one of these is a metal?", "iron",
                                   phrase_table=["which of these",
                                                 "which one of these"])
        assert hypo.text == "Iron is a metal."
        assert hypo.rule_applied == "wh-phrase-replace"

    def test_custom_table_from_file(self, tmp_path):
        table_file = tmp_path / "phrases.txt"
        table_file.write_text("# comment\nname the planet that\n")
        table = load_phrase_table(table_file)
        assert table == ["name the planet that"]
        hypo = generate_hypothesis("Name the planet that is largest.",
                                   "Jupiter", phrase_table=table)
        assert hypo.text == "Jupiter is largest."


_stems = st.text(
    alphabet=st.sampled_from("abcdefghij STUVWxyz"), min_size=1, max_size=40
).filter(lambda s: s.strip())
_options = st.sampled_from(
    ["day and night", "water", "the moon", "eight", "igneous rock"])


class TestInvariants:
    @given(stem=_stems, option=_options)
    def test_option_content_words_survive(self, stem, option):
        text = generate_hypothesis(stem, option).text.lower()
        for word in option.lower().split():
            if word in ("the", "a", "an", "and"):
                continue
            assert word in text

    @given(stem=_stems, option=_options)
    def test_whitespace_normalization_idempotent(self, stem, option):
        normalized = " ".join(stem.split())
        assert (generate_hypothesis(stem, option).text
                == generate_hypothesis(normalized, option).text)

    @given(option=_options)
    def test_terminal_punctuation_and_capitalization(self, option):
        text = generate_hypothesis("Which of these is heavy?", option).text
        assert text.endswith(".")
        assert text[0] == text[0].upper()

    def test_wh_word_list_matches_contract(self):
        # "how" is deliberately not substitutable; "why" is not a trigger.
        assert "how" not in REPLACEABLE_WH_WORDS
        assert set(REPLACEABLE_WH_WORDS) == {"which", "what", "where", "when",
                                             "who"}
