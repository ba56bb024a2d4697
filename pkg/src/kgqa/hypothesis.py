"""Rewrite a (question stem, answer option) pair into a declarative statement.

The rewriting is deliberately shallow: find the wh-phrase or wh-word, splice
the option in its place, and fall back to appending the option when nothing
matches. No grammatical re-inflection is attempted; "Day and night occurs"
style agreement mismatches are tolerated by everything downstream.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .resources import read_resource_lines

# Wh-words that can be spliced out directly. "how" is detected but routed to
# the append fallback: "eight many legs..." style substitutions are worse for
# the extractor than a trailing option.
REPLACEABLE_WH_WORDS = ("which", "what", "where", "when", "who")

_SENTENCE_SPLIT = re.compile(r"(?<=[.?!])\s+")
_WS = re.compile(r"\s+")


@dataclass(frozen=True)
class Hypothesis:
    """A declarative statement combining a stem with one answer option."""

    text: str
    question_id: str = ""
    option_label: str = ""
    rule_applied: str = "append"  # wh-replace | wh-phrase-replace | append


def default_phrase_table() -> list[str]:
    """Wh-phrases that must be replaced as a whole, longest first."""
    return read_resource_lines("wh_phrases.txt")


def load_phrase_table(path: str | Path) -> list[str]:
    """Read a phrase table: one phrase per line, '#' comments allowed."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [line.strip().lower() for line in lines
            if line.strip() and not line.lstrip().startswith("#")]


def _normalize(text: str) -> str:
    return _WS.sub(" ", text).strip()


def _find_phrase(sentence: str, phrases: Sequence[str]) -> re.Match | None:
    for phrase in sorted(phrases, key=len, reverse=True):
        match = re.search(rf"\b{re.escape(phrase)}\b", sentence, flags=re.IGNORECASE)
        if match:
            return match
    return None


def _find_wh_word(sentence: str) -> re.Match | None:
    pattern = r"\b(" + "|".join(REPLACEABLE_WH_WORDS) + r")\b"
    return re.search(pattern, sentence, flags=re.IGNORECASE)


def _finish(text: str) -> str:
    text = _normalize(text)
    if text.endswith("?"):
        text = text[:-1].rstrip() + "."
    if not text.endswith((".", "!")):
        text += "."
    return text[:1].upper() + text[1:]


def generate_hypothesis(
    stem: str,
    option: str,
    *,
    question_id: str = "",
    option_label: str = "",
    phrase_table: Sequence[str] | None = None,
) -> Hypothesis:
    """Turn a question stem and one answer option into a hypothesis.

    A phrase from the phrase table is replaced as a whole; otherwise the first
    replaceable wh-word is replaced; otherwise the option is appended after the
    stem. Multi-sentence stems are rewritten only in the sentence that carries
    the wh-match, the rest is kept verbatim as context.
    """
    if not stem.strip():
        raise ValueError("stem must be nonempty")
    if not option.strip():
        raise ValueError("option must be nonempty")
    if phrase_table is None:
        phrase_table = default_phrase_table()

    stem = _normalize(stem)
    option = _normalize(option)
    sentences = _SENTENCE_SPLIT.split(stem)

    for idx, sentence in enumerate(sentences):
        match = _find_phrase(sentence, phrase_table)
        if match:
            sentences[idx] = sentence[: match.start()] + option + sentence[match.end():]
            return Hypothesis(text=_finish(" ".join(sentences)),
                              question_id=question_id, option_label=option_label,
                              rule_applied="wh-phrase-replace")

    for idx, sentence in enumerate(sentences):
        match = _find_wh_word(sentence)
        if match:
            sentences[idx] = sentence[: match.start()] + option + sentence[match.end():]
            return Hypothesis(text=_finish(" ".join(sentences)),
                              question_id=question_id, option_label=option_label,
                              rule_applied="wh-replace")

    return Hypothesis(text=_finish(_finish(stem) + " " + option),
                      question_id=question_id, option_label=option_label,
                      rule_applied="append")
