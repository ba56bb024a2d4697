"""Rule-based English lemmatizer backed by bundled word lists.

No external NLP service is used at runtime: an exceptions table handles
irregular forms, a known-lemma list anchors suffix repair (-ed/-ing/-es), and
plain suffix stripping covers everything else. ``lemma(lemma(w)) == lemma(w)``
holds for every input, and nonempty input never lemmatizes to the empty
string.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .resources import read_resource_lines

_VOWELS = set("aeiouy")
# Consonants that commonly double before -ed/-ing (run -> running).
_DOUBLED = set("bdgmnprt")


@dataclass(frozen=True)
class Lexicon:
    """Exceptions map, known-lemma set, and stop words for one language."""

    exceptions: dict[str, str]
    known: frozenset[str]
    stopwords: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        for form, lemma in self.exceptions.items():
            target = self.exceptions.get(lemma, lemma)
            if target != lemma:
                raise ValueError(
                    f"lemma map not idempotent: {form!r} -> {lemma!r} -> {target!r}"
                )

    def is_stopword(self, token: str) -> bool:
        return token.lower() in self.stopwords


_DEFAULT: Lexicon | None = None


def default_lexicon() -> Lexicon:
    global _DEFAULT
    if _DEFAULT is None:
        exceptions = {}
        for line in read_resource_lines("lemma_exceptions.txt"):
            form, _, lemma = line.partition(" ")
            exceptions[form.strip()] = lemma.strip()
        _DEFAULT = Lexicon(
            exceptions=exceptions,
            known=frozenset(read_resource_lines("known_words.txt")),
            stopwords=frozenset(read_resource_lines("stopwords.txt")),
        )
    return _DEFAULT


def load_lexicon(exceptions_path: str | Path, known_path: str | Path,
                 stopwords_path: str | Path | None = None) -> Lexicon:
    """Load a Lexicon from plain-text files (one entry per line)."""
    exceptions = {}
    for line in Path(exceptions_path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        form, _, lemma = line.partition(" ")
        exceptions[form] = lemma.strip()
    known = frozenset(_read_list(known_path))
    stops = frozenset(_read_list(stopwords_path)) if stopwords_path else frozenset()
    return Lexicon(exceptions=exceptions, known=known, stopwords=stops)


def _read_list(path: str | Path) -> list[str]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [ln.strip() for ln in lines if ln.strip() and not ln.startswith("#")]


def _has_vowel(word: str) -> bool:
    return any(ch in _VOWELS for ch in word)


def _strip_s_family(word: str, known: frozenset[str]) -> str:
    """Handle plural / third-person -s, -es, -ies."""
    if word.endswith("ies") and len(word) > 4:
        return word[:-3] + "y"
    if word.endswith(("ss", "us", "is")) or not word.endswith("s"):
        return word
    bare = word[:-1]
    if bare in known:
        return bare
    if word.endswith("es"):
        stem = word[:-2]
        if stem in known:
            return stem
        if stem.endswith(("s", "x", "z", "ch", "sh")):
            return stem
    if len(word) >= 4:
        return bare
    return word


def _repair_stem(stem: str, known: frozenset[str]) -> str:
    """Fix a stem left by -ed/-ing stripping (mak -> make, runn -> run)."""
    if stem + "e" in known:
        return stem + "e"
    if stem in known:
        return stem
    if len(stem) >= 3 and stem[-1] == stem[-2]:
        if stem[:-1] in known:
            return stem[:-1]
        if stem[-1] in _DOUBLED:
            return stem[:-1]
    return stem


def _strip_ed_ing(word: str, known: frozenset[str]) -> str:
    if word.endswith("ied") and len(word) > 4:
        return word[:-3] + "y"
    for suffix in ("ing", "ed"):
        if not word.endswith(suffix):
            continue
        stem = word[: -len(suffix)]
        if len(stem) < 2 or not _has_vowel(stem):
            return word
        repaired = _repair_stem(stem, known)
        if len(repaired) >= 2:
            return repaired
        return word
    return word


def _rules_once(word: str, lexicon: Lexicon) -> str:
    for possessive in ("'s", "’s"):
        if word.endswith(possessive) and len(word) > len(possessive):
            return word[: -len(possessive)]
    if word.endswith("s'") and len(word) > 2:
        return word[:-1]
    if word in lexicon.exceptions:
        return lexicon.exceptions[word]
    if word in lexicon.known or len(word) <= 2 or not word.isalpha():
        return word
    result = _strip_s_family(word, lexicon.known)
    if result == word:
        result = _strip_ed_ing(word, lexicon.known)
    return result or word


def lemmatize_token(token: str, lexicon: Lexicon | None = None) -> str:
    """Lemmatize one token; idempotent, never returns the empty string.

    Rules are iterated to a fixed point so that stacked suffixes
    (buildings -> building -> build) resolve in one call.
    """
    lexicon = lexicon or default_lexicon()
    word = token.lower()
    if not word:
        return word
    for _ in range(8):
        result = _rules_once(word, lexicon)
        if result == word:
            break
        word = result
    return word


def lemmatize(phrase: str, lexicon: Lexicon | None = None) -> str:
    """Lemmatize a whitespace-separated phrase token by token."""
    lexicon = lexicon or default_lexicon()
    tokens = [lemmatize_token(tok, lexicon) for tok in phrase.split()]
    return " ".join(tok for tok in tokens if tok)
