"""Relation-triple extraction and the triple interchange format.

The built-in extractor is a shallow pattern matcher, not a parser: it finds a
main verb by closed-class lookup plus number agreement, chunks noun phrases
around it, and classifies prepositional phrases as time, location, or extra
objects. Higher-fidelity extractions (e.g. from an external Open IE run) can
be ingested through the pipe-separated interchange format instead.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .lemma import Lexicon, default_lexicon, lemmatize_token
from .resources import read_resource_lines

EXTRACTOR_VERSION = "1"

_WORD = re.compile(r"[A-Za-z0-9][A-Za-z0-9'’\-]*|[^\sA-Za-z0-9]")

DETERMINERS = frozenset("""
a an the this that these those each every all some any both few many much
several most other another my your his her its our their no
""".split())

PREPOSITIONS = frozenset("""
of in on at by for with from to into onto upon about over under between
among through during above below across after before behind beside near
without within along around toward towards against
""".split())

AUXILIARIES = frozenset("""
is am are was were be been being has have had do does did can could will
would shall should may might must
""".split())

BE_FORMS = frozenset({"is", "am", "are", "was", "were", "be", "been", "being"})

CONJUNCTIONS = frozenset({"and", "or", "but", "nor", "so", "yet"})

ADVERBS = frozenset("""
usually often always sometimes never typically generally mostly mainly
quickly slowly rapidly directly also still even just only very too then
first finally together
""".split())

PARTICLES = frozenset({"off", "up", "down", "out", "away", "apart"})

LIGHT_NOUNS = frozenset({"kind", "type", "part", "form", "example", "sort",
                         "member", "group", "piece", "way", "source"})

CAUSAL_MARKERS = ("because of", "due to", "because")

_CLAUSE_SPLIT = re.compile(r"[;,]\s+(?:and|or|but|so)\s+|;\s+")


@dataclass(frozen=True)
class Triple:
    """One extracted relation: T(subject, predicate, objects...)."""

    subject: str
    predicate: str
    objects: tuple[str, ...] = ()
    time: str | None = None
    location: str | None = None
    source_sentence_id: str = ""

    def __post_init__(self) -> None:
        if not self.subject.strip():
            raise ValueError("triple subject must be nonempty")
        if not self.predicate.strip():
            raise ValueError("triple predicate must be nonempty")
        if not self.objects and self.time is None and self.location is None:
            raise ValueError(
                "triple needs at least one object unless time or location is set"
            )


class _Vocab:
    """Closed-class token knowledge shared by one extractor instance."""

    def __init__(self, lexicon: Lexicon):
        self.lexicon = lexicon
        self.verbs = frozenset(read_resource_lines("verbs.txt"))
        self.adjectives = frozenset(read_resource_lines("adjectives.txt"))
        self.time_nouns = frozenset(read_resource_lines("time_nouns.txt"))
        self.loc_nouns = frozenset(read_resource_lines("location_nouns.txt"))

    def is_verbish(self, lower: str) -> bool:
        if lower in AUXILIARIES:
            return True
        if lower in DETERMINERS or lower in PREPOSITIONS or lower in CONJUNCTIONS:
            return False
        return lemmatize_token(lower, self.lexicon) in self.verbs

    def is_base_form(self, lower: str) -> bool:
        return lemmatize_token(lower, self.lexicon) == lower


_VOCAB: _Vocab | None = None


def _vocab(lexicon: Lexicon | None) -> _Vocab:
    global _VOCAB
    if lexicon is not None:
        return _Vocab(lexicon)
    if _VOCAB is None:
        _VOCAB = _Vocab(default_lexicon())
    return _VOCAB


@dataclass(frozen=True)
class _Tok:
    text: str
    lower: str
    start: int
    end: int

    @property
    def is_word(self) -> bool:
        return bool(self.text) and (self.text[0].isalnum())


def _tokens(sentence: str) -> list[_Tok]:
    out = []
    for match in _WORD.finditer(sentence):
        out.append(_Tok(match.group(), match.group().lower(),
                        match.start(), match.end()))
    return out


_RELATIVES = frozenset({"that", "which", "who", "whom", "whose", "this",
                        "these", "those"})


def _np_token(tok: _Tok, vocab: _Vocab) -> bool:
    if not tok.is_word:
        return False
    low = tok.lower
    if low in PREPOSITIONS or low in CONJUNCTIONS or low in AUXILIARIES:
        return False
    if low in ADVERBS or (low.endswith("ly") and low[:-2] in vocab.adjectives):
        return False
    if low in ("not", "n't") or low in _RELATIVES:
        return False
    return True


def _np_core(toks: list[_Tok], i: int, vocab: _Vocab) -> tuple[int, int, int] | None:
    """Consume determiners then a run of NP tokens; returns (first, last, next).

    A verbish token may serve as the head noun ("plants", "water cycle") but
    once a head exists the next verbish token ends the chunk, which is where
    the clause verb usually starts.
    """
    n = len(toks)
    while i < n and toks[i].lower in DETERMINERS:
        i += 1
    start = i
    has_head = False
    while i < n and _np_token(toks[i], vocab):
        tok = toks[i]
        if vocab.is_verbish(tok.lower) and has_head:
            break
        if tok.lower not in vocab.adjectives and tok.lower not in DETERMINERS:
            has_head = True
        i += 1
    if i == start:
        return None
    return start, i - 1, i


def _np_span(toks: list[_Tok], i: int, vocab: _Vocab) -> tuple[int, int, int] | None:
    """One coordinated NP: core ((of|and|or) core)*; returns token index span."""
    core = _np_core(toks, i, vocab)
    if core is None:
        return None
    first, last, i = core
    n = len(toks)
    while i < n and toks[i].lower in ("of", "and", "or"):
        nxt = _np_core(toks, i + 1, vocab)
        if nxt is None:
            break
        last, i = nxt[1], nxt[2]
    return first, last, i


def _head_token(toks: list[_Tok], first: int, last: int, vocab: _Vocab) -> _Tok:
    for idx in range(last, first - 1, -1):
        if toks[idx].is_word and toks[idx].lower not in vocab.adjectives:
            return toks[idx]
    return toks[last]


def _slice(sentence: str, toks: list[_Tok], first: int, last: int) -> str:
    return sentence[toks[first].start: toks[last].end]


class _ClauseParse:
    """Mutable state while one clause is reduced to a triple."""

    def __init__(self) -> None:
        self.objects: list[str] = []
        self.time: str | None = None
        self.location: str | None = None

    def add_pp(self, prep: str, phrase: str, head_lemma: str, vocab: _Vocab) -> None:
        if head_lemma in vocab.time_nouns or (prep == "during" and self.time is None):
            if self.time is None:
                self.time = phrase
            else:
                self.objects.append(phrase)
        elif head_lemma in vocab.loc_nouns:
            if self.location is None:
                self.location = phrase
            else:
                self.objects.append(phrase)
        elif prep == "during":
            self.objects.append(phrase)
        else:
            self.objects.append(phrase)


@dataclass
class _Spine:
    subject_first: int
    subject_last: int
    verb_index: int
    pre_pps: list[tuple[str, int, int]]  # (preposition, np_first, np_last)


def _find_main_verb(toks: list[_Tok], vocab: _Vocab) -> _Spine | None:
    """Locate the subject NP and the clause verb.

    The subject is the first NP; the verb is chosen from the following verbish
    run by number agreement with the subject head, which disambiguates
    noun/verb homographs ("the water cycle involves ..."). Prepositional
    phrases before the verb are collected for later classification.
    """
    n = len(toks)
    i = 0
    subject: tuple[int, int] | None = None
    pre_pps: list[tuple[str, int, int]] = []
    verb_at = None
    while i < n:
        tok = toks[i]
        if not tok.is_word:
            if subject is not None:
                return None  # clause structure too rich for the spine parse
            i += 1
            continue
        if tok.lower in PREPOSITIONS:
            span = _np_span(toks, i + 1, vocab)
            if span is None:
                i += 1
            else:
                pre_pps.append((tok.lower, span[0], span[1]))
                i = span[2]
            continue
        if subject is not None and vocab.is_verbish(tok.lower):
            verb_at = i
            break
        span = _np_span(toks, i, vocab)
        if span is None:
            i += 1
            continue
        first, last, nxt = span
        if subject is None:
            subject = (first, last)
        i = nxt
    if verb_at is None or subject is None:
        return None

    run_end = verb_at
    while run_end < n and toks[run_end].is_word and (
        vocab.is_verbish(toks[run_end].lower)
        or toks[run_end].lower in ADVERBS
        or toks[run_end].lower in ("not", "n't")
    ):
        run_end += 1
    run = [idx for idx in range(verb_at, run_end)
           if vocab.is_verbish(toks[idx].lower)]
    if not run:
        return None

    if any(toks[idx].lower in AUXILIARIES for idx in run):
        verb_idx = run[-1]
    else:
        head = _head_token(toks, subject[0], subject[1], vocab)
        plural_subject = head.lower.endswith("s")
        verb_idx = None
        for idx in run:
            base = vocab.is_base_form(toks[idx].lower)
            s_form = toks[idx].lower.endswith("s") and not base
            if plural_subject and s_form:
                continue  # "plants" after a plural head reads as a noun
            if not plural_subject and base:
                continue  # "cycle" after a singular head reads as a noun
            verb_idx = idx
            break
        if verb_idx is None:
            verb_idx = run[-1]
        # Verbish tokens skipped before the chosen verb belong to the subject.
        skipped = [idx for idx in run if idx < verb_idx]
        if skipped:
            subject = (subject[0], max(skipped))
    return _Spine(subject[0], subject[1], verb_idx, pre_pps)


def _parse_post_region(sentence: str, toks: list[_Tok], i: int,
                       parse: _ClauseParse, vocab: _Vocab) -> None:
    n = len(toks)
    while i < n:
        tok = toks[i]
        if not tok.is_word:
            break
        low = tok.lower
        marker = _match_causal(toks, i)
        if marker is not None:
            rest_first = marker
            while rest_first < n and toks[rest_first].lower in DETERMINERS:
                rest_first += 1
            rest_last = rest_first
            while rest_last < n and toks[rest_last].is_word:
                rest_last += 1
            if rest_last > rest_first:
                parse.objects.append(_slice(sentence, toks, rest_first, rest_last - 1))
            return
        if low == "to" and i + 1 < n and vocab.is_verbish(toks[i + 1].lower):
            return  # trailing infinitive clause is dropped
        if low in PREPOSITIONS:
            span = _np_span(toks, i + 1, vocab)
            if span is None:
                i += 1
                continue
            first, last, nxt = span
            phrase = _slice(sentence, toks, first, last)
            head = _head_token(toks, first, last, vocab)
            parse.add_pp(low, phrase, lemmatize_token(head.lower, vocab.lexicon),
                         vocab)
            i = nxt
            continue
        span = _np_span(toks, i, vocab)
        if span is None:
            i += 1
            continue
        first, last, nxt = span
        parse.objects.append(_slice(sentence, toks, first, last))
        i = nxt


def _match_causal(toks: list[_Tok], i: int) -> int | None:
    """Return the index just past a causal marker at position i, else None."""
    for marker in CAUSAL_MARKERS:
        words = marker.split()
        if i + len(words) > len(toks):
            continue
        if all(toks[i + k].lower == words[k] for k in range(len(words))):
            return i + len(words)
    return None


def _extract_clause(sentence: str, toks: list[_Tok], vocab: _Vocab,
                    sentence_id: str) -> list[Triple]:
    spine = _find_main_verb(toks, vocab)
    if spine is None:
        return []
    subj_first, subj_last, verb_idx = (spine.subject_first, spine.subject_last,
                                       spine.verb_index)
    subject = _slice(sentence, toks, subj_first, subj_last)
    n = len(toks)
    parse = _ClauseParse()
    for prep, first, last in spine.pre_pps:
        head = _head_token(toks, first, last, vocab)
        parse.add_pp(prep, _slice(sentence, toks, first, last),
                     lemmatize_token(head.lower, vocab.lexicon), vocab)

    verb_tok = toks[verb_idx]
    pred_first = pred_last = verb_idx
    after = verb_idx + 1
    is_copula = verb_tok.lower in BE_FORMS

    if is_copula:
        light = _match_light_noun(toks, after, vocab)
        if light is not None:
            pred_last, after = light
    else:
        # Passive with agent: "X is caused by Y" swaps the roles.
        run_has_be = any(
            toks[idx].lower in BE_FORMS
            for idx in range(subj_last + 1, verb_idx)
        )
        participle = (not vocab.is_base_form(verb_tok.lower)
                      and not verb_tok.lower.endswith("ing"))
        if run_has_be and participle and after < n and toks[after].lower == "by":
            span = _np_span(toks, after + 1, vocab)
            if span is not None:
                first, last, nxt = span
                agent = _slice(sentence, toks, first, last)
                parse.objects.append(subject)
                subject = agent
                _parse_post_region(sentence, toks, nxt, parse, vocab)
                return _build_triples(subject, _slice(sentence, toks, pred_first,
                                                      pred_last),
                                      parse, sentence_id)
        if after < n and toks[after].lower in PARTICLES:
            pred_last = after
            after += 1

    _parse_post_region(sentence, toks, after, parse, vocab)
    return _build_triples(subject, _slice(sentence, toks, pred_first, pred_last),
                          parse, sentence_id)


def _match_light_noun(toks: list[_Tok], i: int,
                      vocab: _Vocab) -> tuple[int, int] | None:
    """Match (det)? LIGHT_NOUN 'of' after a copula; returns (pred_last, next)."""
    j = i
    n = len(toks)
    while j < n and toks[j].lower in DETERMINERS:
        j += 1
    if j < n and toks[j].lower in LIGHT_NOUNS and j + 1 < n \
            and toks[j + 1].lower == "of":
        return j + 1, j + 2
    return None


def _build_triples(subject: str, predicate: str, parse: _ClauseParse,
                   sentence_id: str) -> list[Triple]:
    if not subject.strip() or not predicate.strip():
        return []
    if not parse.objects and parse.time is None and parse.location is None:
        return []
    return [Triple(subject=subject, predicate=predicate,
                   objects=tuple(parse.objects), time=parse.time,
                   location=parse.location, source_sentence_id=sentence_id)]


def extract(sentence: str, *, sentence_id: str = "",
            lexicon: Lexicon | None = None) -> list[Triple]:
    """Extract relation triples from one sentence.

    Unparseable sentences yield an empty list, never an error. Each returned
    phrase is a contiguous substring of the input (leading determiners
    excluded), so provenance is preserved.
    """
    if not sentence.strip():
        raise ValueError("sentence must be nonempty")
    vocab = _vocab(lexicon)
    triples: list[Triple] = []
    for clause in _split_clauses(sentence):
        toks = _tokens(clause)
        for triple in _extract_clause(clause, toks, vocab, sentence_id):
            triples.append(triple)
    return triples


def _split_clauses(sentence: str) -> list[str]:
    return [part for part in _CLAUSE_SPLIT.split(sentence) if part.strip()]


def extract_all(text: str, *, sentence_id: str = "",
                lexicon: Lexicon | None = None) -> list[Triple]:
    """Extract from a possibly multi-sentence text."""
    triples: list[Triple] = []
    for sentence in re.split(r"(?<=[.?!])\s+", text):
        if sentence.strip():
            triples.extend(extract(sentence, sentence_id=sentence_id,
                                   lexicon=lexicon))
    return triples


# -- interchange format ---------------------------------------------------

def format_triple(sentence_id: str, triple: Triple) -> str:
    """One pipe-separated row: id | subj | pred | obj1; obj2 | time= | loc=."""
    for phrase in (triple.subject, triple.predicate, *triple.objects,
                   triple.time or "", triple.location or ""):
        if "|" in phrase or ";" in phrase:
            raise ValueError(f"phrase {phrase!r} contains a delimiter")
    fields = [sentence_id, triple.subject, triple.predicate,
              "; ".join(triple.objects)]
    if triple.time is not None:
        fields.append(f"time={triple.time}")
    if triple.location is not None:
        fields.append(f"loc={triple.location}")
    return " | ".join(fields)


def export_triples(triples: Mapping[str, Iterable[Triple]],
                   path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for sentence_id in triples:
            for triple in triples[sentence_id]:
                handle.write(format_triple(sentence_id, triple) + "\n")


def parse_triple_row(row: str, row_no: int = 0) -> tuple[str, Triple]:
    fields = [field.strip() for field in row.split("|")]
    if len(fields) < 4:
        raise ValueError(f"row {row_no}: expected at least 4 pipe-separated "
                         f"fields, got {len(fields)}")
    sentence_id, subject, predicate, objects_field = fields[:4]
    if not subject:
        raise ValueError(f"row {row_no}: empty subject")
    if not predicate:
        raise ValueError(f"row {row_no}: empty predicate")
    objects = tuple(obj.strip() for obj in objects_field.split(";")
                    if obj.strip())
    time = location = None
    for extra in fields[4:]:
        if extra.startswith("time="):
            time = extra[len("time="):].strip()
        elif extra.startswith("loc="):
            location = extra[len("loc="):].strip()
        else:
            raise ValueError(f"row {row_no}: unknown field {extra!r}")
    try:
        triple = Triple(subject=subject, predicate=predicate, objects=objects,
                        time=time, location=location,
                        source_sentence_id=sentence_id)
    except ValueError as exc:
        raise ValueError(f"row {row_no}: {exc}") from None
    return sentence_id, triple


def ingest_triples(path: str | Path) -> dict[str, list[Triple]]:
    """Read an interchange file into sentence_id -> triples, validating rows."""
    result: dict[str, list[Triple]] = {}
    with Path(path).open(encoding="utf-8") as handle:
        for row_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            sentence_id, triple = parse_triple_row(line, row_no)
            result.setdefault(sentence_id, []).append(triple)
    return result
