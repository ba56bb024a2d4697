"""Local sentence search: BM25 inverted index plus noise filtering.

The corpus is one sentence per line. Sentences are tokenized by lowercasing
and splitting on non-alphanumerics; no stemming happens here (graph nodes are
lemmatized downstream). Queries are scored with BM25 (k1=1.2, b=0.75), noisy
sentences are dropped after retrieval, and the top-k survivors are returned.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .resources import read_resource_lines

FORMAT_VERSION = 1

_TOKEN = re.compile(r"[a-z0-9]+")


class CorpusIndexError(RuntimeError):
    """Raised for index build/persistence problems."""


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


@dataclass(frozen=True)
class RetrievalConfig:
    """Query-time knobs; every default is overridable from the pipeline config."""

    k1: float = 1.2
    b: float = 0.75
    max_tokens: int = 40
    overfetch_factor: int = 5
    negation_words: tuple[str, ...] = field(
        default_factory=lambda: tuple(read_resource_lines("negation_words.txt"))
    )

    def with_overrides(self, **kwargs) -> "RetrievalConfig":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class SentenceHit:
    sentence_id: str
    text: str
    relevance_score: float


def is_noisy(sentence: str, config: RetrievalConfig | None = None) -> bool:
    """True for sentences that should never be used as supports.

    A sentence is noisy when it contains a negation word, characters outside
    printable ASCII, or more than the configured token cap.
    """
    config = config or RetrievalConfig()
    if any(not ("\x20" <= ch <= "\x7e") for ch in sentence):
        return True
    lowered = sentence.lower()
    tokens = _TOKEN.findall(lowered)
    if len(tokens) > config.max_tokens:
        return True
    token_set = set(tokens)
    for word in config.negation_words:
        if word.isalnum():
            if word in token_set:
                return True
        elif word in lowered:
            return True
    return False


class CorpusIndex:
    """Write-once inverted index over a sentence corpus."""

    def __init__(
        self,
        external_ids: list[str],
        sentences: list[str],
        doc_lens: np.ndarray,
        postings: dict[str, tuple[np.ndarray, np.ndarray]],
        corpus_checksum: str,
    ) -> None:
        self.external_ids = external_ids
        self.sentences = sentences
        self.doc_lens = doc_lens
        self.postings = postings  # term -> (internal ids ascending, term freqs)
        self.corpus_checksum = corpus_checksum
        self.n_sentences = len(sentences)
        self.avgdl = float(doc_lens.mean()) if self.n_sentences else 0.0

    # -- scoring ---------------------------------------------------------

    def idf(self, term: str) -> float:
        posting = self.postings.get(term)
        if posting is None:
            return 0.0
        df = len(posting[0])
        return math.log(1.0 + (self.n_sentences - df + 0.5) / (df + 0.5))

    def bm25_scores(self, query_tokens: Sequence[str],
                    config: RetrievalConfig) -> tuple[np.ndarray, np.ndarray]:
        """Score every sentence sharing a term with the query.

        Returns (internal ids, scores); zero-overlap sentences never appear,
        so adding irrelevant sentences to the corpus cannot disturb results.
        """
        matched = [self.postings[t] for t in query_tokens if t in self.postings]
        if not matched:
            return np.empty(0, dtype=np.int64), np.empty(0)
        candidates = np.unique(np.concatenate([ids for ids, _ in matched]))
        scores = np.zeros(len(candidates))
        for token in query_tokens:
            posting = self.postings.get(token)
            if posting is None:
                continue
            ids, tfs = posting
            idf = self.idf(token)
            dl = self.doc_lens[ids]
            tf = tfs.astype(np.float64)
            norm = tf * (config.k1 + 1.0) / (
                tf + config.k1 * (1.0 - config.b + config.b * dl / self.avgdl)
            )
            scores[np.searchsorted(candidates, ids)] += idf * norm
        return candidates, scores

    # -- persistence -----------------------------------------------------

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        terms = sorted(self.postings)
        offsets = np.zeros(len(terms) + 1, dtype=np.int64)
        for i, term in enumerate(terms):
            offsets[i + 1] = offsets[i] + len(self.postings[term][0])
        all_ids = (np.concatenate([self.postings[t][0] for t in terms])
                   if terms else np.empty(0, dtype=np.int64))
        all_tfs = (np.concatenate([self.postings[t][1] for t in terms])
                   if terms else np.empty(0, dtype=np.int32))
        np.savez(directory / "postings.npz", ids=all_ids, tfs=all_tfs,
                 offsets=offsets, doc_lens=self.doc_lens)
        (directory / "terms.txt").write_text("\n".join(terms), encoding="utf-8")
        with (directory / "sentences.jsonl").open("w", encoding="utf-8") as handle:
            for ext_id, text in zip(self.external_ids, self.sentences):
                handle.write(json.dumps({"id": ext_id, "text": text},
                                        sort_keys=True) + "\n")
        manifest = {
            "format_version": FORMAT_VERSION,
            "tokenizer": "lowercase, split on non-alphanumerics",
            "corpus_checksum": self.corpus_checksum,
            "n_sentences": self.n_sentences,
            "avgdl": self.avgdl,
            "n_terms": len(terms),
        }
        (directory / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8"
        )

    @classmethod
    def load(cls, directory: str | Path) -> "CorpusIndex":
        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
        if manifest.get("format_version") != FORMAT_VERSION:
            raise CorpusIndexError(
                f"unsupported index format {manifest.get('format_version')!r} "
                f"in {directory}"
            )
        external_ids: list[str] = []
        sentences: list[str] = []
        with (directory / "sentences.jsonl").open(encoding="utf-8") as handle:
            for line in handle:
                obj = json.loads(line)
                external_ids.append(obj["id"])
                sentences.append(obj["text"])
        terms = (directory / "terms.txt").read_text(encoding="utf-8").splitlines()
        arrays = np.load(directory / "postings.npz")
        offsets = arrays["offsets"]
        postings = {
            term: (arrays["ids"][offsets[i]: offsets[i + 1]],
                   arrays["tfs"][offsets[i]: offsets[i + 1]])
            for i, term in enumerate(terms)
        }
        index = cls(external_ids, sentences, arrays["doc_lens"], postings,
                    manifest["corpus_checksum"])
        if index.n_sentences != manifest["n_sentences"]:
            raise CorpusIndexError(f"manifest/sentence count mismatch in {directory}")
        return index


def corpus_checksum(sentences: Iterable[str]) -> str:
    digest = hashlib.sha256()
    for sentence in sentences:
        digest.update(sentence.encode("utf-8"))
        digest.update(b"\n")
    return digest.hexdigest()


def build_index(sentences: Iterable[str | tuple[str, str]]) -> CorpusIndex:
    """Build an in-memory index; accepts raw sentences or (id, sentence) pairs.

    Plain sentences get sequential string ids. Empty sentences are skipped;
    duplicate explicit ids are an error.
    """
    external_ids: list[str] = []
    texts: list[str] = []
    seen: set[str] = set()
    postings_tmp: dict[str, list[tuple[int, int]]] = {}
    doc_lens: list[int] = []
    auto_id = 0
    for item in sentences:
        if isinstance(item, tuple):
            ext_id, text = item
        else:
            ext_id, text = str(auto_id), item
            auto_id += 1
        if not text.strip():
            continue
        if ext_id in seen:
            raise CorpusIndexError(f"duplicate sentence id {ext_id!r}")
        seen.add(ext_id)
        internal = len(texts)
        external_ids.append(ext_id)
        texts.append(text)
        tokens = tokenize(text)
        doc_lens.append(len(tokens))
        counts: dict[str, int] = {}
        for token in tokens:
            counts[token] = counts.get(token, 0) + 1
        for token, count in counts.items():
            postings_tmp.setdefault(token, []).append((internal, count))
    postings = {
        term: (np.array([i for i, _ in rows], dtype=np.int64),
               np.array([c for _, c in rows], dtype=np.int32))
        for term, rows in postings_tmp.items()
    }
    return CorpusIndex(external_ids, texts, np.array(doc_lens, dtype=np.int64),
                       postings, corpus_checksum(texts))


def read_corpus(path: str | Path) -> Iterator[str]:
    """Yield sentences from a one-per-line UTF-8 corpus file."""
    with Path(path).open(encoding="utf-8") as handle:
        for line in handle:
            yield line.rstrip("\n")


def search_supports(index: CorpusIndex, hypothesis, k: int = 20,
                    config: RetrievalConfig | None = None) -> list[SentenceHit]:
    """Return at most k non-noisy supports for a hypothesis, best first.

    The engine over-fetches ``overfetch_factor * k`` candidates before
    filtering so that dropping noisy sentences rarely starves the result.
    Ties are broken by ascending sentence id.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    config = config or RetrievalConfig()
    query = getattr(hypothesis, "text", hypothesis)
    candidates, scores = index.bm25_scores(tokenize(query), config)
    if len(candidates) == 0:
        return []
    order = np.lexsort((candidates, -scores))
    hits: list[SentenceHit] = []
    for idx in order[: config.overfetch_factor * k]:
        internal = int(candidates[idx])
        text = index.sentences[internal]
        if is_noisy(text, config):
            continue
        hits.append(SentenceHit(sentence_id=index.external_ids[internal],
                                text=text, relevance_score=float(scores[idx])))
        if len(hits) == k:
            break
    return hits
