"""End-to-end orchestration with reproducible configuration and reporting.

Stages communicate only through persisted artifacts (index directory, triple
cache, model file, prediction files), so any stage can be rerun in isolation.
Questions are processed in deterministic id order; with a fixed seed two runs
produce bit-identical prediction files and model checksums.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable

from . import retrieval
from .data import (Dataset, EvalResult, Prediction, Question, format_score,
                   guess_all_predictions, load_dataset, score_predictions,
                   upper_bound_score, write_predictions)
from .graph import GraphPair, build_pair
from .hypothesis import Hypothesis, generate_hypothesis, load_phrase_table
from .model import ModelConfig, ModelParams, PairScore, TrainingExample, score_pair
from .retrieval import CorpusIndex, RetrievalConfig, build_index, read_corpus
from .training import TrainConfig, TrainingLog, train
from .triples import EXTRACTOR_VERSION, Triple, extract_all, ingest_triples, \
    format_triple, parse_triple_row


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


@dataclass
class PipelineConfig:
    """Declarative run configuration; flags override individual fields."""

    seed: int = 0
    corpus: str | None = None
    index_dir: str | None = None
    model_file: str | None = None
    dataset_files: dict[str, str] = field(default_factory=dict)  # split -> path
    predictions_file: str | None = None
    report_file: str | None = None
    triple_cache: str | None = None
    phrase_table: str | None = None

    retrieval_k: int = 20
    max_tokens: int = 40
    overfetch_factor: int = 5
    negation_words: list[str] | None = None

    extractor_mode: str = "builtin"  # builtin | ingest
    triples_file: str | None = None

    model: ModelConfig = field(default_factory=ModelConfig)
    training: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self) -> None:
        if self.retrieval_k < 1:
            raise ValueError("retrieval k must be at least 1")
        if self.extractor_mode not in ("builtin", "ingest"):
            raise ValueError(f"unknown extractor mode {self.extractor_mode!r}")

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        paths = raw.get("paths", {})
        retr = raw.get("retrieval", {})
        extractor = raw.get("extractor", {})
        model_cfg = ModelConfig(**raw.get("model", {}))
        train_raw = dict(raw.get("training", {}))
        train_raw.setdefault("seed", raw.get("seed", 0))
        train_cfg = TrainConfig(**train_raw)
        return cls(
            seed=raw.get("seed", 0),
            corpus=paths.get("corpus"),
            index_dir=paths.get("index_dir"),
            model_file=paths.get("model"),
            dataset_files={k: v for k, v in paths.get("datasets", {}).items()},
            predictions_file=paths.get("predictions"),
            report_file=paths.get("report"),
            triple_cache=paths.get("triple_cache"),
            phrase_table=paths.get("phrase_table"),
            retrieval_k=retr.get("k", 20),
            max_tokens=retr.get("max_tokens", 40),
            overfetch_factor=retr.get("overfetch_factor", 5),
            negation_words=retr.get("negation_words"),
            extractor_mode=extractor.get("mode", "builtin"),
            triples_file=extractor.get("triples_file"),
            model=model_cfg,
            training=train_cfg,
        )

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "paths": {
                "corpus": self.corpus,
                "index_dir": self.index_dir,
                "model": self.model_file,
                "datasets": dict(self.dataset_files),
                "predictions": self.predictions_file,
                "report": self.report_file,
                "triple_cache": self.triple_cache,
                "phrase_table": self.phrase_table,
            },
            "retrieval": {
                "k": self.retrieval_k,
                "max_tokens": self.max_tokens,
                "overfetch_factor": self.overfetch_factor,
                "negation_words": self.negation_words,
            },
            "extractor": {"mode": self.extractor_mode,
                          "triples_file": self.triples_file},
            "model": self.model.to_dict(),
            "training": {
                "lr": self.training.lr,
                "batch_size": self.training.batch_size,
                "epochs": self.training.epochs,
                "optimizer": self.training.optimizer,
                "seed": self.training.seed,
                "shuffle": self.training.shuffle,
            },
        }

    def retrieval_config(self) -> RetrievalConfig:
        cfg = RetrievalConfig(max_tokens=self.max_tokens,
                              overfetch_factor=self.overfetch_factor)
        if self.negation_words is not None:
            cfg = cfg.with_overrides(negation_words=tuple(self.negation_words))
        return cfg

    def phrase_list(self) -> list[str] | None:
        if self.phrase_table is None:
            return None
        return load_phrase_table(self.phrase_table)


# -- triple extraction with caching ----------------------------------------

class TripleCache:
    """Disk cache keyed by (sentence checksum, extractor version)."""

    def __init__(self, path: str | Path | None):
        self.path = Path(path) if path else None
        self.entries: dict[str, list[str]] = {}
        if self.path and self.path.exists():
            with self.path.open(encoding="utf-8") as handle:
                for line in handle:
                    obj = json.loads(line)
                    self.entries[obj["key"]] = obj["rows"]
        self._dirty: dict[str, list[str]] = {}

    @staticmethod
    def key(sentence: str) -> str:
        digest = hashlib.sha256(sentence.encode("utf-8")).hexdigest()[:24]
        return f"{digest}:{EXTRACTOR_VERSION}"

    def get(self, sentence: str, sentence_id: str) -> list[Triple] | None:
        rows = self.entries.get(self.key(sentence))
        if rows is None:
            return None
        return [parse_triple_row(row)[1] for row in rows]

    def put(self, sentence: str, sentence_id: str,
            triples: list[Triple]) -> None:
        rows = [format_triple(sentence_id, t) for t in triples]
        key = self.key(sentence)
        self.entries[key] = rows
        self._dirty[key] = rows

    def flush(self) -> None:
        if self.path is None or not self._dirty:
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8") as handle:
            for key in sorted(self._dirty):
                handle.write(json.dumps({"key": key, "rows": self._dirty[key]},
                                        sort_keys=True) + "\n")
        self._dirty.clear()


def make_extractor(config: PipelineConfig,
                   cache: TripleCache | None = None
                   ) -> Callable[[str, str], list[Triple]]:
    """Return the (text, sentence_id) -> triples function for this run."""
    if config.extractor_mode == "ingest":
        if not config.triples_file:
            raise StageError("extract", "ingest mode needs a triples_file")
        table = ingest_triples(config.triples_file)

        def from_table(text: str, sentence_id: str) -> list[Triple]:
            if sentence_id in table:
                return table[sentence_id]
            # Hypotheses are not in external extraction output; fall back.
            return extract_all(text, sentence_id=sentence_id)

        return from_table

    def builtin(text: str, sentence_id: str) -> list[Triple]:
        if cache is not None:
            hit = cache.get(text, sentence_id)
            if hit is not None:
                return hit
        triples = extract_all(text, sentence_id=sentence_id)
        if cache is not None:
            cache.put(text, sentence_id, triples)
        return triples

    return builtin


# -- stages ------------------------------------------------------------------

def cmd_index(config: PipelineConfig) -> Path:
    """Build and persist the corpus index; a rerun on the same corpus is a no-op."""
    if not config.corpus or not config.index_dir:
        raise StageError("index", "config needs paths.corpus and paths.index_dir")
    corpus_path = Path(config.corpus)
    if not corpus_path.exists():
        raise StageError("index", f"corpus file not found: {corpus_path}")
    index_dir = Path(config.index_dir)
    checksum = retrieval.corpus_checksum(
        s for s in read_corpus(corpus_path) if s.strip())
    manifest = index_dir / "manifest.json"
    if manifest.exists():
        recorded = json.loads(manifest.read_text(encoding="utf-8"))
        if recorded.get("corpus_checksum") == checksum:
            return index_dir  # unchanged corpus: keep the existing index
    index = build_index(read_corpus(corpus_path))
    index.save(index_dir)
    return index_dir


def cmd_extract(config: PipelineConfig) -> Path:
    """Extract triples for every corpus sentence into the interchange file."""
    if not config.corpus:
        raise StageError("extract", "config needs paths.corpus")
    if not config.triples_file:
        raise StageError("extract", "config needs extractor.triples_file "
                                    "as the output path")
    cache = TripleCache(config.triple_cache)
    extractor = make_extractor(
        PipelineConfig(extractor_mode="builtin"), cache)
    out_path = Path(config.triples_file)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", encoding="utf-8") as handle:
        for i, sentence in enumerate(read_corpus(config.corpus)):
            if not sentence.strip():
                continue
            for triple in extractor(sentence, str(i)):
                handle.write(format_triple(str(i), triple) + "\n")
    cache.flush()
    return out_path


def _load_split(config: PipelineConfig, split: str) -> Dataset:
    path = config.dataset_files.get(split)
    if not path:
        raise StageError("dataset", f"no dataset path configured for "
                                    f"split {split!r}")
    return load_dataset(path, split)


def _load_index(config: PipelineConfig) -> CorpusIndex:
    if not config.index_dir or not Path(config.index_dir).exists():
        raise StageError("retrieval", "index directory missing; run `index` first")
    return CorpusIndex.load(config.index_dir)


def hypotheses_for_question(question: Question,
                            phrase_table=None) -> list[Hypothesis]:
    return [
        generate_hypothesis(question.stem, text, question_id=question.id,
                            option_label=label, phrase_table=phrase_table)
        for label, text in question.options
    ]


def build_pairs_for_question(
    question: Question,
    index: CorpusIndex,
    config: PipelineConfig,
    extractor: Callable[[str, str], list[Triple]],
) -> tuple[list[GraphPair], dict[str, list[retrieval.SentenceHit]]]:
    rcfg = config.retrieval_config()
    phrases = config.phrase_list()
    pairs = []
    supports_by_label: dict[str, list[retrieval.SentenceHit]] = {}
    for hypo in hypotheses_for_question(question, phrases):
        hits = retrieval.search_supports(index, hypo, k=config.retrieval_k,
                                         config=rcfg)
        supports_by_label[hypo.option_label] = hits
        pairs.append(build_pair(hypo, hits, extractor=extractor))
    return pairs, supports_by_label


def build_training_examples(
    dataset: Dataset, index: CorpusIndex, config: PipelineConfig,
    extractor: Callable[[str, str], list[Triple]],
) -> list[TrainingExample]:
    """One example per (question, option): gold options are the positives."""
    examples: list[TrainingExample] = []
    for question in sorted(dataset.questions, key=lambda q: q.id):
        pairs, _ = build_pairs_for_question(question, index, config, extractor)
        for pair in pairs:
            examples.append(TrainingExample(
                pair=pair, label=int(pair.option_label == question.answer_key)))
    return examples


def cmd_train(config: PipelineConfig) -> tuple[ModelParams, TrainingLog, dict]:
    """Train on the configured train split and persist the model."""
    if not config.model_file:
        raise StageError("train", "config needs paths.model")
    started = time.perf_counter()
    dataset = _load_split(config, "train")
    if len(dataset) == 0:
        raise StageError("train", "train split is empty")
    index = _load_index(config)
    cache = TripleCache(config.triple_cache)
    extractor = make_extractor(config, cache)
    t_pairs = time.perf_counter()
    examples = build_training_examples(dataset, index, config, extractor)
    cache.flush()
    t_built = time.perf_counter()
    try:
        params, log = train(examples, model_config=config.model,
                            train_config=config.training)
    except ValueError as exc:
        raise StageError("train", str(exc)) from exc
    params.save(config.model_file)
    report = {
        "config": config.to_dict(),
        "n_examples": len(examples),
        "n_positive": sum(ex.label for ex in examples),
        "training_curve": [
            {"epoch": r.epoch, "mean_loss": r.mean_loss, "accuracy": r.accuracy}
            for r in log.records
        ],
        "model_checksum": params.checksum(),
        "timings": {
            "build_pairs_s": t_built - t_pairs,
            "train_s": time.perf_counter() - t_built,
            "total_s": time.perf_counter() - started,
        },
    }
    if config.report_file:
        _write_report(config.report_file, report)
    return params, log, report


def predict_question(question: Question, params: ModelParams,
                     index: CorpusIndex, config: PipelineConfig,
                     extractor: Callable[[str, str], list[Triple]] | None = None,
                     ) -> tuple[Prediction, dict]:
    """Score every option and choose the argmax; exact ties stay ties."""
    extractor = extractor or make_extractor(config, None)
    pairs, supports = build_pairs_for_question(question, index, config,
                                               extractor)
    scores: dict[str, PairScore] = {}
    detail_options = {}
    for pair in pairs:
        score = score_pair(pair, params)
        scores[pair.option_label] = score
        detail_options[pair.option_label] = {
            "score": score.value,
            "cosine": score.cosine,
            "argmax_predicates": list(score.argmax) if score.argmax else None,
            "flags": list(pair.flags) + list(score.flags),
            "n_supports": len(supports[pair.option_label]),
            "hypothesis_graph": {"nodes": len(pair.hypothesis_graph.nodes),
                                 "edges": len(pair.hypothesis_graph.edges)},
            "support_graph": {"nodes": len(pair.support_graph.nodes),
                              "edges": len(pair.support_graph.edges)},
        }
    best = max(score.value for score in scores.values())
    chosen = frozenset(label for label, score in scores.items()
                       if score.value == best)
    prediction = Prediction(question_id=question.id, chosen_labels=chosen)
    detail = {"id": question.id, "options": detail_options,
              "chosen": sorted(chosen)}
    return prediction, detail


def cmd_predict(config: PipelineConfig, split: str) -> tuple[list[Prediction], dict]:
    """Predict a whole split; writes the predictions file when configured."""
    dataset = _load_split(config, split)
    index = _load_index(config)
    if not config.model_file or not Path(config.model_file).exists():
        raise StageError("predict", "model file missing; run `train` first")
    params = ModelParams.load(config.model_file)
    cache = TripleCache(config.triple_cache)
    extractor = make_extractor(config, cache)
    started = time.perf_counter()
    predictions = []
    details = []
    for question in sorted(dataset.questions, key=lambda q: q.id):
        prediction, detail = predict_question(question, params, index, config,
                                              extractor)
        predictions.append(prediction)
        details.append(detail)
    cache.flush()
    report = {
        "config": config.to_dict(),
        "split": split,
        "per_question": details,
        "timings": {"total_s": time.perf_counter() - started},
    }
    if config.predictions_file:
        write_predictions(predictions, config.predictions_file)
    return predictions, report


def evaluate_predictions(dataset: Dataset, predictions: list[Prediction],
                         ) -> tuple[EvalResult, dict]:
    result = score_predictions(dataset, predictions)
    aggregate = {
        "n_questions": len(dataset),
        "total_score": format_score(result.total_score),
        "total_score_exact": str(result.total_score),
    }
    return result, aggregate


def cmd_evaluate(config: PipelineConfig, split: str, guess_all: bool = False,
                 upper_bound: float | None = None) -> dict:
    """Evaluate a split and emit the report plus a predictions file."""
    started = time.perf_counter()
    dataset = _load_split(config, split)
    if guess_all:
        predictions = guess_all_predictions(dataset)
        per_question = [{"id": p.question_id, "chosen": sorted(p.chosen_labels)}
                        for p in predictions]
        if config.predictions_file:
            write_predictions(predictions, config.predictions_file)
    else:
        predictions, predict_report = cmd_predict(config, split)
        per_question = predict_report["per_question"]
    result, aggregate = evaluate_predictions(dataset, predictions)
    points = {p.question_id: p for p in predictions}
    for record in per_question:
        record["points"] = str(result.per_question_points[record["id"]])
        record["answer_key"] = dataset.by_id(record["id"]).answer_key
    report = {
        "config": config.to_dict(),
        "split": split,
        "mode": "guess-all" if guess_all else "model",
        "aggregate": aggregate,
        "per_question": per_question,
        "timings": {"total_s": time.perf_counter() - started},
    }
    if upper_bound is not None:
        n_options = max(len(q.options) for q in dataset.questions)
        bound = upper_bound_score(upper_bound, n_options)
        report["upper_bound"] = {
            "solved_fraction": upper_bound,
            "num_options": n_options,
            "score": format_score(bound),
        }
    if config.report_file:
        _write_report(config.report_file, report)
    return report


def cmd_explain(config: PipelineConfig, question_id: str, split: str) -> str:
    """Human-readable trace of the full pipeline for one question."""
    dataset = _load_split(config, split)
    try:
        question = dataset.by_id(question_id)
    except KeyError:
        raise StageError("explain",
                         f"question id {question_id!r} not in split {split!r}")
    index = _load_index(config)
    if not config.model_file or not Path(config.model_file).exists():
        raise StageError("explain", "model file missing; run `train` first")
    params = ModelParams.load(config.model_file)
    extractor = make_extractor(config, TripleCache(config.triple_cache))
    pairs, supports = build_pairs_for_question(question, index, config,
                                               extractor)
    lines = [f"question {question.id}", f"stem: {question.stem}",
             f"answer key: {question.answer_key}", ""]
    scores = {}
    for pair in pairs:
        score = score_pair(pair, params)
        scores[pair.option_label] = score
        option_text = question.option_text(pair.option_label)
        hypo = next(h for h in hypotheses_for_question(question,
                                                       config.phrase_list())
                    if h.option_label == pair.option_label)
        lines.append(f"option {pair.option_label}: {option_text}")
        lines.append(f"  hypothesis ({hypo.rule_applied}): {hypo.text}")
        lines.append(f"  supports retained: {len(supports[pair.option_label])}")
        for hit in supports[pair.option_label]:
            lines.append(f"    [{hit.sentence_id}] {hit.relevance_score:.4f} "
                         f"{hit.text}")
        lines.append("  hypothesis graph:")
        lines.extend(f"    {line}" for line in pair.hypothesis_graph.dump().splitlines())
        lines.append("  support graph:")
        lines.extend(f"    {line}" for line in pair.support_graph.dump().splitlines())
        argmax = score.argmax if score.argmax else "-"
        lines.append(f"  score: {score.value:.6f} (max cosine {score.cosine:.6f}, "
                     f"argmax predicate pair {argmax}, flags {list(score.flags) + list(pair.flags)})")
        lines.append("")
    best = max(s.value for s in scores.values())
    chosen = sorted(label for label, s in scores.items() if s.value == best)
    lines.append(f"chosen: {chosen}")
    return "\n".join(lines)


def _write_report(path: str | Path, report: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2, sort_keys=True),
                    encoding="utf-8")
