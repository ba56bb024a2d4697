"""Dataset model, question-file parsing, and the tie-aware evaluation harness.

Questions come in the usual one-JSON-object-per-line exam format::

    {"id": "q1", "question": {"stem": "...", "choices": [{"label": "A",
     "text": "..."}]}, "answerKey": "A"}

Predictions use the same layout with a ``chosen`` list so that a k-way tie
is a set of size k. Scoring is done in exact rational arithmetic and only
rendered to two decimals at the edge.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence


class DatasetError(ValueError):
    """Raised for malformed question or prediction files."""


class ScoringError(ValueError):
    """Raised when predictions do not line up with the dataset."""


@dataclass(frozen=True)
class Question:
    """One exam question with labeled options and the gold answer label."""

    id: str
    stem: str
    options: tuple[tuple[str, str], ...]  # (label, text), order preserved
    answer_key: str

    def __post_init__(self) -> None:
        labels = [label for label, _ in self.options]
        if len(self.options) < 2:
            raise DatasetError(f"question {self.id!r}: needs at least 2 options")
        if len(set(labels)) != len(labels):
            raise DatasetError(f"question {self.id!r}: duplicate option labels")
        if self.answer_key not in labels:
            raise DatasetError(
                f"question {self.id!r}: answerKey {self.answer_key!r} not among "
                f"option labels {labels}"
            )

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.options)

    def option_text(self, label: str) -> str:
        for lab, text in self.options:
            if lab == label:
                return text
        raise KeyError(label)


@dataclass(frozen=True)
class Dataset:
    split: str
    questions: tuple[Question, ...]

    def __post_init__(self) -> None:
        ids = [q.id for q in self.questions]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise DatasetError(f"duplicate question ids in split {self.split!r}: {dupes}")

    def __len__(self) -> int:
        return len(self.questions)

    def by_id(self, question_id: str) -> Question:
        for q in self.questions:
            if q.id == question_id:
                return q
        raise KeyError(question_id)


@dataclass(frozen=True)
class Prediction:
    """Chosen option labels for one question; more than one label is a tie."""

    question_id: str
    chosen_labels: frozenset[str]

    def __post_init__(self) -> None:
        if not self.chosen_labels:
            raise ScoringError(f"prediction for {self.question_id!r}: empty label set")


@dataclass(frozen=True)
class EvalResult:
    """Per-question points plus the aggregate percentage, both exact."""

    per_question_points: dict[str, Fraction]
    total_score: Fraction = field(default=Fraction(0))

    def formatted_total(self) -> str:
        return format_score(self.total_score)


def _parse_question(obj: dict, line_no: int) -> Question:
    try:
        qid = obj["id"]
        stem = obj["question"]["stem"]
        choices = obj["question"]["choices"]
        answer_key = obj["answerKey"]
    except (KeyError, TypeError) as exc:
        raise DatasetError(f"line {line_no}: missing field {exc}") from None
    options = []
    for choice in choices:
        try:
            options.append((str(choice["label"]), str(choice["text"])))
        except (KeyError, TypeError) as exc:
            raise DatasetError(f"line {line_no}: malformed choice ({exc})") from None
    try:
        return Question(id=str(qid), stem=str(stem), options=tuple(options),
                        answer_key=str(answer_key))
    except DatasetError as exc:
        raise DatasetError(f"line {line_no}: {exc}") from None


def load_dataset(path: str | Path, split: str) -> Dataset:
    """Load a one-JSON-per-line question file into a validated Dataset.

    Malformed lines are reported with their line number; duplicate ids and
    answer keys that do not match any option label are rejected here so the
    scorer never sees them.
    """
    path = Path(path)
    questions: list[Question] = []
    seen: dict[str, int] = {}
    with path.open(encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"line {line_no}: invalid JSON ({exc.msg})") from None
            question = _parse_question(obj, line_no)
            if question.id in seen:
                raise DatasetError(
                    f"line {line_no}: duplicate question id {question.id!r} "
                    f"(first seen on line {seen[question.id]})"
                )
            seen[question.id] = line_no
            questions.append(question)
    return Dataset(split=split, questions=tuple(questions))


def load_predictions(path: str | Path) -> list[Prediction]:
    """Read a prediction file: one JSON object per line with id and chosen."""
    path = Path(path)
    preds: list[Prediction] = []
    with path.open(encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                preds.append(Prediction(question_id=str(obj["id"]),
                                        chosen_labels=frozenset(obj["chosen"])))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DatasetError(f"line {line_no}: malformed prediction ({exc})") from None
    return preds


def write_predictions(preds: Iterable[Prediction], path: str | Path) -> None:
    """Write predictions deterministically: sorted by id, sorted labels."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for pred in sorted(preds, key=lambda p: p.question_id):
            obj = {"id": pred.question_id, "chosen": sorted(pred.chosen_labels)}
            handle.write(json.dumps(obj, sort_keys=True) + "\n")


def score_predictions(dataset: Dataset, preds: Sequence[Prediction]) -> EvalResult:
    """Score predictions against the gold labels.

    A prediction naming k labels earns 1/k points when the gold label is among
    them, otherwise 0. Questions without a prediction score 0 (an abstaining
    system earns nothing). All arithmetic is exact.
    """
    by_question = {q.id: q for q in dataset.questions}
    chosen: dict[str, Prediction] = {}
    for pred in preds:
        if pred.question_id not in by_question:
            raise ScoringError(f"prediction for unknown question id {pred.question_id!r}")
        if pred.question_id in chosen:
            raise ScoringError(f"duplicate prediction for question {pred.question_id!r}")
        question = by_question[pred.question_id]
        unknown = pred.chosen_labels - set(question.labels)
        if unknown:
            raise ScoringError(
                f"prediction for {pred.question_id!r} names labels {sorted(unknown)} "
                f"not on the question"
            )
        chosen[pred.question_id] = pred

    points: dict[str, Fraction] = {}
    for question in dataset.questions:
        pred = chosen.get(question.id)
        if pred is None:
            points[question.id] = Fraction(0)
        elif question.answer_key in pred.chosen_labels:
            points[question.id] = Fraction(1, len(pred.chosen_labels))
        else:
            points[question.id] = Fraction(0)

    if points:
        total = Fraction(100) * sum(points.values()) / len(points)
    else:
        total = Fraction(0)
    return EvalResult(per_question_points=points, total_score=total)


def guess_all_predictions(dataset: Dataset) -> list[Prediction]:
    """The guess-all strategy: predict every option of every question."""
    return [Prediction(question_id=q.id, chosen_labels=frozenset(q.labels))
            for q in dataset.questions]


def upper_bound_score(solved_fraction: Fraction | float, num_options: int) -> Fraction:
    """Ceiling score when a fraction of questions is solved and the rest guessed.

    Solved questions earn full credit; the remainder earns the guess-all
    credit 1/num_options. Returns an exact percentage.
    """
    if num_options < 2:
        raise ValueError("num_options must be at least 2")
    solved = Fraction(solved_fraction).limit_denominator(10**9) \
        if isinstance(solved_fraction, float) else Fraction(solved_fraction)
    if not 0 <= solved <= 1:
        raise ValueError("solved_fraction must be within [0, 1]")
    return 100 * solved + 100 * (1 - solved) * Fraction(1, num_options)


def format_score(score: Fraction) -> str:
    """Render an exact percentage to two decimals, rounding half up."""
    hundredths = score * 100
    rounded = (2 * hundredths.numerator + hundredths.denominator) // (2 * hundredths.denominator)
    return f"{rounded // 100}.{rounded % 100:02d}"
