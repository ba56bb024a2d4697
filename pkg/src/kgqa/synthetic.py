"""Planted-motif synthetic graph pairs.

Each synthetic question pairs one hypothesis graph with one support graph
per option. The correct option's support contains a predicate whose
neighborhood mirrors the hypothesis predicate: same subject and object
entities, and a predicate token drawn from a fixed synonym table
("alpha<i>" on the hypothesis side pairs with "beta<i>" on the support
side). Distractor options reuse the same entities with a mismatched synonym
index, so nothing except the learned token correspondence separates the
classes. That makes the generator an oracle: a model at chance knows
nothing, a model near 100% has learned the planted correspondence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import GraphPair, build_graph
from .model import TrainingExample
from .triples import Triple

OPTION_LABELS = ("A", "B", "C", "D", "E", "F")


@dataclass(frozen=True)
class SyntheticQuestion:
    question_id: str
    examples: tuple[TrainingExample, ...]  # one per option, exactly one label 1

    @property
    def answer_label(self) -> str:
        for ex in self.examples:
            if ex.label == 1:
                return ex.pair.option_label
        raise AssertionError("no positive option")


def _triple(subj: str, verb: str, obj: str) -> Triple:
    return Triple(subject=subj, predicate=verb, objects=(obj,))


def make_questions(
    n_questions: int,
    seed: int = 0,
    n_options: int = 4,
    n_verb_pairs: int = 10,
    n_entities: int = 30,
    n_distractor_triples: int = 2,
) -> list[SyntheticQuestion]:
    """Generate planted-motif questions; fresh seeds give held-out sets."""
    if n_options < 2 or n_options > len(OPTION_LABELS):
        raise ValueError("n_options out of range")
    if n_verb_pairs < n_options:
        raise ValueError("need at least as many verb pairs as options")
    rng = np.random.default_rng(seed)
    questions = []
    for q in range(n_questions):
        verb = int(rng.integers(n_verb_pairs))
        subj = f"ent{int(rng.integers(n_entities))}"
        obj = f"ent{int(rng.integers(n_entities))}"
        hypo_graph = build_graph([_triple(subj, f"alpha{verb}", obj)])

        # Distractor verbs for the wrong options, all different from `verb`.
        wrong = [v for v in range(n_verb_pairs) if v != verb]
        rng.shuffle(wrong)
        answer_pos = int(rng.integers(n_options))

        examples = []
        for pos in range(n_options):
            if pos == answer_pos:
                planted = _triple(subj, f"beta{verb}", obj)
            else:
                planted = _triple(subj, f"beta{wrong[pos % len(wrong)]}", obj)
            triples = [planted]
            for _ in range(n_distractor_triples):
                # Distractor verbs never reuse the question's synonym index,
                # otherwise a wrong option could carry a partial motif.
                noise_verb = wrong[int(rng.integers(len(wrong)))]
                triples.append(_triple(
                    f"ent{int(rng.integers(n_entities))}",
                    f"beta{noise_verb}",
                    f"ent{int(rng.integers(n_entities))}",
                ))
            pair = GraphPair(
                hypothesis_graph=hypo_graph,
                support_graph=build_graph(triples),
                question_id=f"syn{q}",
                option_label=OPTION_LABELS[pos],
            )
            examples.append(TrainingExample(pair=pair,
                                            label=int(pos == answer_pos)))
        questions.append(SyntheticQuestion(question_id=f"syn{q}",
                                           examples=tuple(examples)))
    return questions


def flatten(questions: list[SyntheticQuestion]) -> list[TrainingExample]:
    return [ex for question in questions for ex in question.examples]
