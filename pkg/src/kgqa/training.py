"""Point-wise training of the graph matcher as a binary classifier.

Each (question, option) pair is one example: label 1 for the gold option,
0 for distractors. Optimization is mini-batch gradient descent (Adam by
default, plain SGD available); examples within a batch are reduced in a
fixed order so a fixed seed reproduces the parameters bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .graph import GraphPair
from .model import (EncodedGraph, ModelConfig, ModelParams, TrainingExample,
                    Vocabulary, encode_graph, gradient)


class TrainingDivergence(RuntimeError):
    """Loss became non-finite; carries the epoch/batch where it happened."""


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 32
    epochs: int = 30
    optimizer: str = "adam"  # adam | sgd
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self) -> None:
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    mean_loss: float
    accuracy: float


@dataclass
class TrainingLog:
    records: list[EpochRecord] = field(default_factory=list)

    def last(self) -> EpochRecord:
        return self.records[-1]


def build_vocabulary(pairs: Sequence[GraphPair]) -> Vocabulary:
    texts: list[str] = []
    for pair in pairs:
        for graph in (pair.hypothesis_graph, pair.support_graph):
            texts.extend(node.text for node in graph.nodes)
    return Vocabulary.from_texts(texts)


class _Adam:
    def __init__(self, params: ModelParams, lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = params.zeros_like()
        self.v = params.zeros_like()
        self.t = 0

    def step(self, params: ModelParams, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        for name, grad in grads.items():
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            step = self.lr * (m / correction1) / (np.sqrt(v / correction2)
                                                  + self.eps)
            params.arrays[name] -= step


class _Sgd:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: ModelParams, grads: dict[str, np.ndarray]) -> None:
        for name, grad in grads.items():
            params.arrays[name] -= self.lr * grad


def train(
    examples: Sequence[TrainingExample],
    model_config: ModelConfig | None = None,
    train_config: TrainConfig | None = None,
    vocab: Vocabulary | None = None,
) -> tuple[ModelParams, TrainingLog]:
    """Train from scratch on labeled graph pairs.

    Requires at least one positive and one negative example; anything else
    cannot teach a ranker. Raises TrainingDivergence if the loss leaves the
    finite range.
    """
    model_config = model_config or ModelConfig()
    train_config = train_config or TrainConfig()
    labels = [ex.label for ex in examples]
    if sum(labels) == 0 or sum(labels) == len(labels):
        raise ValueError(
            "training needs at least one positive and one negative example "
            f"(got {sum(labels)} positives out of {len(labels)})"
        )
    if vocab is None:
        vocab = build_vocabulary([ex.pair for ex in examples])
    params = ModelParams.initialize(model_config, vocab, seed=train_config.seed)
    encoded: list[tuple[EncodedGraph, EncodedGraph]] = [
        (encode_graph(ex.pair.hypothesis_graph, vocab),
         encode_graph(ex.pair.support_graph, vocab))
        for ex in examples
    ]

    optimizer = (_Adam(params, train_config.lr)
                 if train_config.optimizer == "adam"
                 else _Sgd(train_config.lr))
    rng = np.random.default_rng(train_config.seed)
    log = TrainingLog()

    for epoch in range(1, train_config.epochs + 1):
        order = (rng.permutation(len(examples)) if train_config.shuffle
                 else np.arange(len(examples)))
        epoch_loss = 0.0
        epoch_correct = 0
        for start in range(0, len(order), train_config.batch_size):
            batch = order[start: start + train_config.batch_size]
            batch_grads = params.zeros_like()
            batch_loss = 0.0
            for idx in batch:
                ex = examples[idx]
                loss_value, score, grads = gradient(ex, params,
                                                    encoded=encoded[idx])
                batch_loss += loss_value
                epoch_correct += int((score.value > 0.5) == bool(ex.label))
                for name, grad in grads.items():
                    batch_grads[name] += grad
            scale = 1.0 / len(batch)
            for name in batch_grads:
                batch_grads[name] *= scale
            batch_loss *= scale
            if not np.isfinite(batch_loss):
                raise TrainingDivergence(
                    f"non-finite loss at epoch {epoch}, "
                    f"batch starting at {start} (loss={batch_loss})"
                )
            optimizer.step(params, batch_grads)
            epoch_loss += batch_loss * len(batch)
        log.records.append(EpochRecord(
            epoch=epoch,
            mean_loss=epoch_loss / len(examples),
            accuracy=epoch_correct / len(examples),
        ))
    return params, log


def binary_accuracy(examples: Sequence[TrainingExample],
                    params: ModelParams) -> float:
    """Fraction of pairs classified correctly at the 0.5 threshold."""
    from .model import score_pair

    correct = sum(
        int((score_pair(ex.pair, params).value > 0.5) == bool(ex.label))
        for ex in examples
    )
    return correct / len(examples)
