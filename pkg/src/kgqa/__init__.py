"""Science-exam QA by matching hypothesis and support knowledge graphs.

Pipeline: rewrite each (question stem, option) into a hypothesis, retrieve
supporting sentences with BM25, extract relation triples, aggregate them
into paired knowledge graphs, and rank options with a learned graph-embedding
matching score.
"""

from .data import (Dataset, EvalResult, Prediction, Question, format_score,
                   guess_all_predictions, load_dataset, score_predictions,
                   upper_bound_score)
from .graph import GraphPair, KnowledgeGraph, build_graph, build_pair
from .hypothesis import Hypothesis, generate_hypothesis
from .lemma import Lexicon, default_lexicon, lemmatize, lemmatize_token
from .model import (ModelConfig, ModelParams, NodeState, PairScore,
                    TrainingExample, Vocabulary, encode_node_text, gradient,
                    loss, propagate, score_pair)
from .retrieval import (CorpusIndex, RetrievalConfig, SentenceHit, build_index,
                        is_noisy, search_supports)
from .training import TrainConfig, TrainingLog, train
from .triples import Triple, extract, extract_all, ingest_triples

__version__ = "0.1.0"

__all__ = [
    "Dataset", "EvalResult", "Prediction", "Question", "format_score",
    "guess_all_predictions", "load_dataset", "score_predictions",
    "upper_bound_score",
    "GraphPair", "KnowledgeGraph", "build_graph", "build_pair",
    "Hypothesis", "generate_hypothesis",
    "Lexicon", "default_lexicon", "lemmatize", "lemmatize_token",
    "ModelConfig", "ModelParams", "NodeState", "PairScore", "TrainingExample",
    "Vocabulary", "encode_node_text", "gradient", "loss", "propagate",
    "score_pair",
    "CorpusIndex", "RetrievalConfig", "SentenceHit", "build_index", "is_noisy",
    "search_supports",
    "TrainConfig", "TrainingLog", "train",
    "Triple", "extract", "extract_all", "ingest_triples",
    "__version__",
]
