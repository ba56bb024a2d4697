"""Graph-pair matching model: recursive node embeddings and cosine-max scoring.

Every node starts from a text encoding produced by an LSTM over word
embeddings, then runs T rounds of neighborhood aggregation: each incident
edge contributes the neighbor's previous state concatenated with an
edge-label embedding and a direction bit, messages are summed, and a
two-layer tanh network maps [text encoding; own state; message sum] to the
next state. A pair is scored by the maximum cosine similarity between
hypothesis and support predicate-node embeddings, shifted by -0.5 and pushed
through a sigmoid.

Everything is float64 numpy with hand-written reverse-mode gradients; the
test suite checks them against central finite differences.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .graph import GraphPair, KnowledgeGraph

EDGE_LABELS = ("subj", "obj", "time", "loc")
UNKNOWN_TOKEN = "<unk>"

MODEL_FORMAT_VERSION = 1

# Fallback when a pair has no predicate nodes on one side: the minimum
# attainable pre-sigmoid value (cosine -1, shifted by -0.5).
FALLBACK_LOGIT = -1.5

PARAM_GROUPS = ("word_emb", "lstm_wx", "lstm_wh", "lstm_b", "edge_emb",
                "w1", "b1", "w2", "b2")


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass(frozen=True)
class ModelConfig:
    """Hyperparameters; none of these is dictated by the method itself."""

    d_word: int = 50
    d_text: int = 64
    d_edge: int = 8
    d_node: int = 64
    d_hidden: int = 64
    steps: int = 2
    neighborhood: str = "both"  # both | in | out
    init_scale: float = 0.1

    def __post_init__(self) -> None:
        if self.steps < 1:
            raise ValueError("steps (T) must be at least 1")
        if self.neighborhood not in ("both", "in", "out"):
            raise ValueError(f"unknown neighborhood {self.neighborhood!r}")

    @property
    def d_message(self) -> int:
        return self.d_node + self.d_edge + 1  # neighbor state, label, direction

    @property
    def d_update_in(self) -> int:
        return self.d_text + self.d_node + self.d_message

    def to_dict(self) -> dict:
        return {"d_word": self.d_word, "d_text": self.d_text,
                "d_edge": self.d_edge, "d_node": self.d_node,
                "d_hidden": self.d_hidden, "steps": self.steps,
                "neighborhood": self.neighborhood,
                "init_scale": self.init_scale}


class Vocabulary:
    """Token table with a shared trainable unknown vector at index 0."""

    def __init__(self, tokens: Sequence[str]):
        deduped = sorted(set(tokens) - {UNKNOWN_TOKEN})
        self.tokens = [UNKNOWN_TOKEN] + deduped
        self.index = {tok: i for i, tok in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def encode(self, text: str) -> np.ndarray:
        return np.array([self.index.get(tok, 0) for tok in text.split()],
                        dtype=np.int64)

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> "Vocabulary":
        tokens: set[str] = set()
        for text in texts:
            tokens.update(text.split())
        return cls(sorted(tokens))


class ModelParams:
    """All trainable tensors plus the vocabulary and dimensions."""

    def __init__(self, config: ModelConfig, vocab: Vocabulary,
                 arrays: dict[str, np.ndarray], seed: int = 0):
        self.config = config
        self.vocab = vocab
        self.seed = seed
        for name in PARAM_GROUPS:
            if name not in arrays:
                raise ValueError(f"missing parameter group {name!r}")
        self.arrays = {name: np.asarray(arrays[name], dtype=np.float64)
                       for name in PARAM_GROUPS}
        self._check_shapes()

    def _check_shapes(self) -> None:
        cfg = self.config
        expected = {
            "word_emb": (len(self.vocab), cfg.d_word),
            "lstm_wx": (4 * cfg.d_text, cfg.d_word),
            "lstm_wh": (4 * cfg.d_text, cfg.d_text),
            "lstm_b": (4 * cfg.d_text,),
            "edge_emb": (len(EDGE_LABELS), cfg.d_edge),
            "w1": (cfg.d_hidden, cfg.d_update_in),
            "b1": (cfg.d_hidden,),
            "w2": (cfg.d_node, cfg.d_hidden),
            "b2": (cfg.d_node,),
        }
        for name, shape in expected.items():
            if self.arrays[name].shape != shape:
                raise ValueError(f"{name}: expected shape {shape}, "
                                 f"got {self.arrays[name].shape}")
            if not np.all(np.isfinite(self.arrays[name])):
                raise ValueError(f"{name}: non-finite values")

    @classmethod
    def initialize(cls, config: ModelConfig, vocab: Vocabulary,
                   seed: int = 0) -> "ModelParams":
        rng = np.random.default_rng(seed)
        scale = config.init_scale

        def uniform(*shape):
            return rng.uniform(-scale, scale, size=shape)

        arrays = {
            "word_emb": uniform(len(vocab), config.d_word),
            "lstm_wx": uniform(4 * config.d_text, config.d_word),
            "lstm_wh": uniform(4 * config.d_text, config.d_text),
            "lstm_b": np.zeros(4 * config.d_text),
            "edge_emb": uniform(len(EDGE_LABELS), config.d_edge),
            "w1": uniform(config.d_hidden, config.d_update_in),
            "b1": np.zeros(config.d_hidden),
            "w2": uniform(config.d_node, config.d_hidden),
            "b2": np.zeros(config.d_node),
        }
        return cls(config, vocab, arrays, seed=seed)

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(arr) for name, arr in self.arrays.items()}

    def checksum(self) -> str:
        digest = hashlib.sha256()
        for name in PARAM_GROUPS:
            digest.update(name.encode())
            digest.update(self.arrays[name].tobytes())
        return digest.hexdigest()

    def save(self, path: str | Path) -> None:
        path = Path(path)
        meta = {
            "format_version": MODEL_FORMAT_VERSION,
            "config": self.config.to_dict(),
            "seed": self.seed,
            "vocab": self.vocab.tokens,
            "checksum": self.checksum(),
        }
        meta_bytes = np.frombuffer(
            json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8)
        with path.open("wb") as handle:  # keep the exact path, no .npz suffix
            np.savez(handle, meta=meta_bytes, **self.arrays)

    @classmethod
    def load(cls, path: str | Path) -> "ModelParams":
        with np.load(Path(path)) as data:
            meta = json.loads(bytes(data["meta"]).decode("utf-8"))
            if meta.get("format_version") != MODEL_FORMAT_VERSION:
                raise ValueError(
                    f"unsupported model format {meta.get('format_version')!r}")
            arrays = {name: data[name] for name in PARAM_GROUPS}
        vocab = Vocabulary.__new__(Vocabulary)
        vocab.tokens = list(meta["vocab"])
        vocab.index = {tok: i for i, tok in enumerate(vocab.tokens)}
        params = cls(ModelConfig(**meta["config"]), vocab, arrays,
                     seed=meta["seed"])
        if params.checksum() != meta["checksum"]:
            raise ValueError(f"model checksum mismatch in {path}; "
                             f"file corrupt or tampered")
        return params


# -- graph encoding --------------------------------------------------------

@dataclass(frozen=True)
class EncodedGraph:
    """A knowledge graph reduced to arrays the network consumes."""

    n_nodes: int
    texts: tuple[str, ...]                       # unique node texts
    token_ids: tuple[np.ndarray, ...]            # per unique text
    text_index: np.ndarray                       # node -> unique text position
    edge_src: np.ndarray
    edge_dst: np.ndarray
    edge_label: np.ndarray
    predicate_pos: np.ndarray                    # positions of predicate nodes
    node_ids: tuple[int, ...]                    # original node ids, by position


def encode_graph(graph: KnowledgeGraph, vocab: Vocabulary) -> EncodedGraph:
    label_index = {label: i for i, label in enumerate(EDGE_LABELS)}
    pos = {node.id: i for i, node in enumerate(graph.nodes)}
    texts: list[str] = []
    text_pos: dict[str, int] = {}
    text_index = np.zeros(len(graph.nodes), dtype=np.int64)
    for i, node in enumerate(graph.nodes):
        if node.text not in text_pos:
            text_pos[node.text] = len(texts)
            texts.append(node.text)
        text_index[i] = text_pos[node.text]
    return EncodedGraph(
        n_nodes=len(graph.nodes),
        texts=tuple(texts),
        token_ids=tuple(vocab.encode(text) for text in texts),
        text_index=text_index,
        edge_src=np.array([pos[e.src] for e in graph.edges], dtype=np.int64),
        edge_dst=np.array([pos[e.dst] for e in graph.edges], dtype=np.int64),
        edge_label=np.array([label_index[e.label] for e in graph.edges],
                            dtype=np.int64),
        predicate_pos=np.array(
            [i for i, node in enumerate(graph.nodes) if node.kind == "predicate"],
            dtype=np.int64),
        node_ids=tuple(node.id for node in graph.nodes),
    )


# -- LSTM text encoder -----------------------------------------------------

def _lstm_forward(params: ModelParams, token_ids: np.ndarray):
    """Run the LSTM over one token sequence; returns final h and caches."""
    cfg = params.config
    wx, wh, b = (params.arrays["lstm_wx"], params.arrays["lstm_wh"],
                 params.arrays["lstm_b"])
    h = np.zeros(cfg.d_text)
    c = np.zeros(cfg.d_text)
    steps = []
    for tok in token_ids:
        x = params.arrays["word_emb"][tok]
        gates = wx @ x + wh @ h + b
        ai, af, ag, ao = np.split(gates, 4)
        i_g = sigmoid(ai)
        f_g = sigmoid(af)
        g_g = np.tanh(ag)
        o_g = sigmoid(ao)
        c_new = f_g * c + i_g * g_g
        tc = np.tanh(c_new)
        h_new = o_g * tc
        steps.append((int(tok), x, h, c, i_g, f_g, g_g, o_g, tc))
        h, c = h_new, c_new
    return h, steps


def _lstm_backward(params: ModelParams, steps, dh_final: np.ndarray,
                   grads: dict[str, np.ndarray]) -> None:
    cfg = params.config
    wx, wh = params.arrays["lstm_wx"], params.arrays["lstm_wh"]
    dh = dh_final.copy()
    dc = np.zeros(cfg.d_text)
    for tok, x, h_prev, c_prev, i_g, f_g, g_g, o_g, tc in reversed(steps):
        do = dh * tc
        dc = dc + dh * o_g * (1.0 - tc * tc)
        di = dc * g_g
        df = dc * c_prev
        dg = dc * i_g
        dc_prev = dc * f_g
        da = np.concatenate([
            di * i_g * (1.0 - i_g),
            df * f_g * (1.0 - f_g),
            dg * (1.0 - g_g * g_g),
            do * o_g * (1.0 - o_g),
        ])
        grads["lstm_wx"] += np.outer(da, x)
        grads["lstm_wh"] += np.outer(da, h_prev)
        grads["lstm_b"] += da
        grads["word_emb"][tok] += wx.T @ da
        dh = wh.T @ da
        dc = dc_prev


def encode_node_text(text: str, params: ModelParams) -> np.ndarray:
    """Final LSTM hidden state over the node's word embeddings."""
    ids = params.vocab.encode(text)
    h, _ = _lstm_forward(params, ids)
    return h


# -- propagation -----------------------------------------------------------

class _GraphCache:
    __slots__ = ("x_unique", "lstm_steps", "x_nodes", "step_caches", "mu")

    def __init__(self, x_unique, lstm_steps, x_nodes, step_caches, mu):
        self.x_unique = x_unique
        self.lstm_steps = lstm_steps
        self.x_nodes = x_nodes
        self.step_caches = step_caches
        self.mu = mu


def _graph_forward(params: ModelParams, eg: EncodedGraph) -> _GraphCache:
    cfg = params.config
    n = eg.n_nodes
    x_unique = np.zeros((len(eg.texts), cfg.d_text))
    lstm_steps = []
    for u, ids in enumerate(eg.token_ids):
        h, steps = _lstm_forward(params, ids)
        x_unique[u] = h
        lstm_steps.append(steps)
    x_nodes = x_unique[eg.text_index] if n else np.zeros((0, cfg.d_text))

    w1, b1 = params.arrays["w1"], params.arrays["b1"]
    w2, b2 = params.arrays["w2"], params.arrays["b2"]
    edge_emb = params.arrays["edge_emb"]

    mu = np.zeros((n, cfg.d_node))
    step_caches = []
    for _ in range(cfg.steps):
        msg = np.zeros((n, cfg.d_message))
        if len(eg.edge_src) and n:
            lab_vecs = edge_emb[eg.edge_label]
            if cfg.neighborhood in ("both", "in"):
                rows = np.concatenate(
                    [mu[eg.edge_src], lab_vecs,
                     np.ones((len(eg.edge_src), 1))], axis=1)
                np.add.at(msg, eg.edge_dst, rows)
            if cfg.neighborhood in ("both", "out"):
                rows = np.concatenate(
                    [mu[eg.edge_dst], lab_vecs,
                     -np.ones((len(eg.edge_src), 1))], axis=1)
                np.add.at(msg, eg.edge_src, rows)
        inp = np.concatenate([x_nodes, mu, msg], axis=1)
        z = np.tanh(inp @ w1.T + b1)
        mu_new = np.tanh(z @ w2.T + b2)
        step_caches.append((mu, msg, inp, z, mu_new))
        mu = mu_new
    return _GraphCache(x_unique, lstm_steps, x_nodes, step_caches, mu)


def _graph_backward(params: ModelParams, eg: EncodedGraph, cache: _GraphCache,
                    dmu_final: np.ndarray, grads: dict[str, np.ndarray]) -> None:
    cfg = params.config
    w1, w2 = params.arrays["w1"], params.arrays["w2"]
    n = eg.n_nodes
    dmu = dmu_final
    dx_nodes = np.zeros((n, cfg.d_text))
    for mu_prev, msg, inp, z, mu_new in reversed(cache.step_caches):
        da2 = dmu * (1.0 - mu_new * mu_new)
        grads["w2"] += da2.T @ z
        grads["b2"] += da2.sum(axis=0)
        dz = da2 @ w2
        da1 = dz * (1.0 - z * z)
        grads["w1"] += da1.T @ inp
        grads["b1"] += da1.sum(axis=0)
        dinp = da1 @ w1
        dx_nodes += dinp[:, : cfg.d_text]
        dmu_prev = dinp[:, cfg.d_text: cfg.d_text + cfg.d_node].copy()
        dmsg = dinp[:, cfg.d_text + cfg.d_node:]
        if len(eg.edge_src) and n:
            if cfg.neighborhood in ("both", "in"):
                d_rows = dmsg[eg.edge_dst]
                np.add.at(dmu_prev, eg.edge_src, d_rows[:, : cfg.d_node])
                np.add.at(grads["edge_emb"], eg.edge_label,
                          d_rows[:, cfg.d_node: cfg.d_node + cfg.d_edge])
            if cfg.neighborhood in ("both", "out"):
                d_rows = dmsg[eg.edge_src]
                np.add.at(dmu_prev, eg.edge_dst, d_rows[:, : cfg.d_node])
                np.add.at(grads["edge_emb"], eg.edge_label,
                          d_rows[:, cfg.d_node: cfg.d_node + cfg.d_edge])
        dmu = dmu_prev
    # mu at t=0 is the constant zero vector; nothing flows further there.
    dx_unique = np.zeros_like(cache.x_unique)
    np.add.at(dx_unique, eg.text_index, dx_nodes)
    for u, steps in enumerate(cache.lstm_steps):
        if steps:
            _lstm_backward(params, steps, dx_unique[u], grads)


@dataclass(frozen=True)
class NodeState:
    """Final node embeddings, keyed by original node id."""

    embeddings: dict[int, np.ndarray]
    per_step: tuple[np.ndarray, ...] = ()  # (T+1, n, d_node) history, optional


def propagate(graph: KnowledgeGraph | EncodedGraph, params: ModelParams,
              keep_history: bool = False) -> NodeState:
    """Run T propagation rounds and return every node's final embedding."""
    eg = graph if isinstance(graph, EncodedGraph) else \
        encode_graph(graph, params.vocab)
    cache = _graph_forward(params, eg)
    embeddings = {node_id: cache.mu[i].copy()
                  for i, node_id in enumerate(eg.node_ids)}
    history: tuple[np.ndarray, ...] = ()
    if keep_history:
        zero = np.zeros((eg.n_nodes, params.config.d_node))
        history = (zero,) + tuple(c[4].copy() for c in cache.step_caches)
    return NodeState(embeddings=embeddings, per_step=history)


# -- scoring ---------------------------------------------------------------

@dataclass(frozen=True)
class PairScore:
    value: float
    argmax: tuple[int, int] | None  # (hypothesis node id, support node id)
    cosine: float
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class TrainingExample:
    pair: GraphPair
    label: int

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise ValueError("label must be 0 or 1")


def _cosine_matrix(mu_h: np.ndarray, mu_s: np.ndarray):
    """Cosines for all cross pairs; zero-norm vectors read as cosine 0."""
    norms_h = np.linalg.norm(mu_h, axis=1)
    norms_s = np.linalg.norm(mu_s, axis=1)
    dots = mu_h @ mu_s.T
    denom = np.outer(norms_h, norms_s)
    cos = np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0.0)
    return cos, norms_h, norms_s


def score_from_embeddings(mu_h: np.ndarray, mu_s: np.ndarray
                          ) -> tuple[float, tuple[int, int], float]:
    """Scoring on raw predicate embeddings: sigmoid(max cosine - 0.5).

    Returns (value, argmax positions, max cosine). Ties pick the lowest
    (row, column) pair.
    """
    cos, _, _ = _cosine_matrix(mu_h, mu_s)
    flat = int(np.argmax(cos))  # first maximum in row-major order
    i, j = divmod(flat, cos.shape[1])
    best = float(cos[i, j])
    return float(sigmoid(best - 0.5)), (i, j), best


def score_pair(pair: GraphPair, params: ModelParams) -> PairScore:
    """Score a hypothesis/support graph pair.

    If either side has no predicate node there is nothing to match, and the
    flagged minimum sigmoid(-1.5) is returned.
    """
    eg_h = encode_graph(pair.hypothesis_graph, params.vocab)
    eg_s = encode_graph(pair.support_graph, params.vocab)
    return _score_encoded(eg_h, eg_s, params)[0]


def _score_encoded(eg_h: EncodedGraph, eg_s: EncodedGraph, params: ModelParams):
    if len(eg_h.predicate_pos) == 0 or len(eg_s.predicate_pos) == 0:
        score = PairScore(value=float(sigmoid(FALLBACK_LOGIT)), argmax=None,
                          cosine=-1.0, flags=("empty-predicate-fallback",))
        return score, None, None
    cache_h = _graph_forward(params, eg_h)
    cache_s = _graph_forward(params, eg_s)
    mu_h = cache_h.mu[eg_h.predicate_pos]
    mu_s = cache_s.mu[eg_s.predicate_pos]
    value, (i, j), best = score_from_embeddings(mu_h, mu_s)
    argmax = (eg_h.node_ids[int(eg_h.predicate_pos[i])],
              eg_s.node_ids[int(eg_s.predicate_pos[j])])
    score = PairScore(value=value, argmax=argmax, cosine=best)
    return score, (cache_h, cache_s), (i, j)


def loss(score: PairScore, label: int) -> float:
    """Binary cross-entropy on the pair score."""
    p = score.value
    return float(-(label * np.log(p) + (1 - label) * np.log(1.0 - p)))


def gradient(example: TrainingExample, params: ModelParams,
             encoded: tuple[EncodedGraph, EncodedGraph] | None = None
             ) -> tuple[float, PairScore, dict[str, np.ndarray]]:
    """Loss, score, and exact parameter gradients for one example.

    The max over predicate pairs routes its subgradient through the argmax
    pair only; flagged (no-predicate) pairs have constant loss and a zero
    gradient.
    """
    if encoded is None:
        eg_h = encode_graph(example.pair.hypothesis_graph, params.vocab)
        eg_s = encode_graph(example.pair.support_graph, params.vocab)
    else:
        eg_h, eg_s = encoded
    score, caches, argpos = _score_encoded(eg_h, eg_s, params)
    grads = params.zeros_like()
    value = score.value
    label = example.label
    loss_value = loss(score, label)
    if caches is None:
        return loss_value, score, grads

    cache_h, cache_s = caches
    i, j = argpos
    # d loss / d logit for sigmoid + cross-entropy is (p - y).
    dlogit = value - label

    mu_h = cache_h.mu[eg_h.predicate_pos]
    mu_s = cache_s.mu[eg_s.predicate_pos]
    a = mu_h[i]
    b = mu_s[j]
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    dmu_h = np.zeros_like(cache_h.mu)
    dmu_s = np.zeros_like(cache_s.mu)
    if na > 0.0 and nb > 0.0:
        cos = float(a @ b / (na * nb))
        da = (b / (na * nb) - cos * a / (na * na)) * dlogit
        db = (a / (na * nb) - cos * b / (nb * nb)) * dlogit
        dmu_h[eg_h.predicate_pos[i]] = da
        dmu_s[eg_s.predicate_pos[j]] = db
    _graph_backward(params, eg_h, cache_h, dmu_h, grads)
    _graph_backward(params, eg_s, cache_s, dmu_s, grads)
    return loss_value, score, grads
