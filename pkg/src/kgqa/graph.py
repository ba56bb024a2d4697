"""Aggregate relation triples into contextual knowledge graphs.

Entity nodes are merged on their normalized (article-free, lemmatized) text,
which is what lets evidence from different sentences connect. Predicate nodes
are deliberately NOT merged: each triple keeps its own predicate node so that
"contain" from two different sentences keeps two distinct neighborhoods.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .lemma import Lexicon, default_lexicon, lemmatize_token
from .triples import Triple, extract_all

EDGE_LABELS = ("subj", "obj", "time", "loc")

_ARTICLES = frozenset({"a", "an", "the"})


@dataclass(frozen=True)
class Node:
    id: int
    text: str
    kind: str  # "entity" | "predicate"


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    label: str


@dataclass(frozen=True)
class KnowledgeGraph:
    nodes: tuple[Node, ...] = ()
    edges: tuple[Edge, ...] = ()
    provenance: dict[int, frozenset[str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        ids = {node.id for node in self.nodes}
        if len(ids) != len(self.nodes):
            raise ValueError("duplicate node ids")
        subj_targets = set()
        for edge in self.edges:
            if edge.src not in ids or edge.dst not in ids:
                raise ValueError(f"edge {edge} references a missing node")
            if edge.label not in EDGE_LABELS:
                raise ValueError(f"unknown edge label {edge.label!r}")
            if edge.label == "subj":
                subj_targets.add(edge.dst)
        for node in self.nodes:
            if node.kind == "predicate" and node.id not in subj_targets:
                raise ValueError(f"predicate node {node.id} has no subj edge")

    @property
    def predicate_nodes(self) -> tuple[Node, ...]:
        return tuple(n for n in self.nodes if n.kind == "predicate")

    @property
    def entity_nodes(self) -> tuple[Node, ...]:
        return tuple(n for n in self.nodes if n.kind == "entity")

    def node_by_id(self, node_id: int) -> Node:
        for node in self.nodes:
            if node.id == node_id:
                return node
        raise KeyError(node_id)

    def dump(self) -> str:
        """Plain-text listing, one node or edge per line."""
        lines = [f"node {n.id} {n.kind} {n.text}" for n in self.nodes]
        lines += [f"edge {e.src} {e.dst} {e.label}" for e in self.edges]
        return "\n".join(lines)

    def to_dot(self, name: str = "kg") -> str:
        """Graphviz rendering for eyeballing fixture graphs."""
        lines = [f"digraph {name} {{", "  rankdir=LR;"]
        for node in self.nodes:
            shape = "box" if node.kind == "predicate" else "ellipse"
            lines.append(f'  n{node.id} [label="{node.text}", shape={shape}];')
        for edge in self.edges:
            lines.append(f'  n{edge.src} -> n{edge.dst} [label="{edge.label}"];')
        lines.append("}")
        return "\n".join(lines)


def node_text(phrase: str, lexicon: Lexicon | None = None) -> str:
    """Normalize a phrase for a graph node: drop articles, lemmatize tokens."""
    lexicon = lexicon or default_lexicon()
    tokens = [lemmatize_token(tok, lexicon) for tok in phrase.split()
              if tok.lower() not in _ARTICLES]
    return " ".join(tok for tok in tokens if tok)


def _is_droppable(text: str, lexicon: Lexicon) -> bool:
    tokens = text.split()
    return not tokens or all(lexicon.is_stopword(tok) for tok in tokens)


def build_graph(triples: Sequence[Triple],
                lexicon: Lexicon | None = None) -> KnowledgeGraph:
    """Merge triples into one knowledge graph.

    Entities with identical normalized text share a node; every triple gets a
    fresh predicate node. Stop-word-only entity phrases are dropped rather
    than merged into a meaningless hub; a triple whose subject drops this way
    is skipped entirely.
    """
    lexicon = lexicon or default_lexicon()
    nodes: list[Node] = []
    edges: list[Edge] = []
    provenance: dict[int, set[str]] = {}
    entity_ids: dict[str, int] = {}

    def entity(phrase: str, source: str) -> int | None:
        text = node_text(phrase, lexicon)
        if _is_droppable(text, lexicon):
            return None
        if text not in entity_ids:
            node = Node(id=len(nodes), text=text, kind="entity")
            entity_ids[text] = node.id
            nodes.append(node)
            provenance[node.id] = set()
        node_id = entity_ids[text]
        if source:
            provenance[node_id].add(source)
        return node_id

    for triple in triples:
        source = triple.source_sentence_id
        subj_id = entity(triple.subject, source)
        if subj_id is None:
            continue
        pred_text = node_text(triple.predicate, lexicon)
        if not pred_text:
            continue
        pred = Node(id=len(nodes), text=pred_text, kind="predicate")
        nodes.append(pred)
        provenance[pred.id] = {source} if source else set()
        edges.append(Edge(src=subj_id, dst=pred.id, label="subj"))
        for obj in triple.objects:
            obj_id = entity(obj, source)
            if obj_id is not None:
                edges.append(Edge(src=pred.id, dst=obj_id, label="obj"))
        for phrase, label in ((triple.time, "time"), (triple.location, "loc")):
            if phrase is not None:
                adv_id = entity(phrase, source)
                if adv_id is not None:
                    edges.append(Edge(src=pred.id, dst=adv_id, label=label))

    return KnowledgeGraph(
        nodes=tuple(nodes), edges=tuple(edges),
        provenance={nid: frozenset(srcs) for nid, srcs in provenance.items()},
    )


@dataclass(frozen=True)
class GraphPair:
    """Paired hypothesis / support graphs for one (question, option)."""

    hypothesis_graph: KnowledgeGraph
    support_graph: KnowledgeGraph
    question_id: str = ""
    option_label: str = ""
    flags: tuple[str, ...] = ()


Extractor = Callable[[str, str], list[Triple]]


def _default_extractor(text: str, sentence_id: str) -> list[Triple]:
    return extract_all(text, sentence_id=sentence_id)


def build_pair(hypothesis, supports: Iterable, extractor: Extractor | None = None,
               lexicon: Lexicon | None = None) -> GraphPair:
    """Build the hypothesis graph and the merged support graph.

    ``supports`` is an iterable of retrieval hits (or plain (id, text)
    tuples). All support sentences feed one aggregated graph, not one graph
    per sentence. A pair whose hypothesis graph has no predicate node is
    flagged, never dropped.
    """
    extractor = extractor or _default_extractor
    lexicon = lexicon or default_lexicon()

    question_id = getattr(hypothesis, "question_id", "")
    option_label = getattr(hypothesis, "option_label", "")
    hypo_text = getattr(hypothesis, "text", hypothesis)
    hypo_graph = build_graph(extractor(hypo_text, "hypothesis"), lexicon)

    support_triples: list[Triple] = []
    for hit in supports:
        if isinstance(hit, tuple):
            sentence_id, text = hit
        else:
            sentence_id, text = hit.sentence_id, hit.text
        support_triples.extend(extractor(text, sentence_id))
    supp_graph = build_graph(support_triples, lexicon)

    flags = []
    if not hypo_graph.predicate_nodes:
        flags.append("no-hypothesis-predicate")
    if not supp_graph.predicate_nodes:
        flags.append("no-support-predicate")
    return GraphPair(hypothesis_graph=hypo_graph, support_graph=supp_graph,
                     question_id=question_id, option_label=option_label,
                     flags=tuple(flags))
