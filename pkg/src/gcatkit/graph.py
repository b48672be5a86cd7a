"""Graph data model: vocabularies, triple store, weighted-graph proximity,
and n-hop neighborhood indexing with composed multi-hop relation paths.

All containers are frozen after construction and safe for shared
concurrent reads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import EmptyDatasetError, InvalidConfigError


class Triple(NamedTuple):
    """Integer-coded fact: ``relation`` points from ``head`` to ``tail``."""

    head: int
    relation: int
    tail: int


class Vocab:
    """Dense 0-based ids assigned to unique names in first-appearance order."""

    __slots__ = ("names", "_index")

    def __init__(self, names: Iterable[str] = ()):
        self.names: list[str] = []
        self._index: dict[str, int] = {}
        for name in names:
            self.add(name)

    def add(self, name: str) -> int:
        """Return the id of ``name``, assigning the next id on first sight."""
        idx = self._index.get(name)
        if idx is None:
            idx = len(self.names)
            self._index[name] = idx
            self.names.append(name)
        return idx

    def id_of(self, name: str) -> int:
        return self._index[name]

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def __len__(self) -> int:
        return len(self.names)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocab) and self.names == other.names

    def __repr__(self) -> str:
        return f"Vocab({len(self)} names)"


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected weighted graph; each edge stored once, queried symmetrically."""

    num_vertices: int
    edges: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        seen: set[tuple[int, int]] = set()
        for i, j, w in self.edges:
            if not (0 <= i < self.num_vertices and 0 <= j < self.num_vertices):
                raise IndexError(f"edge ({i}, {j}) out of range for {self.num_vertices} vertices")
            if w < 0:
                raise ValueError(f"negative edge weight {w} on ({i}, {j})")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"duplicate edge between {i} and {j}")
            seen.add(key)


def first_order_vector(g: WeightedGraph, v: int) -> np.ndarray:
    """Edge weights from ``v`` to every vertex; the ``v`` component is 0."""
    if not 0 <= v < g.num_vertices:
        raise IndexError(f"vertex {v} out of range")
    vec = np.zeros(g.num_vertices)
    for i, j, w in g.edges:
        if i == v:
            vec[j] = w
        elif j == v:
            vec[i] = w
    vec[v] = 0.0
    return vec


def second_order_proximity(g: WeightedGraph, i: int, j: int) -> Optional[float]:
    """Cosine similarity of the two first-order vectors.

    Returns None when either vertex has no edges: the quotient is undefined
    for a zero vector and 0 would wrongly claim the pair is dissimilar.
    """
    si = first_order_vector(g, i)
    sj = first_order_vector(g, j)
    ni = float(np.linalg.norm(si))
    nj = float(np.linalg.norm(sj))
    if ni == 0.0 or nj == 0.0:
        return None
    return float(si @ sj) / (ni * nj)


def demo_graph() -> WeightedGraph:
    """The nine-vertex weighted graph used by the proximity demo.

    Vertices are 0-based; the demo prints them 1-based.
    """
    edges = (
        (0, 2, 1.5),
        (0, 1, 1.2),
        (1, 2, 0.8),
        (2, 3, 0.3),
        (3, 5, 1.0),
        (3, 4, 1.5),
        (4, 5, 0.6),
        (5, 6, 0.2),
        (6, 7, 1.5),
        (6, 8, 1.0),
    )
    return WeightedGraph(9, edges)


@dataclass(frozen=True)
class KnowledgeGraph:
    entities: Vocab
    relations: Vocab
    triples: tuple[Triple, ...]
    out_adjacency: tuple[tuple[tuple[int, int], ...], ...]  # per head: (relation, tail)

    @property
    def num_entities(self) -> int:
        return len(self.entities)

    @property
    def num_relations(self) -> int:
        return len(self.relations)


def _build_adjacency(num_entities: int, triples: Sequence[Triple]):
    adj: list[list[tuple[int, int]]] = [[] for _ in range(num_entities)]
    for h, r, t in triples:
        adj[h].append((r, t))
    return tuple(tuple(a) for a in adj)


def code_triples(raw: Iterable[tuple[str, str, str]], entities: Vocab, relations: Vocab) -> list[Triple]:
    """Integer-code raw string triples, extending the vocabularies in place."""
    coded = []
    for h, r, t in raw:
        if not h or not r or not t:
            raise ValueError(f"triple with empty field: {(h, r, t)!r}")
        hid = entities.add(h)
        rid = relations.add(r)
        tid = entities.add(t)
        coded.append(Triple(hid, rid, tid))
    return coded


def assemble_graph(entities: Vocab, relations: Vocab, coded: Sequence[Triple]) -> KnowledgeGraph:
    """Deduplicate coded triples (keeping first occurrence) and index adjacency."""
    seen: set[Triple] = set()
    unique: list[Triple] = []
    for t in coded:
        if t not in seen:
            seen.add(t)
            unique.append(t)
    return KnowledgeGraph(entities, relations, tuple(unique), _build_adjacency(len(entities), unique))


def build_graph(raw_triples: Sequence[tuple[str, str, str]]) -> KnowledgeGraph:
    """Integer-code raw triples in first-appearance order and index them."""
    if not raw_triples:
        raise EmptyDatasetError("no triples given")
    entities = Vocab()
    relations = Vocab()
    coded = code_triples(raw_triples, entities, relations)
    return assemble_graph(entities, relations, coded)


@dataclass(frozen=True)
class NeighborhoodIndex:
    """Per entity: every (neighbor, relation-path) reachable within n_hop hops.

    Paths follow edge direction (head to tail). Each entity also lists
    itself with the empty path, so no neighborhood is empty. Entries are
    sorted by (neighbor, path) for deterministic downstream reductions.
    """

    n_hop: int
    entries: tuple[tuple[tuple[int, tuple[int, ...]], ...], ...]


def build_neighborhood_index(kg: KnowledgeGraph, n_hop: int) -> NeighborhoodIndex:
    if n_hop < 1:
        raise InvalidConfigError(f"n_hop must be >= 1, got {n_hop}")
    all_entries = []
    for e in range(kg.num_entities):
        found: set[tuple[int, tuple[int, ...]]] = {(e, ())}
        frontier: set[tuple[int, tuple[int, ...]]] = {(e, ())}
        for _ in range(n_hop):
            nxt: set[tuple[int, tuple[int, ...]]] = set()
            for node, path in frontier:
                for rel, tail in kg.out_adjacency[node]:
                    nxt.add((tail, path + (rel,)))
            found |= nxt
            frontier = nxt
        all_entries.append(tuple(sorted(found)))
    return NeighborhoodIndex(n_hop, tuple(all_entries))


def auxiliary_triples(index: NeighborhoodIndex) -> list[tuple[int, tuple[int, ...], int]]:
    """All multi-hop entries as (source, relation-path, neighbor) facts.

    One-hop and self entries are excluded; these are the composed paths
    that enrich sparse local structure.
    """
    out = []
    for e, entries in enumerate(index.entries):
        for neighbor, path in entries:
            if len(path) >= 2:
                out.append((e, path, neighbor))
    return out
