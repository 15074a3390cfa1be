"""Derive (instance, optimal algorithm) knowledge from experience records.

For each dataset instance, the best algorithms reported across papers form
the candidate set. Each record contributes directed winner->loser edges
between candidates, weighted by the reporting paper's reliability rank.
Transitively implied relations are added with widest-path bottleneck weights
(the maximum over paths of the minimum edge weight along the path), mutual
contradictions are resolved in favour of the strictly heavier edge (equal
weights cancel), and the candidate with in-degree zero and the richest
comparison evidence is elected as the instance's optimal algorithm.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .experience_store import ExperienceRecord, ExperienceStore, ReliabilityRank


@dataclass(frozen=True, order=True)
class RelationEdge:
    """Directed performance relation: winner outperformed loser."""

    winner: str
    loser: str
    weight: int

    def __post_init__(self):
        if self.winner == self.loser:
            raise ValueError(f"self-relation on {self.winner!r}")
        if self.weight < 0:
            raise ValueError("edge weight must be non-negative")


@dataclass(frozen=True)
class PerformanceGraph:
    """Directed relation graph over the optimal-algorithm candidates."""

    nodes: frozenset[str]
    edges: frozenset[RelationEdge]

    def weight_map(self) -> dict[tuple[str, str], int]:
        return {(e.winner, e.loser): e.weight for e in self.edges}

    def successors(self, node: str) -> tuple[str, ...]:
        return tuple(sorted(e.loser for e in self.edges if e.winner == node))

    def in_degree(self, node: str) -> int:
        return sum(1 for e in self.edges if e.loser == node)


@dataclass(frozen=True)
class KnowledgePair:
    """Derived ground truth: the elected optimal algorithm for one instance."""

    instance_id: str
    optimal_algorithm: str
    support_count: int


def direct_relations(records: Sequence[ExperienceRecord], rank: ReliabilityRank) -> frozenset[RelationEdge]:
    """Extract direct winner->loser edges among the candidate set.

    Candidates are the best algorithms across the records. An edge A->B exists
    when some record has A best and B among its (candidate) inferiors; its
    weight is the maximum reliability rank over all supporting papers.
    """
    instances = {r.instance_id for r in records}
    if len(instances) > 1:
        raise ValueError(f"records span multiple instances: {sorted(instances)}")
    candidates = {r.best_algorithm for r in records}
    weights: dict[tuple[str, str], int] = {}
    for record in records:
        w = rank.rank_of(record.paper_id)
        for loser in record.other_algorithms:
            if loser not in candidates:
                continue
            key = (record.best_algorithm, loser)
            if key not in weights or w > weights[key]:
                weights[key] = w
    return frozenset(RelationEdge(a, b, w) for (a, b), w in weights.items())


def build_graph(nodes: Iterable[str], edges: Iterable[RelationEdge]) -> PerformanceGraph:
    return PerformanceGraph(nodes=frozenset(nodes), edges=frozenset(edges))


def transitive_closure(graph: PerformanceGraph) -> PerformanceGraph:
    """Add every implied relation with its widest-path bottleneck weight.

    For each ordered reachable pair (A, B) the closure edge carries
    max over paths A->..->B of the minimum edge weight along the path; a
    direct edge is the single-hop special case. Computed by Floyd-Warshall
    relaxation, which is order-independent.
    """
    nodes = sorted(graph.nodes)
    width = {(a, b): -1 for a in nodes for b in nodes}
    for e in graph.edges:
        width[(e.winner, e.loser)] = max(width[(e.winner, e.loser)], e.weight)
    for k in nodes:
        for i in nodes:
            wik = width[(i, k)]
            if wik < 0 or i == k:
                continue
            for j in nodes:
                if j == i or j == k:
                    continue
                through = min(wik, width[(k, j)])
                if through > width[(i, j)]:
                    width[(i, j)] = through
    edges = frozenset(
        RelationEdge(a, b, w) for (a, b), w in width.items() if w >= 0 and a != b
    )
    return PerformanceGraph(nodes=graph.nodes, edges=edges)


def resolve_conflicts(graph: PerformanceGraph) -> PerformanceGraph:
    """Drop the lighter edge of each mutual pair; equal weights drop both."""
    weights = graph.weight_map()
    kept = []
    for (a, b), w in weights.items():
        opposite = weights.get((b, a))
        if opposite is None or w > opposite:
            kept.append(RelationEdge(a, b, w))
    return PerformanceGraph(nodes=graph.nodes, edges=frozenset(kept))


def _reachable(graph: PerformanceGraph, start: str) -> set[str]:
    seen = {start}
    frontier = [start]
    while frontier:
        node = frontier.pop()
        for nxt in graph.successors(node):
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return seen


def elect_optimal(
    graph: PerformanceGraph,
    records: Sequence[ExperienceRecord],
    min_algorithms: int = 5,
) -> KnowledgePair | None:
    """Elect the optimal algorithm from a conflict-free relation graph.

    Returns None (skip) when the records mention at most ``min_algorithms``
    distinct algorithms, or when no candidate has in-degree zero (evidence is
    fully cyclic). Candidates are scored by the number of distinct algorithms
    beaten by any best algorithm reachable from them (the candidate included);
    ties break by name.
    """
    mentioned = {r.best_algorithm for r in records}
    for r in records:
        mentioned.update(r.other_algorithms)
    if len(mentioned) <= min_algorithms:
        return None

    sources = sorted(n for n in graph.nodes if graph.in_degree(n) == 0)
    if not sources:
        return None

    best_name = None
    best_score = -1
    for candidate in sources:
        reachable = _reachable(graph, candidate)
        beaten: set[str] = set()
        for record in records:
            if record.best_algorithm in reachable:
                beaten.update(record.other_algorithms)
        score = len(beaten)
        if score > best_score:
            best_name, best_score = candidate, score
    instance_id = records[0].instance_id
    return KnowledgePair(instance_id=instance_id, optimal_algorithm=best_name, support_count=best_score)


def acquire_knowledge(store: ExperienceStore, min_algorithms: int = 5) -> tuple[KnowledgePair, ...]:
    """Run the full acquisition over every instance in the store."""
    if not store.records:
        return ()
    rank = store.rank()
    pairs = []
    for instance_id in store.instances():
        records = store.records_for(instance_id)
        edges = direct_relations(records, rank)
        graph = build_graph({r.best_algorithm for r in records}, edges)
        graph = resolve_conflicts(transitive_closure(graph))
        pair = elect_optimal(graph, records, min_algorithms=min_algorithms)
        if pair is not None:
            pairs.append(pair)
    return tuple(pairs)
