"""Topology-driven diversity of nodes w.r.t. a target.

An :class:`UnfoldState` is the part of the graph unfolded backward from a
target ``t``: nodes ``V_t``, edges ``E_t`` and the boundary ``B_t`` of nodes
that still have in-edges outside ``E_t``. Local diversity scores a node
against the current state before inserting it; global diversity scores the
boundary of a fully unfolded state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import DegenerateDiversityError
from .graph import SocialGraph


class UnfoldState:
    def __init__(self, graph: SocialGraph, target: int):
        self.graph = graph
        self.target = target
        self.dag_nodes: set[int] = {target}
        self.dag_edges: set[tuple[int, int]] = set()
        self._external = {target: len(graph.in_adj[target])}
        self._out_span: dict[int, int] = {}
        self.boundary: set[int] = {target} if self._external[target] else set()
        self.boundary_sum = self._external[target]

    def external_in_degree(self, v: int) -> int:
        """|N^in(v)| minus the in-edges of v already in E_t."""
        ext = self._external.get(v)
        return len(self.graph.in_adj[v]) if ext is None else ext

    def internal_out_degree(self, v: int) -> int:
        return self._out_span.get(v, 0)

    @property
    def boundary_external_indegree(self) -> dict[int, int]:
        return {v: self._external[v] for v in self.boundary}

    def add_edge(self, u: int, v: int) -> None:
        """Insert edge (u, v) into E_t; ``v`` must already be unfolded."""
        if v not in self.dag_nodes:
            raise ValueError(f"node {v} is not part of the unfolded graph")
        if (u, v) in self.dag_edges:
            return
        self.dag_edges.add((u, v))
        if u not in self.dag_nodes:
            self.dag_nodes.add(u)
            ext_u = len(self.graph.in_adj[u])
            self._external[u] = ext_u
            if ext_u:
                self.boundary.add(u)
                self.boundary_sum += ext_u
        self._external[v] -= 1
        self.boundary_sum -= 1
        if self._external[v] == 0:
            self.boundary.discard(v)
        self._out_span[u] = self._out_span.get(u, 0) + 1


def boundary_diversity(state: UnfoldState) -> float:
    """Mean external in-degree over the boundary set."""
    if not state.boundary:
        raise DegenerateDiversityError("boundary set is empty")
    return state.boundary_sum / len(state.boundary)


def incremental_boundary_diversity(state: UnfoldState, u: int) -> float:
    """Boundary diversity after adding ``u`` to the boundary (state untouched)."""
    if u in state.boundary:
        raise ValueError(f"node {u} is already on the boundary")
    size = len(state.boundary)
    return (state.boundary_sum + state.external_in_degree(u)) / (size + 1)


def local_diversity(state: UnfoldState, u: int) -> float:
    """Ratio of the boundary diversity with ``u`` included to the current one."""
    if state.boundary_sum == 0:
        raise DegenerateDiversityError("boundary has no external in-edges")
    size = len(state.boundary)
    return size / (1.0 + size) * (1.0 + state.external_in_degree(u) / state.boundary_sum)


def global_diversity(state: UnfoldState, v: int) -> float:
    """Boundary share of ``v`` times log(1 + internal out-span / |B_t|); 0 off-boundary."""
    if v not in state.boundary:
        return 0.0
    size = len(state.boundary)
    return state.external_in_degree(v) / size * math.log1p(state.internal_out_degree(v) / size)


def max_normalize(values: Mapping[int, float]) -> dict[int, float]:
    top = max(values.values(), default=0.0)
    if top <= 0:
        return {k: 0.0 for k in values}
    return {k: x / top for k, x in values.items()}


@dataclass
class DiversityTable:
    """Raw diversity per target: ``raw[t][node]``, normalized per target."""

    raw: dict[int, dict[int, float]] = field(default_factory=dict)

    def normalized(self) -> dict[int, dict[int, float]]:
        return {t: max_normalize(vals) for t, vals in self.raw.items()}

    def rows(self) -> Iterable[tuple[int, int, float, float]]:
        norm = self.normalized()
        for t in sorted(self.raw):
            for v in sorted(self.raw[t]):
                yield v, t, self.raw[t][v], norm[t][v]

    def dumps(self, labels: tuple[int, ...] | None = None) -> str:
        lab = labels or None
        out = []
        for v, t, r, x in self.rows():
            if lab is not None:
                v, t = lab[v], lab[t]
            out.append(f"{v} {t} {r:.17g} {x:.17g}\n")
        return "".join(out)


def set_diversity(seeds: Iterable[int], div: Mapping[int, Mapping[int, float]]) -> float:
    """D(S): sum over seeds and targets of per-target node diversity ``div[t][s]``."""
    seeds = set(seeds)
    return sum(vals.get(s, 0.0) for vals in div.values() for s in seeds)
