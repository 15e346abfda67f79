"""Immutable directed social graph, edge-list I/O and centrality statistics.

Edge ``(u, v)`` means that ``v`` consumes (receives) information from ``u``,
which is also the direction of influence in the diffusion model.
"""

from __future__ import annotations

import hashlib
import io
import logging
import os
import re
from collections import deque
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence, Union

from .errors import EmptyGraphError, ParseError

logger = logging.getLogger(__name__)

Source = Union[str, os.PathLike, bytes, IO[bytes], IO[str]]

_SPLIT = re.compile(r"[\s,]+")


@dataclass(frozen=True)
class DropCounts:
    duplicates: int = 0
    self_loops: int = 0


@dataclass(frozen=True)
class SocialGraph:
    """Directed graph over dense ids ``0..n-1``.

    ``labels[i]`` is the original id of node ``i``. Adjacency tuples are
    sorted ascending, which fixes every traversal order downstream.
    """

    node_count: int
    edges: tuple[tuple[int, int], ...]
    in_adj: tuple[tuple[int, ...], ...]
    out_adj: tuple[tuple[int, ...], ...]
    labels: tuple[int, ...]
    dropped: DropCounts = field(default=DropCounts(), compare=False)

    @classmethod
    def from_edges(
        cls,
        node_count: int,
        edges: Iterable[tuple[int, int]],
        labels: Sequence[int] | None = None,
    ) -> "SocialGraph":
        edge_set: set[tuple[int, int]] = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if not (0 <= u < node_count and 0 <= v < node_count):
                raise ValueError(f"edge ({u}, {v}) out of range for {node_count} nodes")
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if (u, v) in edge_set:
                raise ValueError(f"duplicate edge ({u}, {v})")
            edge_set.add((u, v))
        ordered = tuple(sorted(edge_set))
        ins: list[list[int]] = [[] for _ in range(node_count)]
        outs: list[list[int]] = [[] for _ in range(node_count)]
        for u, v in ordered:
            outs[u].append(v)
            ins[v].append(u)
        if labels is None:
            labels = range(node_count)
        labels = tuple(int(x) for x in labels)
        if len(labels) != node_count:
            raise ValueError("labels must have one entry per node")
        return cls(
            node_count=node_count,
            edges=ordered,
            in_adj=tuple(tuple(sorted(x)) for x in ins),
            out_adj=tuple(tuple(x) for x in outs),
            labels=labels,
        )

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def in_degree(self, v: int) -> int:
        return len(self.in_adj[v])

    def out_degree(self, v: int) -> int:
        return len(self.out_adj[v])

    def index_of(self, label: int) -> int:
        try:
            return self._label_index()[label]
        except KeyError:
            raise KeyError(f"unknown node label {label}") from None

    def _label_index(self) -> dict[int, int]:
        cached = self.__dict__.get("_label_cache")
        if cached is None:
            cached = {lab: i for i, lab in enumerate(self.labels)}
            object.__setattr__(self, "_label_cache", cached)
        return cached

    def edge_index(self) -> dict[tuple[int, int], int]:
        cached = self.__dict__.get("_edge_cache")
        if cached is None:
            cached = {e: i for i, e in enumerate(self.edges)}
            object.__setattr__(self, "_edge_cache", cached)
        return cached

    def content_hash(self) -> str:
        return hashlib.sha256(dumps_edge_list(self).encode()).hexdigest()


def _read_text(source: Source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            return fh.read().decode("utf-8")
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def load_edge_list(source: Source) -> SocialGraph:
    """Parse a two-column edge list (whitespace or comma separated).

    Lines starting with ``#`` and blank lines are skipped. Original ids are
    remapped to ``0..n-1`` in ascending order of original id. Duplicate edges
    and self-loops are dropped; their counts end up in ``graph.dropped``.
    """
    text = _read_text(source)
    raw: list[tuple[int, int]] = []
    for lineno, line in enumerate(io.StringIO(text), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = [p for p in _SPLIT.split(stripped) if p]
        if len(parts) != 2:
            raise ParseError(lineno, f"expected two ids, got {stripped!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(lineno, f"non-integer id in {stripped!r}") from None
        if u < 0 or v < 0:
            raise ParseError(lineno, "ids must be nonnegative")
        raw.append((u, v))
    if not raw:
        raise EmptyGraphError("edge list contains no edges")

    seen: set[tuple[int, int]] = set()
    dup = loops = 0
    kept: list[tuple[int, int]] = []
    for u, v in raw:
        if u == v:
            loops += 1
            continue
        if (u, v) in seen:
            dup += 1
            continue
        seen.add((u, v))
        kept.append((u, v))
    if not kept:
        raise EmptyGraphError("edge list contains only self-loops")
    if dup or loops:
        logger.warning("dropped %d duplicate edges and %d self-loops", dup, loops)

    labels = sorted({x for e in kept for x in e})
    remap = {lab: i for i, lab in enumerate(labels)}
    g = SocialGraph.from_edges(len(labels), ((remap[u], remap[v]) for u, v in kept), labels)
    object.__setattr__(g, "dropped", DropCounts(duplicates=dup, self_loops=loops))
    return g


def dumps_edge_list(g: SocialGraph) -> str:
    lab = g.labels
    return "".join(f"{lab[u]} {lab[v]}\n" for u, v in g.edges)


def save_edge_list(g: SocialGraph, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_edge_list(g))


@dataclass(frozen=True)
class CentralityStats:
    outdegree: tuple[int, ...]
    betweenness: tuple[float, ...]
    coreness: tuple[int, ...]


def betweenness(g: SocialGraph) -> list[float]:
    """Exact directed betweenness (Brandes accumulation, unnormalized)."""
    n = g.node_count
    bc = [0.0] * n
    out_adj = g.out_adj
    for s in range(n):
        stack: list[int] = []
        preds: list[list[int]] = [[] for _ in range(n)]
        sigma = [0] * n
        dist = [-1] * n
        sigma[s] = 1
        dist[s] = 0
        queue = deque([s])
        while queue:
            v = queue.popleft()
            stack.append(v)
            for w in out_adj[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = [0.0] * n
        while stack:
            w = stack.pop()
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != s:
                bc[w] += delta[w]
    return bc


def coreness(g: SocialGraph) -> list[int]:
    """Core number of each node on the undirected projection (degree peeling)."""
    n = g.node_count
    nbrs = [set(g.in_adj[v]) | set(g.out_adj[v]) for v in range(n)]
    deg = [len(x) for x in nbrs]
    core = [0] * n
    removed = [False] * n
    buckets: dict[int, set[int]] = {}
    for v, d in enumerate(deg):
        buckets.setdefault(d, set()).add(v)
    k = 0
    for _ in range(n):
        d = min(b for b, members in buckets.items() if members)
        k = max(k, d)
        v = min(buckets[d])
        buckets[d].discard(v)
        removed[v] = True
        core[v] = k
        for w in nbrs[v]:
            if not removed[w]:
                buckets[deg[w]].discard(w)
                deg[w] -= 1
                buckets.setdefault(deg[w], set()).add(w)
    return core


def centrality_stats(g: SocialGraph) -> CentralityStats:
    return CentralityStats(
        outdegree=tuple(len(x) for x in g.out_adj),
        betweenness=tuple(betweenness(g)),
        coreness=tuple(coreness(g)),
    )
