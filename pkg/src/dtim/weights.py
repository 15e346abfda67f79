"""Diffusion graph: node target weights, LT edge weights and target selection."""

from __future__ import annotations

import hashlib
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import AdmissibilityError, EmptyTargetSetError
from .graph import SocialGraph
from .lurkerrank import RankVector, smoothed_degrees

logger = logging.getLogger(__name__)

ADMISSIBILITY_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class DiffusionGraph:
    """Social graph with node weights ``ell`` and LT edge weights ``b``.

    ``edge_weight[i]`` belongs to ``graph.edges[i]``. An edge may carry weight
    0: it then counts for the topology (degrees, boundaries) but never
    propagates influence.
    """

    graph: SocialGraph
    node_weight: np.ndarray
    edge_weight: np.ndarray
    in_weights: tuple[tuple[float, ...], ...] = field(init=False, repr=False)
    out_weights: tuple[tuple[float, ...], ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        g = self.graph
        ins: list[list[float]] = [[] for _ in range(g.node_count)]
        outs: list[list[float]] = [[] for _ in range(g.node_count)]
        # edges are sorted by (u, v): out lists come out aligned with out_adj
        for (u, v), w in zip(g.edges, self.edge_weight.tolist()):
            outs[u].append(w)
        idx = g.edge_index()
        for v in range(g.node_count):
            ins[v] = [float(self.edge_weight[idx[(u, v)]]) for u in g.in_adj[v]]
        object.__setattr__(self, "in_weights", tuple(tuple(x) for x in ins))
        object.__setattr__(self, "out_weights", tuple(tuple(x) for x in outs))

    @property
    def n(self) -> int:
        return self.graph.node_count

    @property
    def m(self) -> int:
        return self.graph.edge_count

    def weight(self, u: int, v: int) -> float:
        return float(self.edge_weight[self.graph.edge_index()[(u, v)]])

    def column_sums(self) -> np.ndarray:
        sums = np.zeros(self.n)
        if self.m:
            dst = np.fromiter((v for _, v in self.graph.edges), dtype=np.int64, count=self.m)
            np.add.at(sums, dst, self.edge_weight)
        return sums

    def content_hash(self) -> str:
        return hashlib.sha256(dumps_diffusion_graph(self).encode()).hexdigest()


@dataclass(frozen=True)
class TargetSet:
    members: frozenset[int]
    threshold_used: float
    percentage_used: float | None = None

    def __contains__(self, v: object) -> bool:
        return v in self.members

    def __len__(self) -> int:
        return len(self.members)

    def sorted(self) -> list[int]:
        return sorted(self.members)


def default_epsilon_r(max_r: float) -> float:
    """Smoothing constant: one hundredth of the order of magnitude of ``max_r``."""
    return 10.0 ** math.floor(math.log10(max_r)) * 1e-2


def node_weights(ranks: RankVector | np.ndarray, epsilon_r: float | None = None) -> np.ndarray:
    """Scale and min-max normalize rank scores into target weights in [0, 1)."""
    pi = np.asarray(getattr(ranks, "scores", ranks), dtype=float)
    if pi.size == 0:
        raise ValueError("ranks must be nonempty")
    if np.any(pi <= 0):
        raise ValueError("rank scores must be strictly positive")
    scaled = pi / 10.0 ** math.floor(math.log10(pi.min()))
    min_r, max_r = float(scaled.min()), float(scaled.max())
    if max_r == min_r:
        logger.warning("all rank scores are equal; every node weight is 0")
        return np.zeros_like(scaled)
    eps = default_epsilon_r(max_r) if epsilon_r is None else float(epsilon_r)
    return (scaled - min_r) / ((max_r - min_r) + eps)


def edge_weights(g: SocialGraph, ranks: RankVector | np.ndarray, ell: np.ndarray) -> np.ndarray:
    """b(u,v) = b0(u,v) * exp(ell(v) - 1), with b0 the share of v's in-flow from u.

    b0(u,v) is proportional to out(u)/in(u) * pi(u) over v's in-neighbors,
    using add-one smoothed degrees.
    """
    pi = np.asarray(getattr(ranks, "scores", ranks), dtype=float)
    if not g.edges:
        return np.zeros(0)
    in_s, out_s = smoothed_degrees(g)
    contrib = out_s / in_s * pi
    src, dst = np.array(g.edges, dtype=np.int64).T
    col = np.zeros(g.node_count)
    np.add.at(col, dst, contrib[src])
    b0 = contrib[src] / col[dst]
    return b0 * np.exp(np.asarray(ell, dtype=float)[dst] - 1.0)


def build_diffusion_graph(
    g: SocialGraph, ranks: RankVector | np.ndarray, epsilon_r: float | None = None
) -> DiffusionGraph:
    ell = node_weights(ranks, epsilon_r)
    return DiffusionGraph(g, ell, edge_weights(g, ranks, ell))


def manual_diffusion_graph(
    g: SocialGraph,
    ell: Mapping[int, float] | np.ndarray | list[float],
    b: Mapping[tuple[int, int], float] | np.ndarray,
) -> DiffusionGraph:
    """Wrap explicit weights; edges absent from a mapping ``b`` get weight 0."""
    if isinstance(ell, Mapping):
        node_w = np.zeros(g.node_count)
        for v, w in ell.items():
            node_w[v] = w
    else:
        node_w = np.asarray(ell, dtype=float).copy()
    if node_w.shape != (g.node_count,):
        raise ValueError("need one node weight per node")
    if np.any((node_w < 0) | (node_w > 1)):
        raise ValueError("node weights must lie in [0, 1]")

    if isinstance(b, Mapping):
        idx = g.edge_index()
        edge_w = np.zeros(g.edge_count)
        for e, w in b.items():
            if e not in idx:
                raise ValueError(f"weight given for missing edge {e}")
            edge_w[idx[e]] = w
    else:
        edge_w = np.asarray(b, dtype=float).copy()
    if edge_w.shape != (g.edge_count,):
        raise ValueError("need one edge weight per edge")
    if np.any((edge_w < 0) | (edge_w > 1)):
        raise ValueError("edge weights must lie in [0, 1]")

    dg = DiffusionGraph(g, node_w, edge_w)
    sums = dg.column_sums()
    bad = np.flatnonzero(sums > 1.0 + ADMISSIBILITY_SLACK)
    if bad.size:
        raise AdmissibilityError(int(bad[0]), float(sums[bad[0]]))
    return dg


def select_targets(
    ell: np.ndarray, *, threshold: float | None = None, percentage: float | None = None
) -> TargetSet:
    """Targets are the nodes with ``ell >= threshold``.

    With ``percentage`` the threshold is the weight of the node ranked at the
    top ``percentage`` percent; every node tied at that value is kept.
    """
    ell = np.asarray(ell, dtype=float)
    if (threshold is None) == (percentage is None):
        raise ValueError("give exactly one of threshold or percentage")
    if percentage is not None:
        if not 0.0 < percentage <= 100.0:
            raise ValueError("percentage must lie in (0, 100]")
        count = max(1, math.ceil(percentage * len(ell) / 100.0 - 1e-9))
        threshold = float(np.sort(ell)[::-1][count - 1])
    members = frozenset(int(v) for v in np.flatnonzero(ell >= threshold))
    if not members:
        raise EmptyTargetSetError(f"no node has weight >= {threshold}")
    return TargetSet(members, float(threshold), percentage)


def dumps_diffusion_graph(dg: DiffusionGraph) -> str:
    lab = dg.graph.labels
    lines = [f"{dg.n} {dg.m}\n"]
    lines += [f"{lab[u]} {lab[v]} {w:.17g}\n" for (u, v), w in zip(dg.graph.edges, dg.edge_weight.tolist())]
    lines += [f"{lab[v]} {w:.17g}\n" for v, w in enumerate(dg.node_weight.tolist())]
    return "".join(lines)


def save_diffusion_graph(dg: DiffusionGraph, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_diffusion_graph(dg))


def loads_diffusion_graph(text: str) -> DiffusionGraph:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    n, m = (int(x) for x in rows[0])
    edge_rows, node_rows = rows[1 : 1 + m], rows[1 + m : 1 + m + n]
    if len(node_rows) != n:
        raise ValueError("diffusion graph file is truncated")
    labels = [int(r[0]) for r in node_rows]
    remap = {lab: i for i, lab in enumerate(labels)}
    edges = [(remap[int(r[0])], remap[int(r[1])]) for r in edge_rows]
    g = SocialGraph.from_edges(n, edges, labels)
    idx = g.edge_index()
    edge_w = np.zeros(m)
    for (u, v), r in zip(edges, edge_rows):
        edge_w[idx[(u, v)]] = float(r[2])
    node_w = np.array([float(r[1]) for r in node_rows])
    return DiffusionGraph(g, node_w, edge_w)


def load_diffusion_graph(path: str | os.PathLike) -> DiffusionGraph:
    with open(path, encoding="utf-8") as fh:
        return loads_diffusion_graph(fh.read())
