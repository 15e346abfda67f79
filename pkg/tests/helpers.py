"""Random graph builders shared by the test modules."""

from __future__ import annotations

import itertools

import numpy as np

from dtim.diversity import UnfoldState
from dtim.graph import SocialGraph
from dtim.weights import DiffusionGraph, TargetSet, manual_diffusion_graph


def random_graph(rng: np.random.Generator, n: int, m: int) -> SocialGraph:
    pairs = [(u, v) for u, v in itertools.permutations(range(n), 2)]
    m = min(m, len(pairs))
    pick = rng.choice(len(pairs), size=m, replace=False)
    return SocialGraph.from_edges(n, [pairs[i] for i in sorted(pick)])


def random_diffusion(
    rng: np.random.Generator, n: int, m: int, target_fraction: float = 0.5
) -> tuple[DiffusionGraph, TargetSet]:
    """Admissible LT weights (column sums drawn in (0.3, 1]) and random targets."""
    g = random_graph(rng, n, m)
    b = {}
    for v in range(n):
        ins = g.in_adj[v]
        if not ins:
            continue
        share = rng.dirichlet(np.ones(len(ins))) * rng.uniform(0.3, 1.0)
        for u, w in zip(ins, share):
            b[(u, v)] = float(w)
    ell = {v: float(rng.uniform(0.05, 1.0)) for v in range(n)}
    dg = manual_diffusion_graph(g, ell, b)
    count = max(1, round(target_fraction * n))
    members = frozenset(int(x) for x in rng.choice(n, size=count, replace=False))
    return dg, TargetSet(members, 0.0)


def chain(weights: list[float], ell_last: float = 1.0) -> tuple[DiffusionGraph, TargetSet]:
    """Path 0 -> 1 -> ... -> len(weights) with the last node the only target."""
    n = len(weights) + 1
    g = SocialGraph.from_edges(n, [(i, i + 1) for i in range(n - 1)])
    dg = manual_diffusion_graph(g, {n - 1: ell_last}, {(i, i + 1): w for i, w in enumerate(weights)})
    return dg, TargetSet(frozenset({n - 1}), ell_last)


def recompute(state: UnfoldState) -> tuple[set[int], dict[int, int]]:
    """Boundary and external in-degrees rebuilt from the edge set alone."""
    g = state.graph
    ext = {v: len(g.in_adj[v]) - sum(1 for (_, x) in state.dag_edges if x == v) for v in state.dag_nodes}
    return {v for v, e in ext.items() if e > 0}, ext


def random_state(rng: np.random.Generator, g: SocialGraph, steps: int) -> UnfoldState:
    t = int(rng.integers(g.node_count))
    s = UnfoldState(g, t)
    for _ in range(steps):
        frontier = [(u, v) for v in s.dag_nodes for u in g.in_adj[v] if (u, v) not in s.dag_edges]
        if not frontier:
            break
        u, v = frontier[int(rng.integers(len(frontier)))]
        s.add_edge(u, v)
    return s
