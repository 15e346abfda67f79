"""Greedy seed selection by backward simple-path enumeration (L-DTIM / G-DTIM).

Each main-loop iteration walks backward, depth first, from every target not
yet seeded, along simple paths that avoid the current seeds. A path is
extended while its probability (product of edge weights) stays >= ``eta``.
Every node reached accrues ``pp * ell(t)`` as capital. Diversity is computed
during the first iteration only and then frozen:

* local variant: ``div_t(u)`` is assigned (last visit wins) from the state
  of the unfolded graph at the moment ``u`` is reached;
* global variant: ``div_t(v)`` is computed on the fully unfolded graph.

Raw diversity is max-normalized per target over the nodes that reach it and
weighted by the node's influence on that target. The node with the largest
``alpha * C + (1 - alpha) * D`` joins the seed set; exact ties go to the
smallest node id.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterable

from .diversity import DiversityTable, UnfoldState, global_diversity, local_diversity, max_normalize
from .weights import DiffusionGraph, TargetSet

DEFAULT_ETA = 1e-4
CONVENTIONAL_ETA = 1e-3
VARIANTS = ("local", "global")


@dataclass(frozen=True)
class SelectionConfig:
    k: int
    alpha: float
    eta: float = DEFAULT_ETA
    variant: str = "global"

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")


@dataclass
class NodeAccumulator:
    capital: list[float]
    diversity: list[float]
    influence: list[float]
    # dset[v][t]: normalized diversity of v w.r.t. target t (frozen after round 1)
    dset: list[dict[int, float]]
    raw: DiversityTable = field(default_factory=DiversityTable)
    reached: set[int] = field(default_factory=set)

    @classmethod
    def zeros(cls, n: int) -> "NodeAccumulator":
        return cls([0.0] * n, [0.0] * n, [0.0] * n, [{} for _ in range(n)])

    def reset(self, seeds: set[int]) -> None:
        for v in self.reached:
            if v not in seeds:
                self.capital[v] = 0.0
                self.diversity[v] = 0.0
        self.reached = set()


@dataclass
class SeedResult:
    seeds: list[int]
    objective: list[float]
    capital: list[float]
    diversity: list[float]
    status: str = "complete"
    diversity_table: DiversityTable = field(default_factory=DiversityTable)

    def dumps(self, labels: tuple[int, ...] | None = None) -> str:
        lines = []
        for rank, (s, dic, c, d) in enumerate(zip(self.seeds, self.objective, self.capital, self.diversity), 1):
            node = labels[s] if labels else s
            lines.append(f"{rank} {node} {dic:.17g} {c:.17g} {d:.17g}\n")
        return "".join(lines)

    def save(self, path: str | os.PathLike, labels: tuple[int, ...] | None = None) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps(labels))


def backward_walk(
    dg: DiffusionGraph,
    t: int,
    seeds: set[int],
    eta: float,
    acc: NodeAccumulator,
    state: UnfoldState | None = None,
    variant: str = "global",
) -> None:
    """Enumerate simple backward paths from ``t`` and update ``acc``.

    ``state`` is given during the first iteration only; it then receives
    every explored edge and triggers influence/diversity bookkeeping.
    """
    in_adj = dg.graph.in_adj
    in_w = dg.in_weights
    ell_t = float(dg.node_weight[t])
    cap, div, inf = acc.capital, acc.diversity, acc.influence
    dset = acc.dset
    reached = acc.reached
    first = state is not None
    local = variant == "local"
    raw_t = acc.raw.raw.setdefault(t, {}) if first and local else None

    on_path = {t}
    # frames: [node, path probability, next in-neighbor position]
    stack: list[list] = [[t, 1.0, 0]]
    while stack:
        frame = stack[-1]
        v, pp, pos = frame
        nbrs = in_adj[v]
        weights = in_w[v]
        pushed = False
        while pos < len(nbrs):
            u = nbrs[pos]
            w = weights[pos]
            pos += 1
            if w <= 0.0 or u in on_path or u in seeds:
                continue
            q = pp * w
            if q < eta:
                continue
            cap[u] += q * ell_t
            reached.add(u)
            if first:
                inf[u] += q
                if local:
                    if not in_adj[u]:
                        raw_t[u] = 0.0
                    elif state.boundary_sum > 0:
                        raw_t[u] = local_diversity(state, u)
                    else:
                        raw_t.setdefault(u, 0.0)
                state.add_edge(u, v)
            else:
                div[u] += q * dset[u].get(t, 0.0)
            frame[2] = pos
            on_path.add(u)
            stack.append([u, q, 0])
            pushed = True
            break
        if not pushed:
            stack.pop()
            on_path.discard(v)


def update_diversity(t: int, state: UnfoldState, acc: NodeAccumulator, variant: str = "global") -> None:
    """Freeze diversity w.r.t. ``t`` and fold it into D, weighted by influence."""
    if variant == "global":
        raw = {v: global_diversity(state, v) for v in state.dag_nodes if v != t}
        acc.raw.raw[t] = raw
    else:
        raw = acc.raw.raw.setdefault(t, {})
    norm = max_normalize(raw)
    for v in state.dag_nodes:
        if v == t:
            continue
        x = norm.get(v, 0.0)
        acc.dset[v][t] = x
        acc.diversity[v] += acc.influence[v] * x
        acc.influence[v] = 0.0


def run_iteration(
    dg: DiffusionGraph,
    targets: Iterable[int],
    seeds: set[int],
    cfg: SelectionConfig,
    acc: NodeAccumulator,
) -> None:
    """One main-loop pass over the unseeded targets."""
    acc.reset(seeds)
    first = not seeds
    for t in targets:
        if t in seeds:
            continue
        state = UnfoldState(dg.graph, t) if first else None
        backward_walk(dg, t, seeds, cfg.eta, acc, state, cfg.variant)
        if first:
            update_diversity(t, state, acc, cfg.variant)


def first_round(dg: DiffusionGraph, ts: TargetSet, cfg: SelectionConfig) -> NodeAccumulator:
    """Accumulators after the first iteration (empty seed set)."""
    acc = NodeAccumulator.zeros(dg.n)
    run_iteration(dg, ts.sorted(), set(), cfg, acc)
    return acc


def objective(acc: NodeAccumulator, v: int, alpha: float) -> float:
    return alpha * acc.capital[v] + (1.0 - alpha) * acc.diversity[v]


def dtim_select(dg: DiffusionGraph, ts: TargetSet, cfg: SelectionConfig) -> SeedResult:
    if not ts.members:
        raise ValueError("target set is empty")
    targets = ts.sorted()
    acc = NodeAccumulator.zeros(dg.n)
    seeds: list[int] = []
    seed_set: set[int] = set()
    result = SeedResult([], [], [], [], diversity_table=acc.raw)
    while len(seeds) < cfg.k:
        if all(t in seed_set for t in targets):
            result.status = "targets-exhausted"
            break
        run_iteration(dg, targets, seed_set, cfg, acc)
        candidates = acc.reached - seed_set
        if not candidates:
            result.status = "no-candidates"
            break
        best = min(candidates, key=lambda v: (-objective(acc, v, cfg.alpha), v))
        seeds.append(best)
        seed_set.add(best)
        result.seeds.append(best)
        result.objective.append(objective(acc, best, cfg.alpha))
        result.capital.append(acc.capital[best])
        result.diversity.append(acc.diversity[best])
    return result
