"""Linear Threshold capital: Monte Carlo estimate and exact live-edge oracle."""

from __future__ import annotations

import itertools
import math
import os
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import EnumerationTooLargeError
from .streams import uniform_rows
from .weights import DiffusionGraph, TargetSet

DEFAULT_RUNS = 10_000
MAX_WORLDS = 10**6
_CHUNK_ROWS = 512


@dataclass(frozen=True)
class SimulationReport:
    capital_estimate: float
    capital_std_error: float
    runs: int
    activation_probability: np.ndarray
    rng_seed: int

    def dumps(self, labels: tuple[int, ...] | None = None) -> str:
        lines = [
            f"# capital {self.capital_estimate:.17g}\n",
            f"# std_error {self.capital_std_error:.17g}\n",
            f"# runs {self.runs}\n",
            f"# rng_seed {self.rng_seed}\n",
        ]
        for v, p in enumerate(self.activation_probability.tolist()):
            lines.append(f"{labels[v] if labels else v} {p:.17g}\n")
        return "".join(lines)


def _simulate_runs(
    dg: DiffusionGraph, seeds: list[int], targets: frozenset[int], start: int, stop: int, rng_seed: int
) -> tuple[list[float], np.ndarray]:
    n = dg.n
    out_adj = dg.graph.out_adj
    out_w = dg.out_weights
    ell = dg.node_weight.tolist()
    capital: list[float] = []
    counts = np.zeros(n, dtype=np.int64)
    for chunk_start in range(start, stop, _CHUNK_ROWS):
        rows = min(_CHUNK_ROWS, stop - chunk_start)
        draws = uniform_rows(rng_seed, chunk_start, rows, n).tolist()
        for row in draws:
            pos = 0
            active = set(seeds)
            received: dict[int, float] = {}
            theta: dict[int, float] = {}
            queue = deque(seeds)
            cap = 0.0
            while queue:
                u = queue.popleft()
                for v, w in zip(out_adj[u], out_w[u]):
                    if v in active:
                        continue
                    x = received.get(v, 0.0) + w
                    received[v] = x
                    th = theta.get(v)
                    if th is None:
                        # threshold drawn on first contact
                        th = row[pos]
                        pos += 1
                        theta[v] = th
                    if x >= th:
                        active.add(v)
                        queue.append(v)
                        if v in targets:
                            cap += ell[v]
            capital.append(cap)
            if active:
                counts[list(active)] += 1
    return capital, counts


def estimate_capital(
    dg: DiffusionGraph,
    seeds: Iterable[int],
    ts: TargetSet,
    runs: int = DEFAULT_RUNS,
    rng_seed: int = 0,
    workers: int = 1,
) -> SimulationReport:
    """Mean capital of activated, unseeded targets over ``runs`` LT cascades.

    Run ``r`` draws its node thresholds from its own substream, so the
    report is identical for any ``workers`` count.
    """
    if runs < 1:
        raise ValueError("runs must be at least 1")
    seed_list = sorted(set(int(s) for s in seeds))
    if any(not 0 <= s < dg.n for s in seed_list):
        raise ValueError("seed outside the graph")
    targets = frozenset(ts.members) - frozenset(seed_list)

    if workers > 1 and runs >= 2 * workers:
        bounds = np.linspace(0, runs, workers + 1).astype(int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(
                pool.map(
                    _simulate_runs,
                    itertools.repeat(dg),
                    itertools.repeat(seed_list),
                    itertools.repeat(targets),
                    bounds[:-1].tolist(),
                    bounds[1:].tolist(),
                    itertools.repeat(rng_seed),
                )
            )
        capital = [c for part, _ in parts for c in part]
        counts = sum((cnt for _, cnt in parts), np.zeros(dg.n, dtype=np.int64))
    else:
        capital, counts = _simulate_runs(dg, seed_list, targets, 0, runs, rng_seed)

    values = np.asarray(capital)
    std_error = float(values.std(ddof=1) / math.sqrt(runs)) if runs > 1 else 0.0
    return SimulationReport(
        capital_estimate=float(values.mean()),
        capital_std_error=std_error,
        runs=runs,
        activation_probability=counts / runs,
        rng_seed=rng_seed,
    )


def _options(dg: DiffusionGraph) -> list[list[tuple[int | None, float]]]:
    """Per node: live in-edge choices (parent, probability); None = no live edge."""
    opts = []
    for v in range(dg.n):
        choices = [(u, w) for u, w in zip(dg.graph.in_adj[v], dg.in_weights[v]) if w > 0]
        rest = 1.0 - sum(w for _, w in choices)
        if rest > 1e-15 or not choices:
            choices.insert(0, (None, max(rest, 0.0)))
        opts.append(choices)
    return opts


def world_count(dg: DiffusionGraph) -> int:
    return math.prod(len(c) for c in _options(dg))


def ancestor_chain_weights(dg: DiffusionGraph, nodes: Iterable[int]) -> dict[int, dict[int, float]]:
    """For each node ``v``: bitmask of its live-edge ancestor chain -> probability.

    In a live-edge world every node keeps at most one in-edge, so the nodes
    that reach ``v`` form a single backward chain. ``v`` is activated by ``S``
    iff ``S`` intersects that chain.
    """
    opts = _options(dg)
    worlds = math.prod(len(c) for c in opts)
    if worlds > MAX_WORLDS:
        raise EnumerationTooLargeError(f"{worlds} live-edge worlds exceed the limit of {MAX_WORLDS}")
    nodes = list(nodes)
    table: dict[int, dict[int, float]] = {v: {} for v in nodes}
    for world in itertools.product(*opts):
        prob = 1.0
        for _, p in world:
            prob *= p
        if prob == 0.0:
            continue
        for v in nodes:
            mask = 0
            x: int | None = v
            while x is not None and not (mask >> x) & 1:
                mask |= 1 << x
                x = world[x][0]
            bucket = table[v]
            bucket[mask] = bucket.get(mask, 0.0) + prob
    return table


def exact_capital(dg: DiffusionGraph, seeds: Iterable[int], ts: TargetSet) -> float:
    """Expected capital by enumerating every live-edge world."""
    seed_set = set(int(s) for s in seeds)
    smask = sum(1 << s for s in seed_set)
    targets = sorted(set(ts.members) - seed_set)
    if not targets or not smask:
        return 0.0
    chains = ancestor_chain_weights(dg, targets)
    total = 0.0
    for v in targets:
        reach = sum(p for mask, p in chains[v].items() if mask & smask)
        total += float(dg.node_weight[v]) * reach
    return total


def exact_capital_table(dg: DiffusionGraph, ts: TargetSet) -> np.ndarray:
    """Exact capital of every seed set, indexed by bitmask (small graphs only)."""
    n = dg.n
    if n > 20:
        raise EnumerationTooLargeError("subset table limited to 20 nodes")
    masks = np.arange(1 << n, dtype=np.int64)
    targets = ts.sorted()
    chains = ancestor_chain_weights(dg, targets)
    table = np.zeros(1 << n)
    for v in targets:
        reach = np.zeros(1 << n)
        for mask, p in chains[v].items():
            reach += p * ((masks & mask) != 0)
        not_seeded = ((masks >> v) & 1) == 0
        table += float(dg.node_weight[v]) * reach * not_seeded
    return table


def default_workers() -> int:
    return os.cpu_count() or 1
