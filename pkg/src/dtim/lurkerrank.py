"""In-out-neighbors-driven LurkerRank by power iteration."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConvergenceError, EmptyGraphError
from .graph import SocialGraph

DEFAULT_DAMPING = 0.85
DEFAULT_TOLERANCE = 1e-9
DEFAULT_MAX_ITERATIONS = 200


@dataclass(frozen=True)
class RankVector:
    scores: np.ndarray
    iterations_used: int
    residual: float


def smoothed_degrees(g: SocialGraph) -> tuple[np.ndarray, np.ndarray]:
    """Laplace add-one smoothed in- and out-degree arrays."""
    indeg = np.fromiter((len(x) for x in g.in_adj), dtype=float, count=g.node_count)
    outdeg = np.fromiter((len(x) for x in g.out_adj), dtype=float, count=g.node_count)
    return indeg + 1.0, outdeg + 1.0


def _adjacency(g: SocialGraph) -> sp.csr_matrix:
    # A[u, v] = 1 for every edge (u, v)
    n = g.node_count
    if not g.edges:
        return sp.csr_matrix((n, n))
    src, dst = np.array(g.edges, dtype=np.int64).T
    return sp.csr_matrix((np.ones(len(src)), (src, dst)), shape=(n, n))


def lurker_rank(
    g: SocialGraph,
    damping: float = DEFAULT_DAMPING,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> RankVector:
    """Iterate LR(v) = d * Lin(v) * (1 + Lout(v)) + (1 - d) / n to a fixed point.

    Lin(v) = 1/out(v) * sum_{u in Nin(v)} out(u)/in(u) * LR(u)
    Lout(v) = in(v) / sum_{u in Nout(v)} in(u) * sum_{u in Nout(v)} in(u)/out(u) * LR(u)

    All in/out counts are add-one smoothed; Lout is 0 for nodes without
    out-neighbors. Scores are L1-normalized after each sweep and the loop
    stops once the L1 change falls to ``tolerance``.
    """
    n = g.node_count
    if n == 0:
        raise EmptyGraphError("cannot rank an empty graph")
    if not 0.0 <= damping <= 1.0:
        raise ValueError("damping must lie in [0, 1]")
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")

    in_s, out_s = smoothed_degrees(g)
    a = _adjacency(g)
    at = a.T.tocsr()
    out_in_sum = a @ in_s
    has_out = out_in_sum > 0
    lout_scale = np.zeros(n)
    lout_scale[has_out] = in_s[has_out] / out_in_sum[has_out]

    lr = np.full(n, 1.0 / n)
    teleport = (1.0 - damping) / n
    residual = float("inf")
    for it in range(1, max_iterations + 1):
        l_in = (at @ (out_s / in_s * lr)) / out_s
        l_out = lout_scale * (a @ (in_s / out_s * lr))
        nxt = damping * l_in * (1.0 + l_out) + teleport
        nxt /= nxt.sum()
        residual = float(np.abs(nxt - lr).sum())
        lr = nxt
        if residual <= tolerance:
            return RankVector(scores=lr, iterations_used=it, residual=residual)
    raise ConvergenceError(f"LurkerRank did not converge in {max_iterations} iterations", residual)


def dumps_ranks(g: SocialGraph, ranks: RankVector) -> str:
    return "".join(f"{g.labels[i]} {s:.17g}\n" for i, s in enumerate(ranks.scores))


def save_ranks(g: SocialGraph, ranks: RankVector, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_ranks(g, ranks))


def load_ranks(g: SocialGraph, path: str | os.PathLike) -> RankVector:
    scores = np.zeros(g.node_count)
    seen = np.zeros(g.node_count, dtype=bool)
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip() or line.startswith("#"):
                continue
            label, value = line.split()
            i = g.index_of(int(label))
            scores[i] = float(value)
            seen[i] = True
    if not seen.all():
        raise ValueError("rank file does not cover every node")
    return RankVector(scores=scores, iterations_used=0, residual=0.0)
