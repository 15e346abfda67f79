"""Reverse influence sampling for the targeted, diversity-aware objective.

Roots of reverse-reachable (RR) sets are drawn among the targets with
probability proportional to their weight, so the fraction of RR sets a seed
set covers estimates its capital divided by the total target weight
``L_TS``. Under LT each RR set is a single backward live-edge path.

The sample size follows the two-phase scheme of TIM+: a doubling loop
estimates a lower bound KPT on the optimum (with the width-based kappa
replaced by a target-aware one), a greedy seed set on that pool refines the
bound, and ``theta = lambda / KPT`` RR sets feed the final selection.
"""

from __future__ import annotations

import bisect
import hashlib
import math
import os
import struct
from array import array
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .diversity import max_normalize
from .greedy import SeedResult
from .streams import UniformBuffer, batch_generator
from .weights import DiffusionGraph, TargetSet

DEFAULT_EPSILON = 0.1
FAST_EPSILON = 1.0
_BATCH = 1024
_STREAM_SHIFT = 40
REFINE_STREAM = 1 << 20
FINAL_STREAM = (1 << 20) + 1


@dataclass(frozen=True)
class RRSet:
    root: int
    path: tuple[int, ...]
    members: frozenset[int]
    width: int
    target_members: frozenset[int]
    member_ell_sum: float


class RootSampler:
    """Draws targets with probability ell(v) / L_TS."""

    def __init__(self, ts: TargetSet, ell: Sequence[float] | np.ndarray):
        self.support = ts.sorted()
        weights = [float(ell[v]) for v in self.support]
        self.total = math.fsum(weights)
        if self.total <= 0:
            raise ValueError("target weights sum to zero")
        acc, cdf = 0.0, []
        for w in weights:
            acc += w
            cdf.append(acc / self.total)
        cdf[-1] = 1.0
        self._cdf = cdf

    def draw(self, u: float) -> int:
        return self.support[bisect.bisect_right(self._cdf, u)]

    def probabilities(self) -> dict[int, float]:
        prev, out = 0.0, {}
        for v, c in zip(self.support, self._cdf):
            out[v] = c - prev
            prev = c
        return out


def target_weight_total(ts: TargetSet, ell: Sequence[float] | np.ndarray) -> float:
    return math.fsum(float(ell[v]) for v in ts.members)


def sample_root(ts: TargetSet, ell: Sequence[float] | np.ndarray, rng: np.random.Generator) -> int:
    return RootSampler(ts, ell).draw(rng.random())


class ReverseWalker:
    """LT reverse walk: each node keeps one in-edge w.p. b, or none."""

    def __init__(self, dg: DiffusionGraph, ts: TargetSet):
        self.dg = dg
        self.targets = ts.members
        self.ell = dg.node_weight.tolist()
        self.in_degree = [len(x) for x in dg.graph.in_adj]
        self._nbrs = dg.graph.in_adj
        cums = []
        for ws in dg.in_weights:
            acc, c = 0.0, []
            for w in ws:
                acc += w
                c.append(acc)
            cums.append(c)
        self._cum = cums

    def walk(self, root: int, draw) -> RRSet:
        path = [root]
        members = {root}
        v = root
        while True:
            cum = self._cum[v]
            if not cum:
                break
            i = bisect.bisect_right(cum, draw())
            if i == len(cum):
                break
            u = self._nbrs[v][i]
            if u in members:
                break
            path.append(u)
            members.add(u)
            v = u
        return self.make(path)

    def make(self, path: Sequence[int]) -> RRSet:
        members = frozenset(path)
        tmem = members & self.targets
        return RRSet(
            root=path[0],
            path=tuple(path),
            members=members,
            width=sum(self.in_degree[x] for x in members),
            target_members=tmem,
            member_ell_sum=math.fsum(self.ell[x] for x in tmem),
        )


def generate_rr_set(dg: DiffusionGraph, root: int, rng: np.random.Generator, ts: TargetSet) -> RRSet:
    return ReverseWalker(dg, ts).walk(root, rng.random)


def sample_pool(
    dg: DiffusionGraph, ts: TargetSet, count: int, rng_seed: int, stream: int = 0
) -> list[RRSet]:
    """``count`` RR sets; batch ``b`` of ``stream`` uses its own substream."""
    walker = ReverseWalker(dg, ts)
    sampler = RootSampler(ts, dg.node_weight)
    pool: list[RRSet] = []
    batch = 0
    while len(pool) < count:
        buf = UniformBuffer(batch_generator(rng_seed, (stream << _STREAM_SHIFT) + batch))
        for _ in range(min(_BATCH, count - len(pool))):
            pool.append(walker.walk(sampler.draw(buf.next()), buf.next))
        batch += 1
    return pool


def kappa_hat(rr: RRSet, m: int, k: int) -> float:
    """[1 - (1 - |TS_R|/m)^k] * mean target weight inside the RR set."""
    nt = len(rr.target_members)
    if nt == 0:
        return 0.0
    if m <= 0:
        return 0.0
    bracket = 1.0 - max(0.0, 1.0 - nt / m) ** k
    return bracket * rr.member_ell_sum / nt


def coverage_fraction(pool: Sequence[RRSet], seeds: Iterable[int]) -> float:
    s = set(seeds)
    return sum(1 for rr in pool if not s.isdisjoint(rr.members)) / len(pool)


def _log_binomial(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def sample_size_lambda(n: int, k: int, epsilon: float, failure_exponent: float = 1.0) -> float:
    """(8 + 2 eps) n (l ln n + ln C(n, k) + ln 2) / eps^2."""
    k = min(k, n)
    return (
        (8 + 2 * epsilon)
        * n
        * (failure_exponent * math.log(n) + _log_binomial(n, k) + math.log(2))
        / epsilon**2
    )


@dataclass
class KptEstimate:
    kpt: float
    refined_kpt: float
    theta: int
    epsilon: float
    lambda_: float
    pool: list[RRSet] = field(default_factory=list, repr=False)
    refine_fraction: float | None = None


def _theta(lam: float, kpt: float, max_theta: int | None) -> int:
    theta = max(1, math.ceil(lam / kpt))
    return min(theta, max_theta) if max_theta else theta


def kpt_floor(dg: DiffusionGraph, ts: TargetSet) -> float:
    positive = [float(dg.node_weight[v]) for v in ts.members if dg.node_weight[v] > 0]
    return min(positive) / dg.n if positive else 1.0 / dg.n


def estimate_kpt(
    dg: DiffusionGraph,
    ts: TargetSet,
    k: int,
    rng_seed: int = 0,
    epsilon: float = DEFAULT_EPSILON,
    failure_exponent: float = 1.0,
    max_theta: int | None = None,
) -> KptEstimate:
    """Doubling estimate of KPT = n * E[kappa_hat(R)].

    Iteration ``i`` draws ``c_i = (6 l ln n + 6 ln log2 n) 2^i`` RR sets and
    stops once their mean kappa_hat exceeds ``2^-i``. Without edges, or if
    no iteration stops, KPT falls back to ``min positive ell / n``.
    """
    n, m = dg.n, dg.m
    lam = sample_size_lambda(n, k, epsilon, failure_exponent)
    floor = kpt_floor(dg, ts)
    kpt, pool = floor, []
    if m > 0 and n > 1:
        rounds = int(math.log2(n)) - 1
        base = 6 * failure_exponent * math.log(n) + 6 * math.log(math.log2(n))
        for i in range(1, rounds + 1):
            c_i = math.ceil(base * 2**i)
            pool = sample_pool(dg, ts, c_i, rng_seed, stream=i)
            total = math.fsum(kappa_hat(rr, m, k) for rr in pool)
            if total / c_i > 2.0**-i:
                kpt = max(floor, n * total / (2 * c_i))
                break
    return KptEstimate(kpt, kpt, _theta(lam, kpt, max_theta), epsilon, lam, pool)


def greedy_cover(pool: Sequence[RRSet], k: int, ell: Sequence[float] | np.ndarray) -> list[int]:
    """Max coverage where each RR set is worth the weight of its root."""
    result = ris_node_selection(pool, k, 1.0, "capital-only", ell)
    return result.seeds


def refine_kpt(
    dg: DiffusionGraph,
    ts: TargetSet,
    k: int,
    est: KptEstimate,
    rng_seed: int = 0,
    failure_exponent: float = 1.0,
    max_theta: int | None = None,
) -> KptEstimate:
    """Tighten KPT with the capital fraction covered by a greedy seed set.

    f = sum of root weights of fresh RR sets hit by the greedy set / sum of
    all root weights; the candidate bound is ``f L_TS / (1 + eps')``, the
    capital counterpart of the spread bound ``f n / (1 + eps')``.
    """
    n = dg.n
    if not est.pool:
        return est
    seeds = greedy_cover(est.pool, k, dg.node_weight)
    eps2 = 5.0 * (failure_exponent * est.epsilon**2 / (k + failure_exponent)) ** (1.0 / 3.0)
    lam2 = (2 + eps2) * failure_exponent * n * math.log(n) / eps2**2
    fresh = sample_pool(dg, ts, _theta(lam2, est.kpt, max_theta), rng_seed, stream=REFINE_STREAM)
    f = capital_fraction(fresh, seeds, dg.node_weight)
    bound = f * target_weight_total(ts, dg.node_weight) / (1.0 + eps2)
    refined = max(est.kpt, bound)
    return KptEstimate(
        kpt=est.kpt,
        refined_kpt=refined,
        theta=_theta(est.lambda_, refined, max_theta),
        epsilon=est.epsilon,
        lambda_=est.lambda_,
        pool=est.pool,
        refine_fraction=f,
    )


def capital_fraction(pool: Sequence[RRSet], seeds: Iterable[int], ell: Sequence[float] | np.ndarray) -> float:
    s = set(seeds)
    hit = math.fsum(float(ell[rr.root]) for rr in pool if not s.isdisjoint(rr.members))
    total = math.fsum(float(ell[rr.root]) for rr in pool)
    return hit / total if total > 0 else 0.0


@dataclass
class _TreePos:
    node: int
    depth: int
    parent: int
    children: dict[int, int] = field(default_factory=dict)


class PathTree:
    """Backward paths of all RR sets sharing a root, merged as a prefix tree.

    A graph node may occupy several positions (different paths/depths);
    every position except the root has exactly one parent.
    """

    def __init__(self, root: int, paths: Iterable[Sequence[int]]):
        self.root = root
        self.positions = [_TreePos(root, 0, -1)]
        for path in paths:
            if path[0] != root:
                raise ValueError("path does not start at the tree root")
            pos = 0
            for x in path[1:]:
                nxt = self.positions[pos].children.get(x)
                if nxt is None:
                    nxt = len(self.positions)
                    self.positions.append(_TreePos(x, self.positions[pos].depth + 1, pos))
                    self.positions[pos].children[x] = nxt
                pos = nxt

    @property
    def depth(self) -> int:
        return max(p.depth for p in self.positions)

    def multiplicity(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for p in self.positions[1:]:
            out[p.node] = out.get(p.node, 0) + 1
        return out

    def leaves(self, max_depth: int | None = None) -> list[int]:
        """Leaf positions of the tree truncated at ``max_depth``."""
        out = []
        for i, p in enumerate(self.positions):
            if max_depth is not None and p.depth > max_depth:
                continue
            if max_depth is not None and p.depth == max_depth:
                out.append(i)
            elif not p.children:
                out.append(i)
        return out

    def edges(self, max_depth: int | None = None) -> set[tuple[int, int]]:
        """Graph edges (child node -> parent node) used by the tree."""
        out = set()
        for p in self.positions[1:]:
            if max_depth is None or p.depth <= max_depth:
                out.add((p.node, self.positions[p.parent].node))
        return out


def _external(in_degree: Sequence[int], edges: set[tuple[int, int]]) -> dict[int, int]:
    used: dict[int, int] = {}
    for _, v in edges:
        used[v] = used.get(v, 0) + 1
    return used


def tree_global_diversity(tree: PathTree, in_degree: Sequence[int]) -> dict[int, float]:
    """Mean global diversity of each non-root node over its tree positions."""
    leaves = tree.leaves()
    size = len(leaves)
    edges = tree.edges()
    used_in = _external(in_degree, edges)
    out_span: dict[int, int] = {}
    for u, _ in edges:
        out_span[u] = out_span.get(u, 0) + 1
    leaf_set = set(leaves)
    sums: dict[int, float] = {}
    counts: dict[int, int] = {}
    for i, p in enumerate(tree.positions):
        if i == 0:
            continue
        value = 0.0
        if i in leaf_set:
            ext = in_degree[p.node] - used_in.get(p.node, 0)
            value = ext / size * math.log1p(out_span.get(p.node, 0) / size)
        sums[p.node] = sums.get(p.node, 0.0) + value
        counts[p.node] = counts.get(p.node, 0) + 1
    return {u: sums[u] / counts[u] for u in sums}


def tree_local_diversity(tree: PathTree, in_degree: Sequence[int]) -> dict[int, float]:
    """Local diversity of each position against the tree truncated one level above.

    Values are averaged per depth, then uniformly over depths.
    """
    by_depth: dict[int, list[int]] = {}
    for i, p in enumerate(tree.positions):
        by_depth.setdefault(p.depth, []).append(i)
    per_node: dict[int, dict[int, list[float]]] = {}
    for d in range(1, tree.depth + 1):
        edges = tree.edges(d - 1)
        used_in = _external(in_degree, edges)
        boundary = tree.leaves(d - 1)
        size = len(boundary)
        bsum = sum(in_degree[tree.positions[i].node] - used_in.get(tree.positions[i].node, 0) for i in boundary)
        for i in by_depth.get(d, []):
            u = tree.positions[i].node
            if in_degree[u] == 0:
                value = 0.0
            elif bsum > 0:
                ext = in_degree[u] - used_in.get(u, 0)
                value = size / (1.0 + size) * (1.0 + ext / bsum)
            else:
                continue
            per_node.setdefault(u, {}).setdefault(d, []).append(value)
    out = {}
    for u, depths in per_node.items():
        out[u] = sum(sum(v) / len(v) for v in depths.values()) / len(depths)
    return out


def rr_diversity(pool: Iterable[RRSet], in_degree: Sequence[int], variant: str = "global") -> dict[int, float]:
    """Total RR-diversity: per-tree node diversity averaged over trees."""
    if variant not in ("global", "local"):
        raise ValueError("variant must be 'global' or 'local'")
    by_root: dict[int, list[tuple[int, ...]]] = {}
    for rr in pool:
        by_root.setdefault(rr.root, []).append(rr.path)
    score = tree_global_diversity if variant == "global" else tree_local_diversity
    sums: dict[int, float] = {}
    counts: dict[int, int] = {}
    for root in sorted(by_root):
        for u, x in score(PathTree(root, by_root[root]), in_degree).items():
            sums[u] = sums.get(u, 0.0) + x
            counts[u] = counts.get(u, 0) + 1
    return {u: sums[u] / counts[u] for u in sums}


def ris_node_selection(
    pool: Sequence[RRSet],
    k: int,
    alpha: float,
    variant: str,
    ell: Sequence[float] | np.ndarray,
    in_degree: Sequence[int] | None = None,
) -> SeedResult:
    """Greedy weighted max-cover blended with RR-diversity.

    A node's capital score is the root weight of the uncovered RR sets it
    belongs to, as a fraction of the pool's total root weight. Its diversity
    is the max-normalized total RR-diversity. The objective is
    ``alpha * capital + (1 - alpha) * diversity``; ties go to the smaller id.
    """
    if not pool:
        raise ValueError("RR-set pool is empty")
    if variant not in ("global", "local", "capital-only"):
        raise ValueError("variant must be 'global', 'local' or 'capital-only'")
    if variant != "capital-only" and in_degree is None:
        raise ValueError("diversity variants need node in-degrees")
    set_score = [float(ell[rr.root]) for rr in pool]
    total = math.fsum(set_score) or 1.0
    member_of: dict[int, list[int]] = {}
    for i, rr in enumerate(pool):
        for u in rr.members:
            member_of.setdefault(u, []).append(i)
    score = {u: math.fsum(set_score[i] for i in idx) for u, idx in member_of.items()}
    if variant == "capital-only":
        div: Mapping[int, float] = {}
    else:
        div = max_normalize(rr_diversity(pool, in_degree, variant))
    covered = [False] * len(pool)
    result = SeedResult([], [], [], [])
    chosen: set[int] = set()
    while len(result.seeds) < k:
        best, best_val = None, 0.0
        for u in sorted(member_of):
            if u in chosen:
                continue
            val = alpha * score[u] / total + (1.0 - alpha) * div.get(u, 0.0)
            if val > best_val:
                best, best_val = u, val
        if best is None:
            result.status = "pool-exhausted"
            break
        chosen.add(best)
        result.seeds.append(best)
        result.objective.append(best_val)
        result.capital.append(score[best] / total)
        result.diversity.append(div.get(best, 0.0))
        for i in member_of[best]:
            if not covered[i]:
                covered[i] = True
                for u in pool[i].members:
                    score[u] -= set_score[i]
    return result


@dataclass
class RISResult:
    seeds: SeedResult
    kpt: KptEstimate
    pool: list[RRSet] = field(repr=False)

    @property
    def pool_size(self) -> int:
        return len(self.pool)


def ris_select(
    dg: DiffusionGraph,
    ts: TargetSet,
    k: int,
    alpha: float,
    variant: str = "global",
    epsilon: float = DEFAULT_EPSILON,
    rng_seed: int = 0,
    max_theta: int | None = None,
    pool: list[RRSet] | None = None,
) -> RISResult:
    """Full pipeline: KPT estimate, refinement, sampling, node selection.

    A cached ``pool`` skips the sampling stages.
    """
    est = estimate_kpt(dg, ts, k, rng_seed, epsilon, max_theta=max_theta)
    est = refine_kpt(dg, ts, k, est, rng_seed, max_theta=max_theta)
    if pool is None:
        pool = sample_pool(dg, ts, est.theta, rng_seed, stream=FINAL_STREAM)
    in_degree = [len(x) for x in dg.graph.in_adj]
    seeds = ris_node_selection(pool, k, alpha, variant, dg.node_weight, in_degree)
    return RISResult(seeds, est, pool)


_MAGIC = b"DTIMRR1\0"
_HEADER = struct.Struct("<8s32sQq")


def save_pool(path: str | os.PathLike, pool: Sequence[RRSet], graph_hash: str, rng_seed: int) -> None:
    """Binary cache: header (magic, graph hash, count, seed), then u32 length-prefixed paths."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, bytes.fromhex(graph_hash), len(pool), rng_seed))
        for rr in pool:
            body = array("I", [len(rr.path), *rr.path])
            if body.itemsize != 4:
                raise RuntimeError("platform lacks 32-bit unsigned ints")
            fh.write(body.tobytes())


def load_pool(path: str | os.PathLike, dg: DiffusionGraph, ts: TargetSet) -> tuple[list[RRSet], int]:
    """Read a cached pool; returns ``(pool, rng_seed)``. Graph hash must match."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic, digest, count, seed = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise ValueError("not an RR-set cache file")
    if digest.hex() != dg.content_hash():
        raise ValueError("RR-set cache was built for a different graph")
    words = array("I")
    words.frombytes(data[_HEADER.size :])
    walker = ReverseWalker(dg, ts)
    pool, pos = [], 0
    for _ in range(count):
        length = words[pos]
        pool.append(walker.make(words[pos + 1 : pos + 1 + length].tolist()))
        pos += 1 + length
    return pool, seed


def pool_digest(pool: Sequence[RRSet]) -> str:
    h = hashlib.sha256()
    for rr in pool:
        h.update(array("I", [len(rr.path), *rr.path]).tobytes())
    return h.hexdigest()
