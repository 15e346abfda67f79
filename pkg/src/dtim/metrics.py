"""Evaluation measurements: seed overlap, centrality spread, capital sweeps."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .greedy import SelectionConfig, dtim_select
from .simulate import DEFAULT_RUNS, estimate_capital
from .weights import DiffusionGraph, TargetSet

HISTOGRAM_BINS = 100


def seed_overlap(a: Iterable[int], b: Iterable[int], k: int) -> float:
    """|a & b| / k for two seed sets of size k."""
    a, b = set(a), set(b)
    if len(a) != k or len(b) != k:
        raise ValueError(f"seed sets must both have size {k}")
    return len(a & b) / k


@dataclass(frozen=True)
class OverlapMatrix:
    labels: tuple
    values: np.ndarray

    def dumps(self) -> str:
        head = "\t".join(["run", *map(str, self.labels)])
        rows = [head]
        for lab, row in zip(self.labels, self.values.tolist()):
            rows.append("\t".join([str(lab), *(f"{x:.6g}" for x in row)]))
        return "\n".join(rows) + "\n"


def overlap_matrix(labels: Sequence, seed_sets: Sequence[Sequence[int]]) -> OverlapMatrix:
    """Pairwise normalized overlap; sets shorter than the longest count as-is."""
    if len(labels) != len(seed_sets):
        raise ValueError("one label per seed set")
    k = max((len(s) for s in seed_sets), default=0)
    n = len(seed_sets)
    values = np.ones((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            x = len(set(seed_sets[i]) & set(seed_sets[j])) / k if k else 1.0
            values[i, j] = values[j, i] = x
    return OverlapMatrix(tuple(labels), values)


def coefficient_of_variation(values: Sequence[float]) -> float:
    """Sample standard deviation over mean."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("no values")
    mean = x.mean()
    if mean == 0:
        raise ZeroDivisionError("mean is zero")
    if x.size == 1:
        return 0.0
    return float(x.std(ddof=1) / abs(mean))


def capital_diversity_correlation(capital: Sequence[float], diversity: Sequence[float]) -> float:
    """Pearson correlation between per-node capital and diversity."""
    x = np.asarray(capital, dtype=float)
    y = np.asarray(diversity, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("need two equal-length sequences of at least two values")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ZeroDivisionError("zero variance")
    return float(np.corrcoef(x, y)[0, 1])


def activation_histogram(probabilities: Sequence[float], bins: int = HISTOGRAM_BINS) -> np.ndarray:
    counts, _ = np.histogram(np.asarray(probabilities, dtype=float), bins=bins, range=(0.0, 1.0))
    return counts


def spearman_trend(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman rank correlation; 1.0 for a perfectly non-decreasing series.

    A constant ``ys`` has no trend to contradict and counts as 1.0.
    """
    if np.ptp(np.asarray(ys, dtype=float)) == 0:
        return 1.0
    return float(stats.spearmanr(xs, ys).statistic)


@dataclass
class SweepRow:
    alpha: float
    k: int
    seeds: list[int]
    capital: float
    capital_std_error: float
    histogram: np.ndarray


@dataclass
class SweepTable:
    variant: str
    eta: float
    runs: int
    rng_seed: int
    rows: list[SweepRow] = field(default_factory=list)

    def overlaps(self, k: int) -> OverlapMatrix:
        cells = [r for r in self.rows if r.k == k]
        return overlap_matrix([r.alpha for r in cells], [r.seeds for r in cells])

    def dumps(self, labels: tuple[int, ...] | None = None) -> str:
        out = [
            f"# variant={self.variant}\teta={self.eta:g}\truns={self.runs}\trng_seed={self.rng_seed}"
            "\tcorrelation=pearson\thistogram_bins=" + str(HISTOGRAM_BINS),
            "\t".join(["alpha", "k", "capital", "std_error", "seeds", "overlap", "histogram"]),
        ]
        for r in self.rows:
            ov = self.overlaps(r.k)
            i = [x.alpha for x in self.rows if x.k == r.k].index(r.alpha)
            seeds = ",".join(str(labels[s] if labels else s) for s in r.seeds)
            out.append(
                "\t".join(
                    [
                        f"{r.alpha:g}",
                        str(r.k),
                        f"{r.capital:.17g}",
                        f"{r.capital_std_error:.17g}",
                        seeds,
                        ",".join(f"{x:.6g}" for x in ov.values[i]),
                        ",".join(map(str, r.histogram.tolist())),
                    ]
                )
            )
        return "\n".join(out) + "\n"

    def save(self, path: str | os.PathLike, labels: tuple[int, ...] | None = None) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps(labels))


def sweep(
    dg: DiffusionGraph,
    ts: TargetSet,
    alphas: Sequence[float],
    ks: Sequence[int],
    variant: str = "global",
    eta: float = 1e-4,
    runs: int = DEFAULT_RUNS,
    rng_seed: int = 0,
    workers: int = 1,
) -> SweepTable:
    """Greedy selection plus Monte Carlo capital for every (alpha, k) cell.

    Selection for the largest k is computed once per alpha; smaller budgets
    reuse its prefix, which is what a fresh run with that budget returns.
    """
    if not alphas or not ks:
        raise ValueError("alpha and k grids must be nonempty")
    table = SweepTable(variant, eta, runs, rng_seed)
    kmax = max(ks)
    for alpha in alphas:
        picked = dtim_select(dg, ts, SelectionConfig(kmax, alpha, eta, variant)).seeds
        for k in sorted(ks):
            seeds = picked[:k]
            rep = estimate_capital(dg, seeds, ts, runs, rng_seed, workers)
            table.rows.append(
                SweepRow(
                    alpha=alpha,
                    k=k,
                    seeds=seeds,
                    capital=rep.capital_estimate,
                    capital_std_error=rep.capital_std_error,
                    histogram=activation_histogram(rep.activation_probability),
                )
            )
    table.rows.sort(key=lambda r: (r.k, r.alpha))
    return table


def capital_trend(table: SweepTable, k: int) -> float:
    cells = [r for r in table.rows if r.k == k]
    return spearman_trend([r.alpha for r in cells], [r.capital for r in cells])
