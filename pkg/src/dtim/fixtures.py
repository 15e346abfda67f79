"""Worked example with one target: a 19-node diffusion graph.

Edge weights are the ratios of consecutive path probabilities of the
example (e.g. pp[a->f->c->t] / pp[f->c->t] = 0.098 / 0.14 gives b(a, f) = 0.7).
Edges from the outside sources into u1 and u2 carry weight 0: they shape
the boundary of the unfolded graph but are never traversed.

Node ids order the in-neighbors so that the backward visit reaches ``t``'s
branches in the order e, c, g, b and visits u1 before u2.
"""

from __future__ import annotations

from importlib import resources

from .graph import SocialGraph, load_edge_list
from .weights import DiffusionGraph, TargetSet, manual_diffusion_graph, select_targets

NAMES = ("t", "e", "c", "g", "b", "h", "d", "u1", "u2", "f", "a") + tuple(
    f"x{i}" for i in range(1, 9)
)

EDGE_WEIGHTS = {
    ("b", "t"): 0.35,
    ("g", "t"): 0.3,
    ("c", "t"): 0.2,
    ("e", "t"): 0.15,
    ("f", "c"): 0.7,
    ("a", "c"): 0.3,
    ("a", "f"): 0.7,
    ("a", "g"): 0.8,
    ("h", "e"): 0.6,
    ("d", "h"): 0.5,
    ("u1", "d"): 0.3,
    ("u1", "b"): 0.6,
    ("u2", "d"): 0.7,
    ("u2", "b"): 0.4,
}
TARGET_WEIGHT = 0.5


def example2_graph() -> SocialGraph:
    src = resources.files("dtim").joinpath("data/example2.edges")
    return load_edge_list(src.read_bytes())


def node_id(name: str) -> int:
    return NAMES.index(name)


def example2() -> tuple[DiffusionGraph, TargetSet]:
    g = example2_graph()
    b = {(node_id(u), node_id(v)): w for (u, v), w in EDGE_WEIGHTS.items()}
    dg = manual_diffusion_graph(g, {node_id("t"): TARGET_WEIGHT}, b)
    return dg, select_targets(dg.node_weight, threshold=TARGET_WEIGHT)
