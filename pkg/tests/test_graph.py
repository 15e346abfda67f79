import io
from collections import deque

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dtim.errors import EmptyGraphError, ParseError
from dtim.fixtures import example2_graph
from dtim.graph import (
    SocialGraph,
    betweenness,
    centrality_stats,
    coreness,
    dumps_edge_list,
    load_edge_list,
    save_edge_list,
)

from helpers import random_graph

edge_lists = st.lists(
    st.tuples(st.integers(0, 30), st.integers(0, 30)), min_size=1, max_size=60
).filter(lambda es: any(u != v for u, v in es))


def test_cycle_of_three():
    g = load_edge_list(b"0 1\n1 2\n2 0")
    assert g.node_count == 3
    assert g.edges == ((0, 1), (1, 2), (2, 0))
    assert g.in_adj == ((2,), (0,), (1,))


def test_duplicates_and_self_loops_are_dropped():
    g = load_edge_list(b"0 1\n0 1\n1 1")
    assert g.edges == ((0, 1),)
    assert g.dropped.duplicates == 1
    assert g.dropped.self_loops == 1


def test_comma_comments_and_remap():
    g = load_edge_list(io.StringIO("# header\n10,30\n\n30 , 20\n"))
    assert g.labels == (10, 20, 30)
    assert g.edges == ((0, 2), (2, 1))
    assert g.index_of(30) == 2


def test_parse_error_reports_line():
    with pytest.raises(ParseError) as err:
        load_edge_list(b"0 1\n1 x\n")
    assert err.value.line_number == 2
    with pytest.raises(ParseError):
        load_edge_list(b"0 1 2\n")
    with pytest.raises(ParseError):
        load_edge_list(b"-1 2\n")


def test_empty_input():
    with pytest.raises(EmptyGraphError):
        load_edge_list(b"# nothing\n\n")
    with pytest.raises(EmptyGraphError):
        load_edge_list(b"3 3\n")


def test_example_fixture_has_nineteen_nodes():
    g = example2_graph()
    assert g.node_count == 19
    assert g.edge_count == 22


def test_from_edges_is_strict():
    with pytest.raises(ValueError):
        SocialGraph.from_edges(2, [(0, 0)])
    with pytest.raises(ValueError):
        SocialGraph.from_edges(2, [(0, 1), (0, 1)])
    with pytest.raises(ValueError):
        SocialGraph.from_edges(2, [(0, 2)])


@settings(max_examples=60, deadline=None)
@given(edge_lists)
def test_structure_invariants_and_round_trip(edges):
    text = "".join(f"{u} {v}\n" for u, v in edges).encode()
    g = load_edge_list(text)
    for v in range(g.node_count):
        assert len(g.in_adj[v]) == sum(1 for _, x in g.edges if x == v)
        assert list(g.in_adj[v]) == sorted(g.in_adj[v])
        assert list(g.out_adj[v]) == sorted(g.out_adj[v])
    assert sum(map(len, g.in_adj)) == sum(map(len, g.out_adj)) == g.edge_count
    again = load_edge_list(dumps_edge_list(g).encode())
    assert again == g
    assert dumps_edge_list(again) == dumps_edge_list(g)


def test_save_round_trip(tmp_path):
    g = load_edge_list(b"5 7\n7 9\n9 5\n")
    path = tmp_path / "g.edges"
    save_edge_list(g, path)
    assert load_edge_list(path) == g
    assert g.content_hash() == load_edge_list(path).content_hash()


def test_path_betweenness():
    g = SocialGraph.from_edges(3, [(0, 1), (1, 2)])
    assert betweenness(g) == [0.0, 1.0, 0.0]


def test_triangle_outdegree():
    g = SocialGraph.from_edges(3, [(0, 1), (1, 2), (2, 0)])
    assert centrality_stats(g).outdegree == (1, 1, 1)


def _bfs(g: SocialGraph, s: int) -> tuple[list[int], list[int]]:
    dist = [-1] * g.node_count
    sigma = [0] * g.node_count
    dist[s], sigma[s] = 0, 1
    queue = deque([s])
    while queue:
        v = queue.popleft()
        for w in g.out_adj[v]:
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                queue.append(w)
            if dist[w] == dist[v] + 1:
                sigma[w] += sigma[v]
    return dist, sigma


def brute_force_betweenness(g: SocialGraph) -> list[float]:
    """sum over s != v != t of sigma_st(v) / sigma_st, from pairwise path counts."""
    n = g.node_count
    tables = [_bfs(g, s) for s in range(n)]
    bc = [0.0] * n
    for s in range(n):
        ds, ss = tables[s]
        for t in range(n):
            if t == s or ds[t] <= 0:
                continue
            for v in range(n):
                if v in (s, t) or ds[v] < 0:
                    continue
                dv, sv = tables[v]
                if dv[t] >= 0 and ds[v] + dv[t] == ds[t]:
                    bc[v] += ss[v] * sv[t] / ss[t]
    return bc


def test_betweenness_matches_brute_force_on_random_graph():
    rng = np.random.default_rng(50)
    g = random_graph(rng, 50, 180)
    np.testing.assert_allclose(betweenness(g), brute_force_betweenness(g), rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_centrality_matches_networkx(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 40, 120)
    ref = nx.DiGraph()
    ref.add_nodes_from(range(g.node_count))
    ref.add_edges_from(g.edges)
    bc = nx.betweenness_centrality(ref, normalized=False)
    np.testing.assert_allclose(betweenness(g), [bc[v] for v in range(g.node_count)], atol=1e-9)
    und = nx.Graph(ref)
    core = nx.core_number(und)
    assert coreness(g) == [core[v] for v in range(g.node_count)]
    degree = [len(set(g.in_adj[v]) | set(g.out_adj[v])) for v in range(g.node_count)]
    assert all(c <= d for c, d in zip(coreness(g), degree))
