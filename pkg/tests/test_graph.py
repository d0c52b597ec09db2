import itertools
from collections import deque

import pytest
from hypothesis import given, settings, strategies as st

from cfokit.corpus import cycle, gen_random_bounded_degree, path
from cfokit.graph import (
    ColouredGraph,
    GraphError,
    OrderedGraph,
    ball,
    diameter,
    dump_graph,
    is_partial_isomorphism,
    load_graph,
    pointed_type,
    threshold_equivalent,
    type_census,
)


def bfs_ball(g, v, r):
    seen, todo = {v: 0}, deque([v])
    while todo:
        u = todo.popleft()
        if seen[u] == r:
            continue
        for w in g.adj[u]:
            if w not in seen:
                seen[w] = seen[u] + 1
                todo.append(w)
    return set(seen)


def test_minimal_graph_loads():
    g, order = load_graph("graph 1\nnode 0\n")
    assert g.n == 1 and not g.edges and order is None


def test_self_loop_rejected():
    with pytest.raises(GraphError, match="self-loop"):
        load_graph("graph 2\nedge 0 0\n")


@pytest.mark.parametrize("text", ["edge 0 1\n", "graph 2\nedge 0 5\n", "graph 2\nnode 0 red\n", "graph 2\nfoo\n",
                                  "graph 2\norder 0 0\n", "graph x\n"])
def test_malformed_files_rejected(text):
    with pytest.raises(GraphError):
        load_graph(text)


def test_cycle_six_counts():
    g, _ = load_graph(dump_graph(cycle(6)))
    assert g.n == 6 and len(g.edges) == 6 and g.max_degree == 2


def test_round_trip_keeps_colours_and_order():
    g = ColouredGraph.from_edges(3, [(0, 1)], ["red", "blue"], {0: ["red"], 2: ["red", "blue"]})
    g2, order = load_graph(dump_graph(g, (2, 0, 1)))
    assert order == (2, 0, 1)
    assert [g2.colour_names(v) for v in range(3)] == [g.colour_names(v) for v in range(3)]
    assert g2.edges == g.edges


def test_balls_on_cycle_six():
    g = cycle(6)
    assert ball(g, 0, 0) == {0}
    assert ball(g, 0, 2) == {4, 5, 0, 1, 2}
    assert ball(g, 0, 3) == set(range(6))
    assert diameter(g) == 3


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 25), st.integers(0, 4), st.integers(0, 3), st.integers(0, 10**6))
def test_ball_matches_bfs(n, d, r, seed):
    g = gen_random_bounded_degree(n, d, seed=seed)
    for v in range(n):
        assert ball(g, v, r) == bfs_ball(g, v, r)


def test_census_cycle_and_path():
    assert list(type_census(cycle(6), 1).counts.values()) == [6]
    assert sorted(type_census(path(4), 1).counts.values()) == [2, 2]
    assert not type_census(ColouredGraph.from_edges(0, [], [], {}), 1).counts


def brute_isomorphic_pointed(g, u, v, r):
    bu, bv = sorted(bfs_ball(g, u, r)), sorted(bfs_ball(g, v, r))
    if len(bu) != len(bv):
        return False
    for perm in itertools.permutations(bv):
        m = dict(zip(bu, perm))
        if m[u] != v:
            continue
        if all(g.colour_of[a] == g.colour_of[m[a]] for a in bu) and all(
            (m[b] in g.adj[m[a]]) == (b in g.adj[a]) for a in bu for b in bu
        ):
            return True
    return False


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 9), st.integers(1, 3), st.integers(0, 10**6))
def test_pointed_type_matches_brute_isomorphism(n, d, seed):
    g = gen_random_bounded_degree(n, d, ["red"], seed)
    for u, v in itertools.combinations(range(n), 2):
        same = pointed_type(g, u, 1) == pointed_type(g, v, 1)
        assert same == brute_isomorphic_pointed(g, u, v, 1)


def test_threshold_equivalence():
    assert threshold_equivalent(cycle(100), cycle(101), 1, 50)
    assert not threshold_equivalent(cycle(6), path(6), 1, 100)
    g = gen_random_bounded_degree(12, 3, seed=4)
    assert threshold_equivalent(g, g, 2, 0)


def test_partial_isomorphism_examples():
    g = gen_random_bounded_degree(8, 3, ["red"], 1)
    og = OrderedGraph.identity(g)
    assert is_partial_isomorphism(og, og, [(v, v) for v in range(8)])
    rb = ColouredGraph.from_edges(2, [], ["red", "blue"], {0: ["red"], 1: ["blue"]})
    assert not is_partial_isomorphism(rb, rb, [(0, 1)], {"colours"})
    a = OrderedGraph(rb, (0, 1))
    b = OrderedGraph(rb, (1, 0))
    assert not is_partial_isomorphism(a, b, [(0, 0), (1, 1)], {"order"})
    assert is_partial_isomorphism(a, b, [(0, 1), (1, 0)], {"order", "edge"})


def test_ordered_graph_rank_is_inverse_of_sequence():
    og = OrderedGraph(cycle(5), (3, 1, 4, 0, 2))
    assert [og.seq[og.rank[v]] for v in range(5)] == list(range(5))
    assert og.less(3, 1) and not og.less(2, 0)
