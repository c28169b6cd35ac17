import networkx as nx
import numpy as np
import pytest

from spwdsched.generate import random_sp
from spwdsched.ttsp import (Edge, NodeKind, TtspGraph, Vertex, VertexKind, count_graph_paths,
    count_paths, enumerate_paths, expand_tree, map_to_ttsp, normalize_two_terminal,
    recognize_and_build_tree, tree_paths)
from spwdsched.utils import NotSeriesParallel, ParseError, PathExplosion

import helpers


def _graph(n, edges, source=0, sink=None):
    vertices = tuple(Vertex(i, i, VertexKind.TASK) for i in range(n))
    return TtspGraph(vertices, tuple(Edge(i, u, v) for i, (u, v) in enumerate(edges)),
                     source, n - 1 if sink is None else sink)


def test_normalize_keeps_single_terminals(diamond):
    graph = normalize_two_terminal(diamond)
    assert (graph.source, graph.sink) == (0, 3)
    assert graph.num_vertices == 4
    assert all(v.kind is VertexKind.TASK for v in graph.vertices)


def test_normalize_adds_super_terminals():
    wf = helpers.workflow([1, 1, 1, 1], [(0, 2), (1, 2), (2, 3)])
    graph = normalize_two_terminal(wf)
    assert graph.source == 4 and graph.sink == 3
    assert graph.vertex(4).kind is VertexKind.SYNTHETIC
    assert sorted((e.tail, e.head) for e in graph.edges if e.tail == 4) == [(4, 0), (4, 1)]

    graph = normalize_two_terminal(helpers.workflow([1, 1, 1], []))
    assert graph.num_vertices == 5
    assert graph.num_edges == 6


def test_normalize_single_task():
    graph = normalize_two_terminal(helpers.workflow([2.0], []))
    assert graph.source == 0
    assert graph.vertex(graph.sink).kind is VertexKind.SYNTHETIC
    assert [(e.tail, e.head) for e in graph.edges] == [(0, 1)]


def test_normalize_empty():
    with pytest.raises(ParseError):
        normalize_two_terminal(helpers.workflow([], []))


def test_two_paths_tree():
    # s=0, x=1, y=2, t=3 with edges a=(s,x) b=(x,t) c=(s,y) d=(y,t)
    graph = _graph(4, [(0, 1), (1, 3), (0, 2), (2, 3)])
    tree = recognize_and_build_tree(graph)
    root = tree.root_node
    assert root.kind is NodeKind.PARALLEL
    left, right = tree[root.left], tree[root.right]
    assert left.kind is right.kind is NodeKind.SERIES
    assert tree.subtree_edges(left.id) == [0, 1]
    assert tree.subtree_edges(right.id) == [2, 3]
    assert (left.connector, right.connector) == (1, 2)
    assert root.vertex_count == 4
    assert root.path_count == 2


def test_children_precede_parents():
    tree = recognize_and_build_tree(normalize_two_terminal(random_sp(40, np.random.default_rng(3))))
    for node in tree.nodes:
        if not node.is_leaf:
            assert node.left < node.id and node.right < node.id
    assert tree.root == len(tree.nodes) - 1


def test_n_graph_is_not_series_parallel(n_graph):
    graph = normalize_two_terminal(n_graph)
    with pytest.raises(NotSeriesParallel):
        recognize_and_build_tree(graph)

    mapped = map_to_ttsp(graph)
    tree = recognize_and_build_tree(mapped)
    assert mapped.num_vertices == 7
    assert tree.root_node.vertex_count == 7
    assert any(v.kind is VertexKind.SYNTHETIC for v in mapped.vertices)


def test_not_two_terminal():
    with pytest.raises(NotSeriesParallel):
        recognize_and_build_tree(_graph(3, [(0, 2), (1, 2)]))


def test_mapping_leaves_ttsp_unchanged(diamond):
    graph = normalize_two_terminal(diamond)
    assert map_to_ttsp(graph) is graph


def _task_reach(graph):
    nxg = nx.DiGraph(graph.to_networkx())
    tasks = [v.id for v in graph.vertices if v.kind is VertexKind.TASK]
    return {(u, v) for u in tasks for v in nx.descendants(nxg, u) if v in tasks}


def test_mapping_bounds_and_precedence():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        n = int(rng.integers(3, 199))  # at most 200 vertices with the terminals
        graph = normalize_two_terminal(helpers.random_dag(rng, n, window=12))
        mapped = map_to_ttsp(graph)
        recognize_and_build_tree(mapped)

        t, t2, e2 = graph.num_vertices, mapped.num_vertices, mapped.num_edges
        if mapped is not graph:
            assert t <= t2 <= 2 * t
            assert e2 <= 2 * (t2 - 2)

        # every original precedence survives
        reach = _task_reach(mapped)
        for e in graph.edges:
            if graph.vertex(e.tail).kind is VertexKind.TASK and graph.vertex(e.head).kind is VertexKind.TASK:
                assert (e.tail, e.head) in reach


def test_mapping_is_deterministic():
    rng = np.random.default_rng(5)
    wf = helpers.random_dag(rng, 60, window=8)
    first = map_to_ttsp(normalize_two_terminal(wf))
    second = map_to_ttsp(normalize_two_terminal(wf))
    assert first == second
    assert recognize_and_build_tree(first) == recognize_and_build_tree(second)


def test_expand_tree_round_trip():
    rng = np.random.default_rng(11)
    for n in (2, 3, 10, 200, 2000):
        graph = normalize_two_terminal(random_sp(n, rng))
        tree = recognize_and_build_tree(graph)
        assert expand_tree(tree) == sorted((e.tail, e.head) for e in graph.edges)


def test_path_counts_match_enumeration():
    rng = np.random.default_rng(7)
    for _ in range(30):
        graph = map_to_ttsp(normalize_two_terminal(helpers.random_dag(rng, 25, window=5)))
        tree = recognize_and_build_tree(graph)
        paths = enumerate_paths(graph)
        # the graph has no parallel edges, so vertex paths and edge paths agree
        counts = count_paths(tree)
        assert counts.root == len(paths)
        assert count_graph_paths(graph) == (len(paths), False)
        assert sorted(tree_paths(tree, tree.root)) == sorted(tuple(p) for p in paths)


def test_path_count_saturates():
    tree = recognize_and_build_tree(_graph(4, [(0, 1), (1, 3), (0, 2), (2, 3)]))
    counts = count_paths(tree, limit=1)
    assert counts.saturated and counts.root == 1


def test_path_explosion(diamond):
    graph = normalize_two_terminal(diamond)
    with pytest.raises(PathExplosion):
        enumerate_paths(graph, cap=1)
    tree = recognize_and_build_tree(graph)
    with pytest.raises(PathExplosion):
        tree_paths(tree, tree.root, cap=1)


def test_outline_and_dot(diamond):
    tree = recognize_and_build_tree(normalize_two_terminal(diamond))
    outline = tree.outline()
    assert outline.startswith("P#")
    assert outline.count("\n") == len(tree.nodes)
    dot = tree.to_dot()
    assert dot.startswith("digraph sptree {")
    assert dot.count("->") == 2 * sum(not n.is_leaf for n in tree.nodes)
