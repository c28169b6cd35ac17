import numpy as np
import pytest

from spwdsched.decompose import (assign_weights, distribute_deadline, divide, plan, plan_report,
    plan_rows, resolve_max_size)
from spwdsched.generate import random_sp
from spwdsched.merge import build_models
from spwdsched.ttsp import (NodeKind, VertexKind, enumerate_paths, map_to_ttsp,
    normalize_two_terminal, recognize_and_build_tree)
from spwdsched.utils import ConfigError
from spwdsched.wf_model import make_instance, reference_machines

import helpers


def _chain_instance(runtimes, deadline):
    return make_instance(helpers.chain(runtimes), helpers.one_machine(), 1.0, deadline)


def test_weights_diamond(diamond_instance):
    graph = normalize_two_terminal(diamond_instance.workflow)
    tree = assign_weights(recognize_and_build_tree(graph), graph, diamond_instance)
    assert tree.vertex_weights == {0: 1.5, 1: 3.0, 2: 3.0, 3: 1.5}
    root = tree.root_node
    assert root.kind is NodeKind.PARALLEL
    assert tree[root.left].weight == pytest.approx(6.0)
    assert tree[root.right].weight == pytest.approx(6.0)
    assert root.weight == pytest.approx(6.0)


def test_series_deadline_split():
    instance = _chain_instance([1, 1, 1], 3.0)
    graph = normalize_two_terminal(instance.workflow)
    tree = assign_weights(recognize_and_build_tree(graph), graph, instance)
    root = tree.root_node
    assert (tree[root.left].weight, tree[root.right].weight, root.weight) == (2.0, 2.0, 3.0)
    tree = distribute_deadline(tree, 3.0)
    assert tree[root.left].deadline == pytest.approx(1.5)
    assert tree[root.right].deadline == pytest.approx(1.5)


def test_series_split_after_substitution():
    p = plan(_chain_instance([1, 1, 1], 3.0), 2)
    assert len(p.substitutes) == 1
    (sub_vertex, task), = p.substitutes.items()
    assert task == 1
    assert p.graph.vertex(sub_vertex).kind is VertexKind.SUBSTITUTE
    root = p.tree.root_node
    assert root.connector == sub_vertex and root.bridge == 1
    assert [p.tree[root.left].weight, p.tree[root.right].weight] == [2.0, 1.0]
    assert root.weight == 3.0
    assert [s.deadline for s in p.subproblems] == pytest.approx([2.0, 1.0])
    assert [s.vertex_count for s in p.subproblems] == [2, 2]


def test_zero_weight_connector_is_not_substituted():
    p = plan(_chain_instance([1, 0, 1], 2.0), 2)
    assert p.substitutes == {}
    assert [s.deadline for s in p.subproblems] == pytest.approx([1.0, 1.0])


def test_zero_weight_subproblem_gets_zero_deadline():
    p = plan(_chain_instance([1, 1, 0], 2.0), 2)
    assert [s.deadline for s in p.subproblems] == pytest.approx([2.0, 0.0])
    assert [s.weight for s in p.subproblems] == [2.0, 0.0]


def test_plan_diamond(diamond_instance):
    p = plan(diamond_instance, 3)
    assert p.is_divided
    assert p.max_size == 3
    assert [sorted(v.id for v in s.graph.vertices) for s in p.subproblems] == [[0, 1, 3], [0, 2, 3]]
    assert [s.deadline for s in p.subproblems] == [6.0, 6.0]
    assert all(s.boundary == frozenset({0, 3}) for s in p.subproblems)

    whole = plan(diamond_instance, 4)
    assert not whole.is_divided
    assert len(whole.subproblems) == 1
    assert whole.subproblems[0].deadline == 6.0


def test_plan_rows_and_report(diamond_instance):
    p = plan(diamond_instance, "75%")
    rows = plan_rows(p)
    assert [r["vertex_count"] for r in rows] == [3, 3]
    assert [r["boundary_size"] for r in rows] == [2, 2]
    text = plan_report(p)
    assert "max subgraph size: 3" in text
    assert "subproblems: 2" in text


def test_resolve_max_size():
    assert resolve_max_size("75%", 4) == 3
    assert resolve_max_size("1%", 4) == 2
    assert resolve_max_size(5, 100) == 5
    for bad in ("0%", "101%", "1", "x"):
        with pytest.raises(ConfigError):
            resolve_max_size(bad, 10)


def test_divide_rejects_small_sizes(diamond_instance):
    graph = normalize_two_terminal(diamond_instance.workflow)
    with pytest.raises(ConfigError):
        divide(recognize_and_build_tree(graph), 1)


def test_deadline_must_be_positive(diamond_instance):
    graph = normalize_two_terminal(diamond_instance.workflow)
    tree = recognize_and_build_tree(graph)
    with pytest.raises(ConfigError):
        distribute_deadline(tree, 0.0)


def test_long_chain_division():
    p = plan(_chain_instance([1] * 9, 9.0), 2)
    assert len(p.frontier) == 8
    assert all(p.tree[nid].is_leaf for nid in p.frontier)
    assert sum(s.deadline for s in p.subproblems) == pytest.approx(9.0)


def _random_instances(seed, count, max_tasks=40):
    rng = np.random.default_rng(seed)
    for k in range(count):
        n = int(rng.integers(2, max_tasks + 1))
        wf = random_sp(n, rng) if k % 2 else helpers.random_dag(rng, n, max_parents=2, window=6)
        yield make_instance(wf, reference_machines())


def test_substituted_connectors_carry_no_weight():
    for instance in _random_instances(1, 40):
        undivided = plan(instance, "100%")
        for size in ("50%", "25%", "10%", 2):
            p = plan(instance, size)
            weights = p.tree.vertex_weights
            frontier = set(p.frontier)
            stack = [p.tree.root]
            while stack:
                nid = stack.pop()
                if nid in frontier:
                    continue
                node = p.tree[nid]
                if node.kind is NodeKind.SERIES:
                    assert weights[node.connector] == 0.0
                if not node.is_leaf:
                    stack += [node.left, node.right]
            assert p.tree.root_node.weight == pytest.approx(undivided.tree.root_node.weight)
            assert all(s.vertex_count <= p.max_size for s in p.subproblems)

            covered = {v.origin for s in p.subproblems for v in s.graph.vertices
                       if v.kind is VertexKind.TASK}
            assert covered == set(range(instance.workflow.num_tasks))


def test_weights_match_heaviest_path():
    for instance in _random_instances(2, 60):
        graph = map_to_ttsp(normalize_two_terminal(instance.workflow))
        tree = assign_weights(recognize_and_build_tree(graph), graph, instance)
        heaviest = max(sum(tree.vertex_weights[v] for v in path)
                       for path in enumerate_paths(graph))
        assert tree.root_node.weight == pytest.approx(heaviest)


def test_series_children_deadlines_add_up():
    for instance in _random_instances(3, 30):
        p = plan(instance, 2)
        for node in p.tree.nodes:
            if node.kind is NodeKind.SERIES:
                left, right = p.tree[node.left], p.tree[node.right]
                assert left.deadline + right.deadline == pytest.approx(node.deadline)
            elif node.kind is NodeKind.PARALLEL:
                assert p.tree[node.left].deadline == node.deadline


def test_subproblem_deadlines_are_never_negative():
    for instance in _random_instances(6, 80, max_tasks=60):
        for size in ("75%", "50%", "25%", "10%", "5%"):
            p = plan(instance, size)
            for node in p.tree.nodes:
                assert 0.0 <= node.deadline <= instance.deadline
            if p.tree.root_node.path_count <= 20000:
                assert all(m.deadline >= 0.0 for m in build_models(p, instance))


def test_subproblem_count_grows_as_size_shrinks():
    for instance in _random_instances(4, 20, max_tasks=60):
        counts = [len(plan(instance, f"{pct}%").subproblems)
                  for pct in (100, 75, 50, 25, 15, 10, 5, 2, 1)]
        assert counts == sorted(counts)
        assert counts[0] == 1
