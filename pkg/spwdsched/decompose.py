"""Weighting, deadline distribution and division of the decomposition tree.

The pipeline run by ``plan``:

    normalize -> map -> build tree -> weights -> divide (frontier)
      -> substitute series connectors above the frontier -> weights
      -> deadlines -> one SubProblem per frontier node

The frontier is computed before the substitution step because substitution
only applies to series nodes that stay above the cut.
"""
import collections
import dataclasses
import logging
from typing import Dict, FrozenSet, List, Sequence, Tuple, Union

from spwdsched.ttsp import (NodeKind, SpTree, TtspGraph, Vertex, VertexKind, Edge,
    induced_subgraph, map_to_ttsp, normalize_two_terminal, recognize_and_build_tree)
from spwdsched.utils import ConfigError, SizeSpec, parse_size_spec
from spwdsched.wf_model import WspInstance

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class SubProblem:
    """Subgraph of one frontier node with its local deadline."""
    id: int
    node: int
    graph: TtspGraph
    deadline: float
    weight: float
    boundary: FrozenSet[int]  # vertices shared with sibling subproblems

    @property
    def vertex_count(self):
        return self.graph.num_vertices


@dataclasses.dataclass(frozen=True)
class DecompositionPlan:
    normalized: TtspGraph  # before mapping
    graph: TtspGraph  # mapped, with substitute vertices
    tree: SpTree
    frontier: Tuple[int, ...]
    subproblems: Tuple[SubProblem, ...]
    substitutes: Dict[int, int]  # substitute vertex -> task id
    max_size: int

    @property
    def is_divided(self):
        return self.frontier != (self.tree.root,)


def vertex_weights(graph: TtspGraph, instance: WspInstance) -> Dict[int, float]:
    """Mean execution time over all machines; zero for non-task vertices."""
    means = instance.mean_times
    return {v.id: float(means[v.origin]) if v.kind is VertexKind.TASK else 0.0
            for v in graph.vertices}


def assign_weights(tree: SpTree, graph: TtspGraph, instance: WspInstance) -> SpTree:
    """Populate node weights bottom-up.

    Leaf: w(tail) + w(head). Series: w(left) + w(right) - w(connector).
    Parallel: max(w(left), w(right)).
    """
    tree = tree.copy()
    weights = vertex_weights(graph, instance)
    tree.vertex_weights = weights
    for node in tree.nodes:
        if node.is_leaf:
            node.weight = weights[node.source] + weights[node.sink]
        elif node.kind is NodeKind.SERIES:
            node.weight = (tree[node.left].weight + tree[node.right].weight
                           - weights[node.connector])
        else:
            node.weight = max(tree[node.left].weight, tree[node.right].weight)
    return tree


def resolve_max_size(spec: Union[int, str, SizeSpec], vertex_count: int) -> int:
    """Absolute size, or a percentage of ``vertex_count`` rounded up (at least 2)."""
    size = parse_size_spec(spec).resolve(vertex_count)
    if size < 2:
        raise ConfigError(f"max subgraph size must be at least 2, got {size}")
    return size


def divide(tree: SpTree, s: int) -> Tuple[int, ...]:
    """Cut the tree top-down at the first nodes spanning at most ``s`` vertices."""
    if s < 2:
        raise ConfigError(f"max subgraph size must be at least 2, got {s}")
    frontier = []
    stack = [tree.root]
    while stack:
        nid = stack.pop()
        node = tree[nid]
        if node.vertex_count <= s:
            frontier.append(nid)
        else:
            stack.append(node.right)
            stack.append(node.left)
    return tuple(frontier)


def _above_frontier(tree: SpTree, frontier: Sequence[int]) -> List[int]:
    cut = set(frontier)
    above = []
    stack = [tree.root]
    while stack:
        nid = stack.pop()
        if nid in cut:
            continue
        above.append(nid)
        node = tree[nid]
        if not node.is_leaf:
            stack.append(node.right)
            stack.append(node.left)
    return above


def modify_series_nodes(tree: SpTree, graph: TtspGraph, frontier: Sequence[int]
                        ) -> Tuple[SpTree, TtspGraph, Dict[int, int]]:
    """Give every weighted series connector above the frontier a substitute.

    For connector v a zero-weight vertex v' takes over v's outgoing edges and
    the edge (v, v') is added. The right child then starts at v', so v's
    workload counts in the left child only. Needs ``tree.vertex_weights``.
    """
    tree = tree.copy()
    weights = tree.vertex_weights
    vertices = list(graph.vertices)
    edges = list(graph.edges)
    next_vertex, next_edge = graph.next_vertex_id(), graph.next_edge_id()
    substitutes = {}

    parent = {}
    for node in tree.nodes:
        if not node.is_leaf:
            parent[node.left] = node.id
            parent[node.right] = node.id

    for nid in _above_frontier(tree, frontier):
        node = tree[nid]
        if node.kind is not NodeKind.SERIES or node.bridge is not None:
            continue
        v = node.connector
        if weights.get(v, 0.0) == 0.0:
            continue

        sub = next_vertex
        next_vertex += 1
        origin = graph.vertex(v).origin
        vertices.append(Vertex(sub, origin, VertexKind.SUBSTITUTE))
        weights[sub] = 0.0
        substitutes[sub] = origin

        edges = [Edge(e.id, sub, e.head) if e.tail == v else e for e in edges]
        edges.append(Edge(next_edge, v, sub))
        next_edge += 1

        for i in tree.preorder(node.right):
            n = tree[i]
            if n.source == v:
                n.source = sub
            if v in n.vertices:
                n.vertices = (n.vertices - {v}) | {sub}
        node.connector, node.bridge = sub, v

        up = nid
        while up is not None:
            tree[up].vertices = tree[up].vertices | {sub}
            up = parent.get(up)

    if substitutes:
        logger.info("created %d substitute vertices", len(substitutes))
    modified = TtspGraph(tuple(vertices), tuple(edges), graph.source, graph.sink)
    return tree, modified, substitutes


def distribute_deadline(tree: SpTree, d: float) -> SpTree:
    """Series children split the parent's deadline by weight, parallel children inherit it."""
    if not d > 0:
        raise ConfigError(f"deadline must be positive, got {d}")
    tree = tree.copy()
    tree.root_node.deadline = d
    for nid in tree.preorder():
        node = tree[nid]
        if node.is_leaf:
            continue
        left, right = tree[node.left], tree[node.right]
        if node.kind is NodeKind.PARALLEL:
            left.deadline = right.deadline = node.deadline
            continue
        total = left.weight + right.weight
        if total > 0:
            # clamp, d*lw/total can round past d
            left.deadline = min(node.deadline, node.deadline * left.weight / total)
        else:
            # no workload on either side, any split is feasible
            logger.debug("zero-weight split at series node %d", nid)
            left.deadline = node.deadline / 2
        right.deadline = max(0.0, node.deadline - left.deadline)
    return tree


def extract_subproblems(tree: SpTree, graph: TtspGraph, frontier: Sequence[int]
                        ) -> Tuple[SubProblem, ...]:
    occurrences = collections.Counter(v for nid in frontier for v in tree[nid].vertices)
    subproblems = []
    for k, nid in enumerate(frontier):
        node = tree[nid]
        boundary = frozenset(v for v in node.vertices if occurrences[v] > 1)
        subproblems.append(SubProblem(k, nid, induced_subgraph(graph, tree, nid),
                                      node.deadline, node.weight, boundary))
    return tuple(subproblems)


def plan(instance: WspInstance, s: Union[int, str, SizeSpec]) -> DecompositionPlan:
    """Decompose an instance into subproblems of at most ``s`` vertices."""
    normalized = normalize_two_terminal(instance.workflow)
    mapped = map_to_ttsp(normalized)
    tree = recognize_and_build_tree(mapped)
    size = resolve_max_size(s, mapped.num_vertices)

    tree = assign_weights(tree, mapped, instance)
    frontier = divide(tree, size)
    tree, graph, substitutes = modify_series_nodes(tree, mapped, frontier)
    tree = assign_weights(tree, graph, instance)
    tree = distribute_deadline(tree, instance.deadline)
    subproblems = extract_subproblems(tree, graph, frontier)

    logger.info("plan: %d vertices after mapping, s=%d, %d subproblems",
                mapped.num_vertices, size, len(subproblems))
    return DecompositionPlan(normalized, graph, tree, frontier, subproblems,
                             substitutes, size)


PLAN_COLUMNS = ("subproblem_id", "vertex_count", "weight_s", "deadline_s", "boundary_size")


def plan_rows(plan: DecompositionPlan) -> List[Dict[str, object]]:
    return [{
        "subproblem_id": sub.id,
        "vertex_count": sub.vertex_count,
        "weight_s": sub.weight,
        "deadline_s": sub.deadline,
        "boundary_size": len(sub.boundary),
    } for sub in plan.subproblems]


def plan_report(plan: DecompositionPlan) -> str:
    lines = [f"max subgraph size: {plan.max_size}",
             f"mapped vertices: {plan.graph.num_vertices}",
             f"substitute vertices: {len(plan.substitutes)}",
             f"subproblems: {len(plan.subproblems)}"]
    for sub in plan.subproblems:
        lines.append(f"  #{sub.id} node {sub.node}: {sub.vertex_count} vertices, "
                     f"weight {sub.weight:.6g} s, deadline {sub.deadline:.6g} s, "
                     f"boundary {sorted(sub.boundary)}")
    return "\n".join(lines) + "\n"
