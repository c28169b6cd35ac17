"""Two-terminal series-parallel graphs and their binary decomposition trees.

A workflow is normalized to one source and one sink, mapped onto a
two-terminal series-parallel (TTSP) graph by inserting zero-workload
synchronization vertices where needed, and then reduced edge by edge into a
binary decomposition tree whose leaves are the graph's edges.
"""
import dataclasses
import enum
import heapq
import logging
from functools import cached_property
from typing import Dict, FrozenSet, List, Optional, Tuple

import attr
from attr import define, field
import networkx as nx

from spwdsched.utils import NotSeriesParallel, ParseError, PathExplosion, PATH_CAP, PATH_COUNT_LIMIT
from spwdsched.wf_model import Workflow

logger = logging.getLogger(__name__)


class VertexKind(enum.Enum):
    TASK = "task"
    SYNTHETIC = "synthetic"
    SUBSTITUTE = "substitute"


@dataclasses.dataclass(frozen=True)
class Vertex:
    id: int
    origin: Optional[int]  # task id; None for synthetic vertices
    kind: VertexKind = VertexKind.TASK


@dataclasses.dataclass(frozen=True)
class Edge:
    id: int
    tail: int
    head: int


@dataclasses.dataclass(frozen=True)
class TtspGraph:
    """A two-terminal DAG over vertex records with stable edge ids."""
    vertices: Tuple[Vertex, ...]
    edges: Tuple[Edge, ...]
    source: int
    sink: int

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_edges(self):
        return len(self.edges)

    @cached_property
    def vertex_map(self) -> Dict[int, Vertex]:
        return {v.id: v for v in self.vertices}

    @cached_property
    def out_edges(self) -> Dict[int, Tuple[Edge, ...]]:
        out = {v.id: [] for v in self.vertices}
        for e in self.edges:
            out[e.tail].append(e)
        return {v: tuple(sorted(es, key=lambda e: (e.head, e.id))) for v, es in out.items()}

    @cached_property
    def in_edges(self) -> Dict[int, Tuple[Edge, ...]]:
        inn = {v.id: [] for v in self.vertices}
        for e in self.edges:
            inn[e.head].append(e)
        return {v: tuple(sorted(es, key=lambda e: (e.tail, e.id))) for v, es in inn.items()}

    def vertex(self, vid: int) -> Vertex:
        return self.vertex_map[vid]

    def successors(self, vid: int) -> Tuple[int, ...]:
        return tuple(sorted({e.head for e in self.out_edges[vid]}))

    def next_vertex_id(self) -> int:
        return max((v.id for v in self.vertices), default=-1) + 1

    def next_edge_id(self) -> int:
        return max((e.id for e in self.edges), default=-1) + 1

    def to_networkx(self) -> nx.MultiDiGraph:
        graph = nx.MultiDiGraph()
        graph.add_nodes_from(sorted(self.vertex_map))
        graph.add_edges_from((e.tail, e.head, e.id) for e in self.edges)
        return graph

    def topological_order(self) -> List[int]:
        return list(nx.lexicographical_topological_sort(nx.DiGraph(self.to_networkx())))


class NodeKind(enum.Enum):
    LEAF = "L"
    SERIES = "S"
    PARALLEL = "P"


@define
class SpNode:
    """A node of the binary decomposition tree."""
    id: int
    kind: NodeKind
    source: int
    sink: int
    left: Optional[int] = None
    right: Optional[int] = None
    edge: Optional[int] = None  # leaves only
    # Series: vertex shared by both children; after substitution this is the
    # right child's source and ``bridge`` holds the left child's sink.
    connector: Optional[int] = None
    bridge: Optional[int] = None
    vertices: FrozenSet[int] = frozenset()
    weight: float = 0.0
    deadline: Optional[float] = None
    path_count: int = 1

    @property
    def vertex_count(self):
        return len(self.vertices)

    @property
    def is_leaf(self):
        return self.kind is NodeKind.LEAF


@define
class SpTree:
    """Arena of tree nodes. Children always precede their parents."""
    nodes: List[SpNode]
    root: int
    vertex_weights: Dict[int, float] = field(factory=dict)

    def __getitem__(self, nid: int) -> SpNode:
        return self.nodes[nid]

    @property
    def root_node(self) -> SpNode:
        return self.nodes[self.root]

    def copy(self) -> "SpTree":
        return SpTree([attr.evolve(n) for n in self.nodes], self.root, dict(self.vertex_weights))

    def preorder(self, start: Optional[int] = None) -> List[int]:
        order, stack = [], [self.root if start is None else start]
        while stack:
            nid = stack.pop()
            order.append(nid)
            node = self.nodes[nid]
            if not node.is_leaf:
                stack.append(node.right)
                stack.append(node.left)
        return order

    def subtree_edges(self, nid: int) -> List[int]:
        """Graph edge ids under a node, left to right, bridges included."""
        edges = []
        for i in self.preorder(nid):
            node = self.nodes[i]
            if node.is_leaf:
                edges.append(node.edge)
        return edges

    def bridges(self, nid: Optional[int] = None) -> List[Tuple[int, int]]:
        return [(self.nodes[i].bridge, self.nodes[i].connector) for i in self.preorder(nid)
                if self.nodes[i].bridge is not None]

    def outline(self) -> str:
        lines = []
        stack = [(self.root, 0)]
        while stack:
            nid, depth = stack.pop()
            node = self.nodes[nid]
            if node.is_leaf:
                label = f"L#{nid} e{node.edge} ({node.source}->{node.sink})"
            elif node.kind is NodeKind.SERIES:
                via = str(node.connector) if node.bridge is None else f"{node.bridge}=>{node.connector}"
                label = f"S#{nid} [{node.source}->{node.sink}] via {via}"
            else:
                label = f"P#{nid} [{node.source}->{node.sink}]"
            deadline = "-" if node.deadline is None else f"{node.deadline:.6g}"
            lines.append("  " * depth + f"{label} w={node.weight:.6g} d={deadline} "
                         f"n={node.vertex_count} paths={node.path_count}")
            if not node.is_leaf:
                stack.append((node.right, depth + 1))
                stack.append((node.left, depth + 1))
        return "\n".join(lines) + "\n"

    def to_dot(self) -> str:
        lines = ["digraph sptree {"]
        for node in self.nodes:
            text = node.kind.value if not node.is_leaf else f"e{node.edge}"
            lines.append(f'  {node.id} [label="{text}#{node.id}"];')
        for node in self.nodes:
            if not node.is_leaf:
                lines.append(f"  {node.id} -> {node.left};")
                lines.append(f"  {node.id} -> {node.right};")
        lines.append("}")
        return "\n".join(lines) + "\n"


@dataclasses.dataclass(frozen=True)
class PathCounts:
    per_node: Tuple[int, ...]
    saturated: bool
    root: int


def normalize_two_terminal(workflow: Workflow) -> TtspGraph:
    """Give the workflow a single source and a single sink.

    Vertex ids of tasks equal task ids. A synthetic super-source (super-sink)
    is appended only when several roots (leaves) exist; a lone task gets a
    synthetic sink so the graph has an edge.
    """
    if workflow.num_tasks == 0:
        raise ParseError("workflow has no tasks")

    vertices = [Vertex(t.id, t.id, VertexKind.TASK) for t in workflow.tasks]
    edges = [Edge(i, u, v) for i, (u, v) in enumerate(workflow.edges)]
    roots, leaves = workflow.roots, workflow.leaves

    if len(roots) > 1:
        source = len(vertices)
        vertices.append(Vertex(source, None, VertexKind.SYNTHETIC))
        edges += [Edge(len(edges) + i, source, r) for i, r in enumerate(roots)]
    else:
        source = roots[0]

    if len(leaves) > 1 or leaves[0] == source:
        sink = len(vertices)
        vertices.append(Vertex(sink, None, VertexKind.SYNTHETIC))
        edges += [Edge(len(edges) + i, l, sink) for i, l in enumerate(leaves)]
    else:
        sink = leaves[0]

    return TtspGraph(tuple(vertices), tuple(edges), source, sink)


def _saturate(n: int, limit: int = PATH_COUNT_LIMIT) -> int:
    return n if n <= limit else limit


class _Reduction:
    """Series/parallel reduction engine; scratch state lives for one call."""

    def __init__(self, graph: TtspGraph):
        self.graph = graph
        self.nodes: List[SpNode] = []
        self.edges: Dict[int, Tuple[int, int, int]] = {}  # working edge -> (tail, head, node)
        self.out: Dict[int, Dict[int, None]] = {v.id: {} for v in graph.vertices}
        self.inn: Dict[int, Dict[int, None]] = {v.id: {} for v in graph.vertices}
        self._next_edge = 0
        for e in sorted(graph.edges, key=lambda e: e.id):
            leaf = self._add_node(NodeKind.LEAF, e.tail, e.head, edge=e.id,
                                  vertices=frozenset((e.tail, e.head)), path_count=1)
            self._add_edge(e.tail, e.head, leaf.id)

    def _add_node(self, kind, source, sink, **kwargs) -> SpNode:
        node = SpNode(len(self.nodes), kind, source, sink, **kwargs)
        self.nodes.append(node)
        return node

    def _add_edge(self, tail, head, nid):
        wid = self._next_edge
        self._next_edge += 1
        self.edges[wid] = (tail, head, nid)
        self.out[tail][wid] = None
        self.inn[head][wid] = None

    def _remove_edge(self, wid):
        tail, head, _ = self.edges.pop(wid)
        del self.out[tail][wid]
        del self.inn[head][wid]

    def _series(self, v):
        (e1,), (e2,) = self.inn[v], self.out[v]
        u, _, left = self.edges[e1]
        _, w, right = self.edges[e2]
        l, r = self.nodes[left], self.nodes[right]
        node = self._add_node(NodeKind.SERIES, u, w, left=left, right=right, connector=v,
                              vertices=l.vertices | r.vertices,
                              path_count=_saturate(l.path_count * r.path_count))
        self._remove_edge(e1)
        self._remove_edge(e2)
        del self.out[v]
        del self.inn[v]
        self._add_edge(u, node.sink, node.id)
        return u, w

    def _parallel(self, v):
        by_head: Dict[int, List[int]] = {}
        for wid in self.out[v]:
            by_head.setdefault(self.edges[wid][1], []).append(wid)
        multi = sorted(h for h, ws in by_head.items() if len(ws) > 1)
        if not multi:
            return None
        head = multi[0]
        e1, e2 = sorted(by_head[head])[:2]
        l, r = self.nodes[self.edges[e1][2]], self.nodes[self.edges[e2][2]]
        node = self._add_node(NodeKind.PARALLEL, v, head, left=l.id, right=r.id,
                              vertices=l.vertices | r.vertices,
                              path_count=_saturate(l.path_count + r.path_count))
        self._remove_edge(e1)
        self._remove_edge(e2)
        self._add_edge(v, head, node.id)
        return v, head

    def run(self) -> "_Reduction":
        source, sink = self.graph.source, self.graph.sink
        heap = sorted(self.out)
        queued = set(heap)

        def push(*vs):
            for x in vs:
                if x in self.out and x not in queued:
                    queued.add(x)
                    heapq.heappush(heap, x)

        while heap:
            v = heapq.heappop(heap)
            queued.discard(v)
            if v not in self.out:
                continue
            if v != source and v != sink and len(self.inn[v]) == 1 and len(self.out[v]) == 1:
                push(*self._series(v))
                continue
            touched = self._parallel(v)
            if touched is not None:
                push(*touched)
        return self

    @property
    def complete(self) -> bool:
        if len(self.edges) != 1:
            return False
        tail, head, _ = next(iter(self.edges.values()))
        return tail == self.graph.source and head == self.graph.sink

    def leaf_edges(self, nid) -> List[int]:
        return SpTree(self.nodes, nid).subtree_edges(nid)


def _check_two_terminal(graph: TtspGraph):
    if graph.num_edges == 0:
        raise NotSeriesParallel("graph has no edges")
    sources = [v for v, es in graph.in_edges.items() if not es]
    sinks = [v for v, es in graph.out_edges.items() if not es]
    if sources != [graph.source] or sinks != [graph.sink]:
        raise NotSeriesParallel(f"graph is not two-terminal: sources {sources}, sinks {sinks}")


def recognize_and_build_tree(graph: TtspGraph) -> SpTree:
    """Reduce the graph to a single edge and return its decomposition tree.

    Vertices are visited in ascending id order and a series reduction is
    always tried before a parallel one at the same vertex, so equal inputs give
    equal trees.
    """
    _check_two_terminal(graph)
    reduction = _Reduction(graph).run()
    if not reduction.complete:
        raise NotSeriesParallel(
            f"reductions stalled with {len(reduction.edges)} edges left; map the graph first")
    (_, _, root), = reduction.edges.values()
    return SpTree(reduction.nodes, root)


def expand_tree(tree: SpTree) -> List[Tuple[int, int]]:
    """Replay the compositions: sorted (tail, head) pairs of leaves and bridges."""
    pairs = [(n.source, n.sink) for n in tree.nodes if n.is_leaf]
    pairs += tree.bridges()
    return sorted(pairs)


def _within_bounds(t: int, graph: TtspGraph) -> bool:
    t2 = graph.num_vertices
    if not t <= t2 <= 2 * t:
        return False
    return t2 < 3 or graph.num_edges <= 2 * (t2 - 2)


def _find_cross_edge(reduction: _Reduction) -> Optional[Tuple[int, int]]:
    """An edge (a, b) with out(a) >= 2 and in(b) >= 2 that can be synchronized.

    A synchronization vertex after b's predecessors and before a's other
    successors is acyclic only if none of those successors reaches one of
    those predecessors.
    """
    stalled = nx.DiGraph()
    stalled.add_edges_from((t, h) for t, h, _ in reduction.edges.values())
    order = list(nx.topological_sort(stalled))
    bit = {v: 1 << k for k, v in enumerate(order)}
    reach = {}  # vertex -> bitmask of itself and its descendants
    for v in reversed(order):
        mask = bit[v]
        for w in stalled.successors(v):
            mask |= reach[w]
        reach[v] = mask

    for a, b in sorted(stalled.edges):
        if stalled.out_degree(a) < 2 or stalled.in_degree(b) < 2:
            continue
        preds = 0
        for p in stalled.predecessors(b):
            if p != a:
                preds |= bit[p]
        if not any(reach[w] & preds for w in stalled.successors(a) if w != b):
            return a, b
    return None


def _synchronize(graph: TtspGraph, reduction: _Reduction, a: int, b: int) -> TtspGraph:
    x = graph.next_vertex_id()
    new_head, new_tail = {}, {}
    for tail, head, nid in reduction.edges.values():
        if head == b:
            for eid in reduction.leaf_edges(nid):
                new_head[eid] = x
        elif tail == a:
            for eid in reduction.leaf_edges(nid):
                new_tail[eid] = x

    edges = []
    for e in graph.edges:
        tail = new_tail.get(e.id, e.tail) if e.tail == a else e.tail
        head = new_head.get(e.id, e.head) if e.head == b else e.head
        edges.append(Edge(e.id, tail, head))
    edges.append(Edge(graph.next_edge_id(), x, b))
    vertices = graph.vertices + (Vertex(x, None, VertexKind.SYNTHETIC),)
    logger.debug("synchronization vertex %d inserted for cross edge (%d, %d)", x, a, b)
    return TtspGraph(vertices, tuple(edges), graph.source, graph.sink)


def _layered_barriers(graph: TtspGraph) -> TtspGraph:
    """Series of topological layers joined by synthetic barrier vertices."""
    layer = {}
    for v in graph.topological_order():
        layer[v] = max((layer[e.tail] + 1 for e in graph.in_edges[v]), default=0)
    layers: List[List[int]] = [[] for _ in range(max(layer.values()) + 1)]
    for v in sorted(layer):
        layers[layer[v]].append(v)

    vertices = list(graph.vertices)
    next_vertex = graph.next_vertex_id()
    edges: List[Edge] = []

    def add(tail, head):
        edges.append(Edge(len(edges), tail, head))

    join = layers[0][0]
    i, k = 1, len(layers) - 1
    while i <= k:
        members = layers[i]
        if len(members) == 1:
            add(join, members[0])
            join = members[0]
            i += 1
            continue
        if len(layers[i + 1]) == 1:
            target = layers[i + 1][0]
            i += 2
        else:
            target = next_vertex
            next_vertex += 1
            vertices.append(Vertex(target, None, VertexKind.SYNTHETIC))
            i += 1
        for v in members:
            add(join, v)
            add(v, target)
        join = target

    return TtspGraph(tuple(vertices), tuple(edges), graph.source, graph.sink)


def map_to_ttsp(graph: TtspGraph) -> TtspGraph:
    """Map a two-terminal DAG onto a TTSP graph preserving precedence.

    Stalled reductions are resolved one cross edge at a time by a synthetic
    synchronization vertex. When that cannot finish within t' <= 2t vertices
    and e' <= 2(t' - 2) edges, topological layers joined by barrier vertices
    are used instead. TTSP inputs are returned unchanged.
    """
    _check_two_terminal(graph)
    reduction = _Reduction(graph).run()
    if reduction.complete:
        return graph

    t = graph.num_vertices
    current = graph
    while not reduction.complete and current.num_vertices < 2 * t:
        cross = _find_cross_edge(reduction)
        if cross is None:
            break
        current = _synchronize(current, reduction, *cross)
        reduction = _Reduction(current).run()

    if reduction.complete and _within_bounds(t, current):
        logger.info("mapped to TTSP with %d synchronization vertices",
                    current.num_vertices - t)
        return current

    mapped = _layered_barriers(graph)
    assert _within_bounds(t, mapped), (
        f"layered mapping broke the size bounds: t={t}, t'={mapped.num_vertices}, "
        f"e'={mapped.num_edges}")
    logger.info("mapped to TTSP with layered barriers (%d vertices added)",
                mapped.num_vertices - t)
    return mapped


def count_paths(tree: SpTree, limit: int = PATH_COUNT_LIMIT) -> PathCounts:
    """Source-to-sink path count of every node, saturated at ``limit``."""
    counts = [0] * len(tree.nodes)
    saturated = False
    for node in tree.nodes:
        if node.is_leaf:
            n = 1
        elif node.kind is NodeKind.SERIES:
            n = counts[node.left] * counts[node.right]
        else:
            n = counts[node.left] + counts[node.right]
        if n > limit:
            n, saturated = limit, True
        counts[node.id] = n
    return PathCounts(tuple(counts), saturated, counts[tree.root])


def count_graph_paths(graph: TtspGraph, limit: int = PATH_COUNT_LIMIT) -> Tuple[int, bool]:
    """Distinct source-to-sink vertex paths by topological dynamic programming."""
    counts = {}
    saturated = False
    for v in reversed(graph.topological_order()):
        succ = graph.successors(v)
        n = sum(counts[w] for w in succ) if succ else 1
        if n > limit:
            n, saturated = limit, True
        counts[v] = n
    return counts[graph.source], saturated


def enumerate_paths(graph: TtspGraph, cap: int = PATH_CAP) -> List[List[int]]:
    """All source-to-sink vertex paths in lexicographic order."""
    total, _ = count_graph_paths(graph, limit=cap + 1)
    if total > cap:
        raise PathExplosion(f"graph has more than {cap} source-to-sink paths")

    paths = []
    stack = [(graph.source, [graph.source])]
    while stack:
        v, path = stack.pop()
        succ = graph.successors(v)
        if not succ:
            paths.append(path)
            continue
        for w in reversed(succ):
            stack.append((w, path + [w]))
    return paths


def tree_paths(tree: SpTree, nid: int, cap: int = PATH_CAP) -> List[Tuple[int, ...]]:
    """Vertex paths of a node's subgraph by recursion over the tree."""
    if tree[nid].path_count > cap:
        raise PathExplosion(f"subgraph of node {nid} has more than {cap} paths")
    memo: Dict[int, List[Tuple[int, ...]]] = {}
    for i in reversed(tree.preorder(nid)):
        node = tree[i]
        if node.is_leaf:
            memo[i] = [(node.source, node.sink)]
        elif node.kind is NodeKind.PARALLEL:
            memo[i] = memo.pop(node.left) + memo.pop(node.right)
        else:
            left, right = memo.pop(node.left), memo.pop(node.right)
            # a bridged connector is not shared: the right child starts at the substitute
            skip = 0 if node.bridge is not None else 1
            memo[i] = [l + r[skip:] for l in left for r in right]
    return memo[nid]


def induced_subgraph(graph: TtspGraph, tree: SpTree, nid: int) -> TtspGraph:
    """The subgraph a tree node spans, keeping global vertex and edge ids."""
    node = tree[nid]
    edge_ids = set(tree.subtree_edges(nid))
    bridges = set(tree.bridges(nid))
    edges = tuple(e for e in graph.edges
                  if e.id in edge_ids or (e.tail, e.head) in bridges)
    vertices = tuple(v for v in graph.vertices if v.id in node.vertices)
    return TtspGraph(vertices, edges, node.source, node.sink)
