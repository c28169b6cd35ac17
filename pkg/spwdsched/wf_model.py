"""Workflow and problem-instance data model.

Workflows are read from WfCommons instance files (both the 1.4-era
``workflow.tasks`` and the 1.5-era ``workflow.specification.tasks`` layout),
turned into dense-id DAGs, and combined with a machine pool into a
``WspInstance`` holding the execution time and cost matrices.
"""
import dataclasses
import json
import logging
from typing import Dict, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from spwdsched.utils import ConfigError, ParseError, PATH_COUNT_LIMIT, TOL

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class Task:
    """A workflow task."""
    id: int
    name: str
    base_runtime: float  # seconds at the reference speed


@dataclasses.dataclass(frozen=True)
class Machine:
    """A machine type of the pool."""
    id: int
    name: str
    speed: float  # GHz
    price: float  # per second
    core_count: int = 1


@dataclasses.dataclass(frozen=True)
class Workflow:
    """A DAG of tasks. Build with ``Workflow.create``."""
    tasks: Tuple[Task, ...]
    edges: Tuple[Tuple[int, int], ...]
    successors: Tuple[Tuple[int, ...], ...]
    predecessors: Tuple[Tuple[int, ...], ...]
    name: str = "workflow"

    @classmethod
    def create(cls, tasks: Sequence[Task], edges: Sequence[Tuple[int, int]],
               name: str = "workflow"):
        n = len(tasks)
        succ = [[] for _ in range(n)]
        pred = [[] for _ in range(n)]
        for u, v in edges:
            # out-of-range endpoints are kept in ``edges`` for validate() to report
            if 0 <= u < n and 0 <= v < n:
                succ[u].append(v)
                pred[v].append(u)
        return cls(tuple(tasks), tuple((int(u), int(v)) for u, v in edges),
                   tuple(tuple(sorted(s)) for s in succ),
                   tuple(tuple(sorted(p)) for p in pred), name)

    @property
    def num_tasks(self):
        return len(self.tasks)

    @property
    def roots(self) -> Tuple[int, ...]:
        return tuple(i for i, p in enumerate(self.predecessors) if not p)

    @property
    def leaves(self) -> Tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.successors) if not s)

    def to_networkx(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.num_tasks))
        graph.add_edges_from(self.edges)
        return graph

    def topological_order(self) -> List[int]:
        return list(nx.lexicographical_topological_sort(self.to_networkx()))


@dataclasses.dataclass(frozen=True)
class WspInstance:
    """Workflow, machine pool, time/cost matrices and deadline."""
    workflow: Workflow
    machines: Tuple[Machine, ...]
    time_matrix: np.ndarray  # t x m seconds
    cost_matrix: np.ndarray  # t x m currency
    deadline: float
    reference_speed: float = 1.0

    @property
    def num_machines(self):
        return len(self.machines)

    @property
    def mean_times(self) -> np.ndarray:
        if self.time_matrix.size == 0:
            return np.zeros(self.workflow.num_tasks)
        return self.time_matrix.mean(axis=1)

    def with_deadline(self, deadline: float):
        return dataclasses.replace(self, deadline=float(deadline))


@dataclasses.dataclass(frozen=True)
class ValidationReport:
    valid: bool
    roots: Tuple[int, ...]
    leaves: Tuple[int, ...]
    diagnostics: Tuple[str, ...]

    def __str__(self):
        lines = [f"valid: {self.valid}",
                 f"roots: {list(self.roots)}",
                 f"leaves: {list(self.leaves)}"]
        lines += [f"  - {d}" for d in self.diagnostics]
        return "\n".join(lines)


# WfCommons documents. Unknown fields are ignored on every level.
class _WfTask(BaseModel):
    model_config = ConfigDict(extra="ignore", populate_by_name=True)

    name: Union[str, int]
    id: Optional[Union[str, int]] = None
    runtime_in_seconds: Optional[float] = Field(default=None, alias="runtimeInSeconds")
    runtime: Optional[float] = None
    children: List[Union[str, int]] = Field(default_factory=list)
    parents: List[Union[str, int]] = Field(default_factory=list)

    @property
    def key(self) -> str:
        return str(self.id if self.id is not None else self.name)


class _WfExecutionTask(BaseModel):
    model_config = ConfigDict(extra="ignore", populate_by_name=True)

    id: Union[str, int]
    runtime_in_seconds: Optional[float] = Field(default=None, alias="runtimeInSeconds")


class _WfTaskList(BaseModel):
    model_config = ConfigDict(extra="ignore")

    tasks: List[_WfTask]


class _WfExecution(BaseModel):
    model_config = ConfigDict(extra="ignore")

    tasks: List[_WfExecutionTask] = Field(default_factory=list)


class _WfBody(BaseModel):
    model_config = ConfigDict(extra="ignore")

    tasks: Optional[List[_WfTask]] = None
    specification: Optional[_WfTaskList] = None
    execution: Optional[_WfExecution] = None


class _WfDocument(BaseModel):
    model_config = ConfigDict(extra="ignore")

    name: Optional[str] = None
    workflow: _WfBody


class _MachineRecord(BaseModel):
    model_config = ConfigDict(extra="ignore")

    name: str
    speed_ghz: float = Field(gt=0)
    price_per_second: float = Field(ge=0)
    core_count: int = Field(default=1, ge=1)


class _MachinePool(BaseModel):
    model_config = ConfigDict(extra="ignore")

    machines: List[_MachineRecord]


def _load_json(document: Union[bytes, str]):
    try:
        return json.loads(document)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ParseError(f"malformed document: {e}") from None


def parse_wfcommons(document: Union[bytes, str]) -> Workflow:
    """Parse a WfCommons instance into a Workflow.

    Tasks are indexed in first-seen order. Relations may be declared as
    ``children``, ``parents`` or both; duplicates collapse into one edge.
    """
    try:
        doc = _WfDocument.model_validate(_load_json(document))
    except ValidationError as e:
        raise ParseError(f"malformed WfCommons document: {e}") from None

    body = doc.workflow
    if body.specification is not None:
        raw_tasks = body.specification.tasks
    elif body.tasks is not None:
        raw_tasks = body.tasks
    else:
        raise ParseError("document has neither workflow.specification.tasks nor workflow.tasks")

    exec_runtimes = {}
    if body.execution is not None:
        exec_runtimes = {str(t.id): t.runtime_in_seconds for t in body.execution.tasks}

    index: Dict[str, int] = {}
    tasks = []
    for raw in raw_tasks:
        key = raw.key
        if key in index:
            raise ParseError(f"duplicate task {key!r}")
        runtime = raw.runtime_in_seconds
        if runtime is None:
            runtime = raw.runtime
        if runtime is None:
            runtime = exec_runtimes.get(key)
        if runtime is None:
            raise ParseError(f"task {key!r} has no runtime")
        if runtime < 0:
            raise ParseError(f"task {key!r} has negative runtime {runtime}")
        index[key] = len(tasks)
        tasks.append(Task(len(tasks), key, float(runtime)))

    def resolve(name, owner):
        try:
            return index[str(name)]
        except KeyError:
            raise ParseError(f"task {owner!r} references unknown task {str(name)!r}") from None

    edges = {}
    for raw in raw_tasks:
        me = index[raw.key]
        for child in raw.children:
            edges.setdefault((me, resolve(child, raw.key)), None)
        for parent in raw.parents:
            edges.setdefault((resolve(parent, raw.key), me), None)

    workflow = Workflow.create(tasks, list(edges), name=doc.name or "workflow")
    graph = workflow.to_networkx()
    if not nx.is_directed_acyclic_graph(graph):
        cycle = nx.find_cycle(graph)
        names = " -> ".join(tasks[u].name for u, _ in cycle)
        raise ParseError(f"cycle detected: {names} -> {tasks[cycle[0][0]].name}")

    logger.info("parsed workflow %s: %d tasks, %d edges",
                workflow.name, workflow.num_tasks, len(workflow.edges))
    return workflow


def serialize_wfcommons(workflow: Workflow) -> bytes:
    """Write the canonical WfCommons (1.5-era layout) form of a workflow."""
    tasks = []
    for task in workflow.tasks:
        tasks.append({
            "name": task.name,
            "id": task.name,
            "runtimeInSeconds": task.base_runtime,
            "parents": [workflow.tasks[p].name for p in workflow.predecessors[task.id]],
            "children": [workflow.tasks[c].name for c in workflow.successors[task.id]],
        })
    doc = {
        "name": workflow.name,
        "schemaVersion": "1.5",
        "workflow": {"specification": {"tasks": tasks}},
    }
    return (json.dumps(doc, indent=2) + "\n").encode("utf-8")


def parse_machines(document: Union[bytes, str]) -> List[Machine]:
    """Parse a machine-pool file: a list of machines or {"machines": [...]}."""
    data = _load_json(document)
    if isinstance(data, list):
        data = {"machines": data}
    try:
        pool = _MachinePool.model_validate(data)
    except ValidationError as e:
        raise ParseError(f"malformed machine file: {e}") from None
    return [Machine(i, r.name, r.speed_ghz, r.price_per_second, r.core_count)
            for i, r in enumerate(pool.machines)]


def reference_machines() -> List[Machine]:
    """Five machines from 1.0 to 2.0 GHz priced at speed squared."""
    speeds = (1.0, 1.25, 1.5, 1.75, 2.0)
    return [Machine(i, f"Machine{i + 1}", s, s * s, 5) for i, s in enumerate(speeds)]


def _time_matrix(workflow: Workflow, machines: Sequence[Machine], reference_speed: float):
    runtimes = np.array([t.base_runtime for t in workflow.tasks], dtype=np.float64)
    speeds = np.array([m.speed for m in machines], dtype=np.float64)
    return np.outer(runtimes, reference_speed / speeds).reshape(len(runtimes), len(speeds))


def make_instance(workflow: Workflow, machines: Sequence[Machine],
                  reference_speed: float = 1.0,
                  deadline: Optional[float] = None) -> WspInstance:
    """Build the WSP instance. ``deadline=None`` selects the critical path value."""
    if not machines:
        raise ConfigError("machine list is empty")
    if not reference_speed > 0:
        raise ConfigError(f"reference speed must be positive, got {reference_speed}")
    for i, m in enumerate(machines):
        if m.id != i:
            raise ConfigError(f"machine ids must be dense, {m.name} has id {m.id} at {i}")
        if not m.speed > 0 or m.price < 0:
            raise ConfigError(f"machine {m.name} needs speed > 0 and price >= 0")

    time_matrix = _time_matrix(workflow, machines, reference_speed)
    prices = np.array([m.price for m in machines], dtype=np.float64)
    cost_matrix = time_matrix * prices
    time_matrix.setflags(write=False)
    cost_matrix.setflags(write=False)

    instance = WspInstance(workflow, tuple(machines), time_matrix, cost_matrix,
                           float("nan"), float(reference_speed))
    if deadline is None:
        deadline = default_deadline(instance)
        logger.info("deadline set to the critical path value %.6g s", deadline)
    if not deadline > 0:
        raise ConfigError(f"deadline must be positive, got {deadline}")
    return instance.with_deadline(deadline)


def longest_path_time(workflow: Workflow, vertex_times: Sequence[float]) -> float:
    """Heaviest root-to-leaf path under per-task times."""
    best = {}
    for v in reversed(workflow.topological_order()):
        tail = max((best[c] for c in workflow.successors[v]), default=0.0)
        best[v] = vertex_times[v] + tail
    return max((best[r] for r in workflow.roots), default=0.0)


def default_deadline(instance: WspInstance) -> float:
    """Critical path value using per-task mean execution time."""
    assert instance.workflow.num_tasks > 0, "workflow has no tasks"
    return float(longest_path_time(instance.workflow, instance.mean_times))


def count_workflow_paths(workflow: Workflow, limit: int = PATH_COUNT_LIMIT) -> Tuple[int, bool]:
    """Number of root-to-leaf paths, saturated at ``limit``."""
    counts = {}
    saturated = False
    for v in reversed(workflow.topological_order()):
        succ = workflow.successors[v]
        n = sum(counts[c] for c in succ) if succ else 1
        if n > limit:
            n, saturated = limit, True
        counts[v] = n
    total = sum(counts[r] for r in workflow.roots)
    if total > limit:
        total, saturated = limit, True
    return total, saturated


def validate(workflow: Workflow) -> ValidationReport:
    diagnostics = []
    n = workflow.num_tasks
    for i, task in enumerate(workflow.tasks):
        if task.id != i:
            diagnostics.append(f"task {task.name!r} has id {task.id}, expected {i}")
        if task.base_runtime < 0:
            diagnostics.append(f"task {task.name!r} has negative runtime")

    seen = set()
    for u, v in workflow.edges:
        if not (0 <= u < n and 0 <= v < n):
            diagnostics.append(f"edge ({u}, {v}) references a nonexistent task")
            continue
        if u == v:
            diagnostics.append(f"self-loop on task {workflow.tasks[u].name!r}")
        if (u, v) in seen:
            diagnostics.append(f"duplicate edge ({u}, {v})")
        seen.add((u, v))

    graph = workflow.to_networkx()
    if not nx.is_directed_acyclic_graph(graph):
        cycle = nx.find_cycle(graph)
        diagnostics.append("cycle: " + " -> ".join(str(u) for u, _ in cycle))

    return ValidationReport(not diagnostics, workflow.roots, workflow.leaves, tuple(diagnostics))


def check_matrices(instance: WspInstance) -> bool:
    """Recompute both matrices from their defining formulas."""
    expected = _time_matrix(instance.workflow, instance.machines, instance.reference_speed)
    prices = np.array([m.price for m in instance.machines])
    return (np.allclose(instance.time_matrix, expected, rtol=0, atol=TOL)
            and np.allclose(instance.cost_matrix, expected * prices, rtol=0, atol=TOL))
