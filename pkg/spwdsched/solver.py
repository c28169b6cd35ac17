"""Binary assignment model of the scheduling problem and its solvers.

Variables x[t, m] select machine m for task t. The objective sums
c[t, m] * x[t, m]; every task takes exactly one machine and every
source-to-sink path keeps sum(tau[t, m] * x[t, m]) within the deadline.
"""
import dataclasses
import logging
import math
import os
import tempfile
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pulp

from spwdsched.ttsp import SpTree, TtspGraph, VertexKind, enumerate_paths, tree_paths
from spwdsched.utils import (BRUTE_FORCE_LIMIT, ConfigError, DEFAULT_BUDGET, Infeasible,
    PATH_CAP, SpaceTooLarge, TOL)
from spwdsched.wf_model import WspInstance

logger = logging.getLogger(__name__)

SOLVERS = ("exact", "greedy")


@dataclasses.dataclass(frozen=True)
class Model:
    """Binary model over the schedulable tasks of a (sub)graph."""
    tasks: Tuple[int, ...]  # task ids
    machines: Tuple[int, ...]  # machine ids
    costs: np.ndarray  # len(tasks) x len(machines)
    times: np.ndarray
    paths: Tuple[Tuple[int, ...], ...]  # positions into ``tasks``
    deadline: float

    @property
    def num_variables(self):
        return len(self.tasks) * len(self.machines)

    @property
    def num_constraints(self):
        return len(self.tasks) + len(self.paths)

    def variable(self, task_pos: int, machine_pos: int) -> int:
        return task_pos * len(self.machines) + machine_pos

    def variable_name(self, task_pos: int, machine_pos: int) -> str:
        return f"x_{self.tasks[task_pos]}_{self.machines[machine_pos]}"


@dataclasses.dataclass(frozen=True)
class Schedule:
    """Task to machine assignment."""
    assignment: Dict[int, int]
    cost: float
    max_path_time: float
    feasible: bool
    proven: bool = True  # False when the search budget ran out


class ProblemSize(NamedTuple):
    variables: int
    constraints: int


def build_model(subgraph: TtspGraph, deadline: float, instance: WspInstance,
                tree: Optional[SpTree] = None, node: Optional[int] = None,
                cap: int = PATH_CAP) -> Model:
    """Model of a subgraph. Paths come from the tree node when given.

    Zero-weight vertices (synthetic, substitute, zero runtime) get no
    variables and add nothing to path sums. Paths that reduce to the same task
    sequence yield one constraint; paths without tasks yield none.
    """
    if deadline < 0:
        raise ConfigError(f"deadline must not be negative, got {deadline}")
    means = instance.mean_times
    schedulable = [v for v in sorted(subgraph.vertices, key=lambda v: v.id)
                   if v.kind is VertexKind.TASK and means[v.origin] > 0]
    position = {v.id: i for i, v in enumerate(schedulable)}
    tasks = tuple(v.origin for v in schedulable)

    if tree is not None:
        raw_paths = tree_paths(tree, tree.root if node is None else node, cap)
    else:
        raw_paths = enumerate_paths(subgraph, cap)

    paths = {}
    for path in raw_paths:
        members = tuple(position[v] for v in path if v in position)
        if members:
            paths.setdefault(members, None)

    rows = list(tasks)
    shape = (len(rows), instance.num_machines)  # keeps the column count when rows is empty
    model = Model(tasks, tuple(m.id for m in instance.machines),
                  np.array(instance.cost_matrix[rows], dtype=np.float64).reshape(shape),
                  np.array(instance.time_matrix[rows], dtype=np.float64).reshape(shape),
                  tuple(paths), float(deadline))
    logger.debug("model: %d tasks, %d paths, deadline %.6g", len(tasks), len(paths), deadline)
    return model


def problem_size(model: Model) -> ProblemSize:
    return ProblemSize(model.num_variables, model.num_constraints)


def _schedule(model: Model, choice: Sequence[int], proven: bool = True) -> Schedule:
    n = len(model.tasks)
    cost = float(sum(model.costs[i, choice[i]] for i in range(n)))
    max_time = max((float(sum(model.times[i, choice[i]] for i in path)) for path in model.paths),
                   default=0.0)
    assignment = {model.tasks[i]: model.machines[choice[i]] for i in range(n)}
    return Schedule(assignment, cost, max_time, max_time <= model.deadline + TOL, proven)


def _task_paths(model: Model) -> List[List[int]]:
    task_paths = [[] for _ in model.tasks]
    for p, path in enumerate(model.paths):
        for i in path:
            task_paths[i].append(p)
    return task_paths


def solve_greedy(model: Model) -> Schedule:
    """Start on the fastest machines, then take the best cost-saving moves.

    A move shifts one task to a cheaper machine. Moves are ranked by cost
    saved per second of slack consumed and must keep every path within the
    deadline.
    """
    n, m = model.times.shape if model.tasks else (0, len(model.machines))
    if n == 0:
        return _schedule(model, [])
    times, costs = model.times.tolist(), model.costs.tolist()
    limit = model.deadline + TOL
    task_paths = _task_paths(model)

    choice = [min(range(m), key=lambda j: (times[i][j], costs[i][j], j)) for i in range(n)]
    path_time = [sum(times[i][choice[i]] for i in path) for path in model.paths]
    if any(t > limit for t in path_time):
        raise Infeasible(f"fastest machines miss the deadline {model.deadline:.6g} s")

    moves = 0
    while True:
        best = None
        for i in range(n):
            cur = choice[i]
            for j in range(m):
                saving = costs[i][cur] - costs[i][j]
                if saving <= 0:
                    continue
                delta = times[i][j] - times[i][cur]
                if any(path_time[p] + delta > limit for p in task_paths[i]):
                    continue
                ratio = saving / delta if delta > 0 else math.inf
                key = (ratio, saving, -i, -j)
                if best is None or key > best[0]:
                    best = (key, i, j, delta)
        if best is None:
            break
        _, i, j, delta = best
        for p in task_paths[i]:
            path_time[p] += delta
        choice[i] = j
        moves += 1

    logger.debug("greedy: %d moves", moves)
    return _schedule(model, choice)


def solve_exact(model: Model, budget: int = DEFAULT_BUDGET) -> Schedule:
    """Depth-first branch-and-bound.

    Tasks are branched in descending mean execution time, machines in
    ascending cost (lower id first on ties). A branch is cut when its cost plus
    the cheapest completion reaches the incumbent, or when a path's committed
    time plus the fastest completion of that path exceeds the deadline. When
    more than ``budget`` nodes are visited the incumbent is returned with
    ``proven=False``.
    """
    n = len(model.tasks)
    if n == 0:
        return _schedule(model, [])
    m = len(model.machines)

    # feasibility is decided by the all-fastest assignment, which greedy starts from
    incumbent = solve_greedy(model)
    index = {mid: j for j, mid in enumerate(model.machines)}
    best_choice = [index[incumbent.assignment[t]] for t in model.tasks]
    best_cost = incumbent.cost

    times, costs = model.times.tolist(), model.costs.tolist()
    limit = model.deadline + TOL
    task_paths = _task_paths(model)
    order = sorted(range(n), key=lambda i: (-sum(times[i]) / m, i))
    machine_order = [sorted(range(m), key=lambda j: (costs[i][j], j)) for i in range(n)]
    min_time = [min(row) for row in times]
    suffix = [0.0] * (n + 1)
    for k in reversed(range(n)):
        suffix[k] = suffix[k + 1] + min(costs[order[k]])

    committed = [0.0] * len(model.paths)
    remaining = [sum(min_time[i] for i in path) for path in model.paths]
    choice = [-1] * n
    cursor = [0] * n
    cost = 0.0
    depth = 0
    nodes = 0
    exhausted = False

    while depth >= 0:
        i = order[depth]
        j = choice[i]
        if j >= 0:
            cost -= costs[i][j]
            for p in task_paths[i]:
                committed[p] -= times[i][j]
                remaining[p] += min_time[i]
            choice[i] = -1

        action = "backtrack"
        while cursor[depth] < m:
            j = machine_order[i][cursor[depth]]
            cursor[depth] += 1
            nodes += 1
            if nodes > budget:
                action = "stop"
                break
            c = cost + costs[i][j]
            if c + suffix[depth + 1] >= best_cost:
                break
            t = times[i][j]
            if any(committed[p] + t + remaining[p] - min_time[i] > limit for p in task_paths[i]):
                continue
            cost = c
            for p in task_paths[i]:
                committed[p] += t
                remaining[p] -= min_time[i]
            choice[i] = j
            if depth == n - 1:
                best_cost, best_choice = cost, list(choice)
                action = "retry"
            else:
                depth += 1
                action = "descend"
            break

        if action == "stop":
            exhausted = True
            break
        if action == "backtrack":
            cursor[depth] = 0
            depth -= 1

    if exhausted:
        logger.warning("branch-and-bound budget of %d nodes exhausted; incumbent not proven", budget)
    logger.debug("branch-and-bound: %d nodes, cost %.6g", nodes, best_cost)
    return _schedule(model, best_choice, proven=not exhausted)


def brute_force(model: Model, limit: int = BRUTE_FORCE_LIMIT, chunk: int = 1 << 16) -> Schedule:
    """Exhaustive minimum over all m**t assignments (test oracle)."""
    n, m = len(model.tasks), len(model.machines)
    if n == 0:
        return _schedule(model, [])
    space = m ** n
    if space > limit:
        raise SpaceTooLarge(f"{m}^{n} assignments exceed the limit of {limit}")

    rows = np.arange(n)
    best_cost, best_index = math.inf, None
    for start in range(0, space, chunk):
        combos = np.stack(np.unravel_index(np.arange(start, min(start + chunk, space)),
                                           (m,) * n), axis=1)
        total = model.costs[rows, combos].sum(axis=1)
        ok = np.ones(len(combos), dtype=bool)
        for path in model.paths:
            cols = list(path)
            ok &= model.times[cols, combos[:, cols]].sum(axis=1) <= model.deadline + TOL
        if not ok.any():
            continue
        masked = np.where(ok, total, np.inf)
        k = int(np.argmin(masked))
        if masked[k] < best_cost:
            best_cost, best_index = masked[k], start + k

    if best_index is None:
        raise Infeasible("no assignment meets every path deadline")
    choice = [int(c) for c in np.unravel_index(best_index, (m,) * n)]
    return _schedule(model, choice)


def solve(model: Model, solver: str = "exact", budget: int = DEFAULT_BUDGET) -> Schedule:
    if solver == "exact":
        return solve_exact(model, budget)
    elif solver == "greedy":
        return solve_greedy(model)
    else:
        raise ConfigError(f"unknown solver {solver!r}, expected one of {SOLVERS}")


def export_lp(model: Model) -> bytes:
    """The model in LP text format, variables named x_<task>_<machine>."""
    prob = pulp.LpProblem("spwd", pulp.LpMinimize)
    n, m = len(model.tasks), len(model.machines)
    x = [[pulp.LpVariable(model.variable_name(i, j), cat=pulp.LpBinary) for j in range(m)]
         for i in range(n)]

    prob += pulp.lpSum(float(model.costs[i, j]) * x[i][j]
                       for i in range(n) for j in range(m)), "cost"
    for i in range(n):
        prob += pulp.lpSum(x[i]) == 1, f"onehot_{model.tasks[i]}"
    for k, path in enumerate(model.paths):
        prob += (pulp.lpSum(float(model.times[i, j]) * x[i][j] for i in path for j in range(m))
                 <= model.deadline), f"path_{k}"

    with tempfile.TemporaryDirectory() as tmp:
        filename = os.path.join(tmp, "model.lp")
        prob.writeLP(filename)
        with open(filename, "rb") as f:
            return f.read()
