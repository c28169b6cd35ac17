"""Solve every subproblem and merge the subschedules into one schedule."""
import concurrent.futures
import dataclasses
import logging
from typing import Dict, List, Optional, Sequence, Tuple, Union

from spwdsched.decompose import DecompositionPlan, plan as make_plan
from spwdsched.solver import Model, Schedule, build_model, solve
from spwdsched.ttsp import VertexKind, normalize_two_terminal
from spwdsched.utils import (DEFAULT_BUDGET, InfeasibleMerge, MissingSubschedule, PATH_CAP,
    SizeSpec, TOL)
from spwdsched.wf_model import WspInstance, count_workflow_paths, longest_path_time

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class Collision:
    task: int
    candidates: Tuple[int, ...]  # machine ids
    chosen: int


@dataclasses.dataclass(frozen=True)
class PathCheck:
    tasks: Tuple[int, ...]
    time: float
    slack: float


@dataclasses.dataclass(frozen=True)
class ScheduleValidation:
    paths: Tuple[PathCheck, ...]  # empty when checked by longest path only
    max_path_time: float
    min_slack: float
    one_hot: bool
    feasible: bool
    by_longest_path: bool = False


@dataclasses.dataclass(frozen=True)
class MergeReport:
    schedule: Schedule
    collisions: Tuple[Collision, ...]
    substitute_resolutions: int
    validation: ScheduleValidation

    def describe(self, instance: WspInstance) -> str:
        tasks, machines = instance.workflow.tasks, instance.machines
        lines = [f"cost: {self.schedule.cost:.9g}",
                 f"max path time: {self.schedule.max_path_time:.9g} s",
                 f"deadline: {instance.deadline:.9g} s",
                 f"feasible: {self.schedule.feasible}",
                 f"proven: {self.schedule.proven}",
                 f"substitute resolutions: {self.substitute_resolutions}",
                 f"collisions: {len(self.collisions)}"]
        for c in self.collisions:
            names = ", ".join(machines[m].name for m in c.candidates)
            lines.append(f"  {tasks[c.task].name}: [{names}] -> {machines[c.chosen].name}")
        lines.append(f"min slack: {self.validation.min_slack:.9g} s")
        return "\n".join(lines) + "\n"


def _workflow_paths(instance: WspInstance) -> List[Tuple[int, ...]]:
    wf = instance.workflow
    paths = []
    stack = [(r, (r,)) for r in reversed(wf.roots)]
    while stack:
        v, path = stack.pop()
        succ = wf.successors[v]
        if not succ:
            paths.append(path)
            continue
        for w in reversed(succ):
            stack.append((w, path + (w,)))
    return paths


def validate_schedule(schedule: Schedule, instance: WspInstance,
                      cap: int = PATH_CAP) -> ScheduleValidation:
    """Check one machine per task and every root-to-leaf path against the deadline.

    Beyond ``cap`` paths only the heaviest path is checked, by dynamic
    programming; that decides feasibility exactly because times are
    non-negative.
    """
    wf = instance.workflow
    n, m = wf.num_tasks, instance.num_machines
    assignment = schedule.assignment
    one_hot = (set(assignment) == set(range(n))
               and all(0 <= a < m for a in assignment.values()))
    if not one_hot:
        return ScheduleValidation((), float("nan"), float("-inf"), False, False)
    if n == 0:
        return ScheduleValidation((), 0.0, instance.deadline, True, True)

    times = [float(instance.time_matrix[t, assignment[t]]) for t in range(n)]
    count, _ = count_workflow_paths(wf, limit=cap + 1)
    if count > cap:
        logger.info("validating by longest path: more than %d paths", cap)
        longest = longest_path_time(wf, times)
        slack = instance.deadline - longest
        return ScheduleValidation((), longest, slack, True, slack >= -TOL, by_longest_path=True)

    checks = []
    for path in _workflow_paths(instance):
        total = sum(times[t] for t in path)
        checks.append(PathCheck(path, total, instance.deadline - total))
    longest = max(c.time for c in checks)
    slack = min(c.slack for c in checks)
    return ScheduleValidation(tuple(checks), longest, slack, True, slack >= -TOL)


def _fastest(instance: WspInstance, task: int, machines: Sequence[int]) -> int:
    return min(machines, key=lambda j: (instance.time_matrix[task, j],
                                        instance.cost_matrix[task, j], j))


def merge(plan: DecompositionPlan, subschedules: Sequence[Optional[Schedule]],
          instance: WspInstance) -> MergeReport:
    """Combine subschedules; a task scheduled twice runs on the faster machine.

    Ties go to the cheaper machine, then the lower machine id. Substitute
    vertices carry no workload and never take part in a collision.
    """
    if len(subschedules) != len(plan.subproblems) or any(s is None for s in subschedules):
        raise MissingSubschedule(
            f"expected {len(plan.subproblems)} subschedules, got "
            f"{sum(s is not None for s in subschedules)}")

    candidates: Dict[int, List[int]] = {}
    for schedule in subschedules:
        for task, machine in schedule.assignment.items():
            seen = candidates.setdefault(task, [])
            if machine not in seen:
                seen.append(machine)
    substitutes = sum(1 for sub in plan.subproblems for v in sub.graph.vertices
                      if v.kind is VertexKind.SUBSTITUTE)

    wf = instance.workflow
    means = instance.mean_times
    all_machines = range(instance.num_machines)
    assignment, collisions = {}, []
    for task in range(wf.num_tasks):
        machines = candidates.get(task)
        if not machines:
            if means[task] > 0:
                raise MissingSubschedule(f"task {wf.tasks[task].name!r} was not scheduled")
            # zero runtime: no time and no cost anywhere
            assignment[task] = _fastest(instance, task, all_machines)
            continue
        chosen = _fastest(instance, task, machines)
        if len(machines) > 1:
            collisions.append(Collision(task, tuple(sorted(machines)), chosen))
        assignment[task] = chosen

    cost = float(sum(instance.cost_matrix[t, a] for t, a in assignment.items()))
    proven = all(s.proven for s in subschedules)
    draft = Schedule(assignment, cost, float("nan"), False, proven)
    validation = validate_schedule(draft, instance)
    if not validation.feasible:
        raise InfeasibleMerge(
            f"merged schedule misses the deadline by {-validation.min_slack:.6g} s")

    if collisions:
        logger.info("resolved %d merge collisions", len(collisions))
    schedule = dataclasses.replace(draft, max_path_time=validation.max_path_time, feasible=True)
    return MergeReport(schedule, tuple(collisions), substitutes, validation)


def build_models(plan: DecompositionPlan, instance: WspInstance,
                 cap: int = PATH_CAP) -> List[Model]:
    return [build_model(sub.graph, sub.deadline, instance, plan.tree, sub.node, cap)
            for sub in plan.subproblems]


def solve_models(models: Sequence[Model], solver: str = "exact",
                 budget: int = DEFAULT_BUDGET, jobs: int = 1) -> List[Schedule]:
    """Solve independent models, up to ``jobs`` at a time, keeping their order."""
    def work(model):
        return solve(model, solver, budget)

    if jobs <= 1 or len(models) <= 1:
        return [work(model) for model in models]
    with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(work, models))


def solve_plan(plan: DecompositionPlan, instance: WspInstance, solver: str = "exact",
               budget: int = DEFAULT_BUDGET, jobs: int = 1,
               cap: int = PATH_CAP) -> List[Schedule]:
    return solve_models(build_models(plan, instance, cap), solver, budget, jobs)


def schedule_instance(instance: WspInstance, s: Union[int, str, SizeSpec] = "100%",
                      solver: str = "exact", budget: int = DEFAULT_BUDGET, jobs: int = 1,
                      cap: int = PATH_CAP) -> Tuple[DecompositionPlan, MergeReport]:
    """Plan, solve every subproblem and merge."""
    plan = make_plan(instance, s)
    subschedules = solve_plan(plan, instance, solver, budget, jobs, cap)
    return plan, merge(plan, subschedules, instance)


def solve_undivided(instance: WspInstance, solver: str = "exact", budget: int = DEFAULT_BUDGET,
                    cap: int = PATH_CAP) -> Schedule:
    """One model over the normalized workflow, without mapping or division.

    Mapping can multiply the path count, so the reference solve runs on the
    original precedence. Zero-runtime tasks are left out of the assignment.
    """
    graph = normalize_two_terminal(instance.workflow)
    return solve(build_model(graph, instance.deadline, instance, cap=cap), solver, budget)
