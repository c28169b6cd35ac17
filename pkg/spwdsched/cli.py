"""
Usage:
python3 -m spwdsched.cli schedule --workflow wf.json --max-subgraph-size 25% --solver exact --out out/
python3 -m spwdsched.cli sweep --workflow wf.json --sizes 75% 50% 10% 1%
python3 -m spwdsched.cli generate --shape layered --sizes 5 16 2 --seed 7 --out layered.json
"""

import argparse
import dataclasses
import math
import os
import sys
from typing import Dict, List, Optional, Sequence, Tuple

from tqdm import tqdm

from spwdsched.decompose import PLAN_COLUMNS, plan as make_plan, plan_report, plan_rows
from spwdsched.generate import SHAPES, generate
from spwdsched.merge import MergeReport, build_models, merge, solve_models, solve_undivided
from spwdsched.report import (csv_text, schedule_csv, sweep_svg, write_csv,
    write_summary, write_text)
from spwdsched.solver import SOLVERS, build_model, export_lp, problem_size
from spwdsched.timer import timers
from spwdsched.ttsp import (count_graph_paths, count_paths, map_to_ttsp, normalize_two_terminal,
    recognize_and_build_tree)
from spwdsched.utils import (ConfigError, DEFAULT_BUDGET, Infeasible, PATH_CAP, SWEEP_PERCENTAGES,
    SizeSpec, SolverTimeout, SpwdError, parse_deadline_spec, parse_size_spec, setup_logging)
from spwdsched.wf_model import (WspInstance, make_instance, parse_machines, parse_wfcommons,
    reference_machines, serialize_wfcommons, validate)


DEFAULT_SIZES = tuple(SizeSpec(p, True) for p in SWEEP_PERCENTAGES)


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Options shared by the analysis commands."""
    workflow: str
    machines: Optional[str] = None  # None selects the reference pool
    reference_speed: float = 1.0
    deadline: Optional[float] = None  # None means critical path value
    max_subgraph_size: SizeSpec = SizeSpec(100, True)
    solver: str = "exact"
    budget: int = DEFAULT_BUDGET
    jobs: int = 1
    seed: int = 0
    out: str = "spwd_out"
    sizes: Tuple[SizeSpec, ...] = DEFAULT_SIZES
    path_cap: int = PATH_CAP

    @classmethod
    def from_args(cls, args):
        deadlines = getattr(args, "deadline", None) or []
        if len(deadlines) > 1:
            raise ConfigError("--deadline given more than once; pass seconds or 'cpv' once")
        solver = getattr(args, "solver", "exact")
        if solver not in SOLVERS + ("lp-export",):
            raise ConfigError(f"unknown solver {solver!r}")
        budget = getattr(args, "budget", DEFAULT_BUDGET)
        jobs = getattr(args, "jobs", 1)
        if budget < 1 or jobs < 1:
            raise ConfigError("--budget and --jobs must be positive")
        sizes = getattr(args, "sizes", None)
        return cls(
            workflow=args.workflow,
            machines=getattr(args, "machines", None),
            reference_speed=getattr(args, "reference_speed", 1.0),
            deadline=parse_deadline_spec(deadlines[0] if deadlines else None),
            max_subgraph_size=parse_size_spec(getattr(args, "max_subgraph_size", "100%")),
            solver=solver,
            budget=budget,
            jobs=jobs,
            seed=getattr(args, "seed", 0),
            out=getattr(args, "out", "spwd_out"),
            sizes=tuple(parse_size_spec(s) for s in sizes) if sizes else DEFAULT_SIZES,
            path_cap=getattr(args, "path_cap", PATH_CAP),
        )

    def load_instance(self) -> WspInstance:
        workflow = parse_wfcommons(_read(self.workflow))
        machines = parse_machines(_read(self.machines)) if self.machines else reference_machines()
        return make_instance(workflow, machines, self.reference_speed, self.deadline)

    def output(self, name: str) -> str:
        return os.path.join(self.out, name)


def _read(path: str) -> bytes:
    try:
        with open(path, "rb") as f:
            return f.read()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from None


def _ratio(value: float, base: float) -> float:
    if base > 0:
        return value / base
    return 1.0 if value == 0 else math.inf


def cmd_schedule(config: RunConfig) -> int:
    instance = config.load_instance()
    timers.reset()

    with timers("plan"):
        plan = make_plan(instance, config.max_subgraph_size)
        models = build_models(plan, instance, config.path_cap)

    write_csv(config.output("plan.csv"), PLAN_COLUMNS, plan_rows(plan))
    write_text(config.output("plan.txt"), plan_report(plan))
    write_text(config.output("tree.txt"), plan.tree.outline())
    write_text(config.output("tree.dot"), plan.tree.to_dot())

    if config.solver == "lp-export":
        for k, model in enumerate(models):
            with open(config.output(f"subproblem_{k:04d}.lp"), "wb") as f:
                f.write(export_lp(model))
        print(f"exported {len(models)} LP files to {config.out}")
        return 0

    with timers("solve"):
        subschedules = solve_models(models, config.solver, config.budget, config.jobs)
    with timers("merge"):
        report = merge(plan, subschedules, instance)

    write_text(config.output("schedule.csv"), schedule_csv(report, instance))
    write_text(config.output("merge.txt"), report.describe(instance))
    summary = {
        "cost": report.schedule.cost,
        "max_path_time_s": report.schedule.max_path_time,
        "deadline_s": instance.deadline,
        "feasible": report.schedule.feasible,
        "proven": report.schedule.proven,
        "subproblems": len(plan.subproblems),
        "max_subgraph_size": plan.max_size,
        **timers.summary(),
    }
    write_summary(config.output("summary.txt"), summary)
    for k, v in summary.items():
        print(f"{k}: {v}")

    if not report.schedule.proven:
        print("warning: search budget exhausted, schedule is not proven optimal", file=sys.stderr)
        return SolverTimeout.exit_code
    return 0


ANALYZE_COLUMNS = ("s", "orig_vars", "orig_cons", "max_sub_vars", "max_sub_cons",
                   "ratio_vars", "ratio_cons")


def analyze_size(instance: WspInstance, sizes: Sequence[SizeSpec],
                 cap: int = PATH_CAP) -> List[Dict[str, object]]:
    normalized = normalize_two_terminal(instance.workflow)
    orig = problem_size(build_model(normalized, instance.deadline, instance, cap=cap))
    rows = []
    for spec in tqdm(sizes, desc="analyze-size", disable=None):
        plan = make_plan(instance, spec)
        subs = [problem_size(m) for m in build_models(plan, instance, cap)]
        max_vars = max(s.variables for s in subs)
        max_cons = max(s.constraints for s in subs)
        rows.append({
            "s": str(spec),
            "orig_vars": orig.variables,
            "orig_cons": orig.constraints,
            "max_sub_vars": max_vars,
            "max_sub_cons": max_cons,
            "ratio_vars": _ratio(max_vars, orig.variables),
            "ratio_cons": _ratio(max_cons, orig.constraints),
        })
    return rows


def cmd_analyze_size(config: RunConfig) -> int:
    rows = analyze_size(config.load_instance(), config.sizes, config.path_cap)
    write_csv(config.output("analyze_size.csv"), ANALYZE_COLUMNS, rows)
    print(csv_text(ANALYZE_COLUMNS, rows), end="")
    return 0


INFLATION_COLUMNS = ("paths_before_mapping", "paths_after_mapping", "ratio", "saturated")


def path_inflation(instance: WspInstance) -> Dict[str, object]:
    normalized = normalize_two_terminal(instance.workflow)
    before, saturated_before = count_graph_paths(normalized)
    counts = count_paths(recognize_and_build_tree(map_to_ttsp(normalized)))
    return {
        "paths_before_mapping": before,
        "paths_after_mapping": counts.root,
        "ratio": counts.root / before,
        "saturated": saturated_before or counts.saturated,
    }


def cmd_path_inflation(config: RunConfig) -> int:
    row = path_inflation(config.load_instance())
    write_csv(config.output("path_inflation.csv"), INFLATION_COLUMNS, [row])
    print(csv_text(INFLATION_COLUMNS, [row]), end="")
    return 0


SWEEP_COLUMNS = ("s_pct", "s_abs", "cost", "cost_ratio_vs_undivided", "subproblem_count",
                 "feasible", "baseline_proven")


def sweep(instance: WspInstance, sizes: Sequence[SizeSpec], solver: str = "exact",
          budget: int = DEFAULT_BUDGET, jobs: int = 1,
          cap: int = PATH_CAP) -> List[Dict[str, object]]:
    """Cost of a full run per size, relative to one undivided solve.

    The undivided solve models the normalized workflow directly and makes the
    100% row.
    """
    if solver not in SOLVERS:
        raise ConfigError(f"sweep needs a solving backend ({'|'.join(SOLVERS)}), got {solver!r}")
    base = solve_undivided(instance, solver, budget, cap)
    rows = [{
        "s_pct": 100.0,
        "s_abs": normalize_two_terminal(instance.workflow).num_vertices,
        "cost": base.cost,
        "cost_ratio_vs_undivided": 1.0,
        "subproblem_count": 1,
        "feasible": base.feasible,
        "baseline_proven": base.proven,
    }]

    for spec in tqdm([s for s in sizes if s != SizeSpec(100, True)], desc="sweep", disable=None):
        plan = make_plan(instance, spec)
        try:
            report: Optional[MergeReport] = merge(
                plan, solve_models(build_models(plan, instance, cap), solver, budget, jobs),
                instance)
        except Infeasible:
            report = None
        mapped = plan.graph.num_vertices - len(plan.substitutes)
        cost = report.schedule.cost if report else math.nan
        rows.append({
            "s_pct": float(spec.value if spec.percent else 100.0 * plan.max_size / mapped),
            "s_abs": plan.max_size,
            "cost": cost,
            "cost_ratio_vs_undivided": _ratio(cost, base.cost) if report else math.nan,
            "subproblem_count": len(plan.subproblems),
            "feasible": report is not None and report.schedule.feasible,
            "baseline_proven": base.proven,
        })
    return rows


def cmd_sweep(config: RunConfig) -> int:
    rows = sweep(config.load_instance(), config.sizes, config.solver, config.budget,
                 config.jobs, config.path_cap)
    write_csv(config.output("sweep.csv"), SWEEP_COLUMNS, rows)
    write_text(config.output("sweep.svg"),
               sweep_svg([r for r in rows if math.isfinite(r["cost_ratio_vs_undivided"])]))
    print(csv_text(SWEEP_COLUMNS, rows), end="")
    return 0


def cmd_generate(args) -> int:
    workflow = generate(args.shape, args.sizes, args.seed)
    write_text(args.out, serialize_wfcommons(workflow).decode("utf-8"))
    print(f"wrote {workflow.name} ({workflow.num_tasks} tasks, {len(workflow.edges)} edges) "
          f"to {args.out}")
    return 0


def cmd_validate(args) -> int:
    report = validate(parse_wfcommons(_read(args.workflow)))
    print(report)
    if args.machines:
        machines = parse_machines(_read(args.machines))
        print(f"machines: {len(machines)}")
    return 0 if report.valid else 3


def add_parser_arguments(parser):
    parser.add_argument("--workflow", type=str, required=True,
        help="WfCommons instance file (JSON).")
    parser.add_argument("--machines", type=str,
        help="Machine pool file. Defaults to the five-machine reference pool.")
    parser.add_argument("--reference-speed", type=float, default=1.0,
        help="Speed (GHz) at which the workflow runtimes were measured.")
    parser.add_argument("--deadline", type=str, action="append",
        help="Deadline in seconds, or 'cpv' for the critical path value (default).")
    parser.add_argument("--max-subgraph-size", type=str, default="100%",
        help="Vertices per subproblem, absolute (N) or relative (P%%).")
    parser.add_argument("--solver", type=str, default="exact",
        choices=list(SOLVERS) + ["lp-export"])
    parser.add_argument("--budget", type=int, default=DEFAULT_BUDGET,
        help="Branch-and-bound node budget per subproblem.")
    parser.add_argument("--jobs", type=int, default=1,
        help="Subproblems solved concurrently.")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=str, default="spwd_out",
        help="Output directory.")
    parser.add_argument("--path-cap", type=int, default=PATH_CAP,
        help="Maximum number of enumerated paths per model.")


def _with_config(func):
    return lambda args: func(RunConfig.from_args(args))


def build_parser():
    parser = argparse.ArgumentParser(prog="spwd")
    verbs = parser.add_subparsers(dest="verb", required=True)

    for name, func, takes_sizes in (("schedule", cmd_schedule, False),
                                    ("analyze-size", cmd_analyze_size, True),
                                    ("path-inflation", cmd_path_inflation, False),
                                    ("sweep", cmd_sweep, True)):
        sub = verbs.add_parser(name)
        add_parser_arguments(sub)
        if takes_sizes:
            sub.add_argument("--sizes", type=str, nargs="+",
                help="Max subgraph sizes to try, e.g. 75%% 50%% 10%%.")
        sub.set_defaults(func=_with_config(func))

    gen = verbs.add_parser("generate")
    gen.add_argument("--shape", type=str, required=True, choices=SHAPES)
    gen.add_argument("--sizes", type=int, nargs="+", required=True,
        help="chain: N; fork-join: WIDTH [STAGES]; layered: LAYERS WIDTH [FAN_IN]; "
             "random-sp: N.")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", type=str, default="workflow.json")
    gen.set_defaults(func=cmd_generate)

    val = verbs.add_parser("validate")
    val.add_argument("--workflow", type=str, required=True)
    val.add_argument("--machines", type=str)
    val.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        setup_logging()
        return args.func(args)
    except SpwdError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
