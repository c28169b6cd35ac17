"""Builders shared by the test modules."""
from typing import Optional, Sequence, Tuple

import numpy as np

from spwdsched.wf_model import Machine, Task, Workflow


def workflow(runtimes: Sequence[float], edges: Sequence[Tuple[int, int]],
             names: Optional[Sequence[str]] = None) -> Workflow:
    names = names or [f"t{i}" for i in range(len(runtimes))]
    tasks = [Task(i, names[i], float(r)) for i, r in enumerate(runtimes)]
    return Workflow.create(tasks, edges)


def two_machines():
    return [Machine(0, "slow", 1.0, 1.0, 1), Machine(1, "fast", 2.0, 4.0, 1)]


def one_machine():
    return [Machine(0, "ref", 1.0, 1.0, 1)]


def diamond() -> Workflow:
    return workflow([2, 4, 4, 2], [(0, 1), (0, 2), (1, 3), (2, 3)], names="ABCD")


def n_graph() -> Workflow:
    # S=0 A=1 B=2 C=3 D=4 T=5
    return workflow([1] * 6, [(0, 1), (0, 2), (1, 3), (1, 4), (2, 4), (3, 5), (4, 5)],
                    names=["S", "A", "B", "C", "D", "T"])


def chain(runtimes: Sequence[float]) -> Workflow:
    return workflow(runtimes, [(i, i + 1) for i in range(len(runtimes) - 1)])


def random_dag(rng: np.random.Generator, n: int, max_parents: int = 3,
               window: Optional[int] = None) -> Workflow:
    """Every task after the first draws 1..max_parents parents among earlier tasks."""
    edges = set()
    for j in range(1, n):
        lo = 0 if window is None else max(0, j - window)
        k = int(rng.integers(1, max_parents + 1))
        for p in rng.choice(np.arange(lo, j), size=min(k, j - lo), replace=False):
            edges.add((int(p), j))
    runtimes = np.round(rng.uniform(1.0, 10.0, n), 3)
    return workflow(runtimes, sorted(edges))


def layered(rng: np.random.Generator, layers: int, width: int) -> Workflow:
    """Layers of equal-runtime tasks; each task has two parents in the layer before.

    One parent comes from a permutation, so the layers hold ``width``
    vertex-disjoint full-length chains. Every full path has the same weight.
    """
    edges = set()
    for i in range(1, layers):
        prev, cur = (i - 1) * width, i * width
        for j, p in enumerate(rng.permutation(width)):
            q = int(rng.choice([k for k in range(width) if k != p]))
            edges.add((prev + int(p), cur + j))
            edges.add((prev + q, cur + j))
    runtimes = np.repeat(np.round(rng.uniform(1.0, 10.0, layers), 3), width)
    return workflow(runtimes, sorted(edges))
