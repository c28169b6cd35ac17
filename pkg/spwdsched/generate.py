"""Seeded synthetic workflows standing in for WfCommons families.

    chain      [tasks]                  linear pipeline
    fork-join  [width, stages]          repeated scatter/gather
    layered    [layers, width, fan_in]  fan-out/fan-in between layers
    random-sp  [tasks]                  random series/parallel expansions
"""
import logging
from typing import List, Sequence, Set, Tuple

import numpy as np

from spwdsched.utils import ConfigError
from spwdsched.wf_model import Task, Workflow

logger = logging.getLogger(__name__)

SHAPES = ("chain", "fork-join", "layered", "random-sp")


def _runtimes(rng: np.random.Generator, n: int) -> List[float]:
    return [float(r) for r in np.round(rng.uniform(1.0, 10.0, n), 3)]


def _workflow(name: str, runtimes: Sequence[float], edges: Set[Tuple[int, int]]) -> Workflow:
    tasks = [Task(i, f"t{i}", r) for i, r in enumerate(runtimes)]
    return Workflow.create(tasks, sorted(edges), name=name)


def chain(n: int, rng: np.random.Generator) -> Workflow:
    if n < 1:
        raise ConfigError("chain needs at least 1 task")
    return _workflow(f"chain-{n}", _runtimes(rng, n), {(i, i + 1) for i in range(n - 1)})


def fork_join(width: int, stages: int, rng: np.random.Generator) -> Workflow:
    if width < 1 or stages < 1:
        raise ConfigError("fork-join needs width >= 1 and stages >= 1")
    edges = set()
    fork, n = 0, 1
    for _ in range(stages):
        join = n + width
        for k in range(n, n + width):
            edges.add((fork, k))
            edges.add((k, join))
        fork, n = join, join + 1
    return _workflow(f"fork-join-{width}x{stages}", _runtimes(rng, n), edges)


def layered(layers: int, width: int, fan_in: int, rng: np.random.Generator) -> Workflow:
    if layers < 1 or width < 1 or fan_in < 1:
        raise ConfigError("layered needs layers, width and fan_in >= 1")
    edges = set()
    for i in range(1, layers):
        prev, cur = (i - 1) * width, i * width
        for j in range(width):
            for p in rng.choice(width, size=min(fan_in, width), replace=False):
                edges.add((prev + int(p), cur + j))
        children = {u for u, _ in edges}
        for p in range(prev, cur):
            if p not in children:
                edges.add((p, cur + int(rng.integers(width))))
    return _workflow(f"layered-{layers}x{width}", _runtimes(rng, layers * width), edges)


def random_sp(n: int, rng: np.random.Generator) -> Workflow:
    """Grow a two-terminal series-parallel DAG from one edge."""
    if n < 2:
        raise ConfigError("random-sp needs at least 2 tasks")
    edges = [(0, 1)]
    for w in range(2, n):
        k = int(rng.integers(len(edges)))
        u, v = edges[k]
        if rng.random() < 0.5:
            edges[k] = (u, w)  # series split of (u, v)
        else:
            edges.append((u, w))
        edges.append((w, v))
    return _workflow(f"random-sp-{n}", _runtimes(rng, n), set(edges))


def generate(shape: str, sizes: Sequence[int], seed: int = 0) -> Workflow:
    rng = np.random.default_rng(seed)
    sizes = list(sizes)
    try:
        if shape == "chain":
            (n,) = sizes
            workflow = chain(n, rng)
        elif shape == "fork-join":
            width, stages = (sizes + [1])[:2] if len(sizes) == 1 else sizes
            workflow = fork_join(width, stages, rng)
        elif shape == "layered":
            layers, width, fan_in = (sizes + [2])[:3] if len(sizes) == 2 else sizes
            workflow = layered(layers, width, fan_in, rng)
        elif shape == "random-sp":
            (n,) = sizes
            workflow = random_sp(n, rng)
        else:
            raise ConfigError(f"unknown shape {shape!r}, expected one of {SHAPES}")
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"wrong number of sizes for {shape}: {sizes}") from None
    logger.info("generated %s: %d tasks, %d edges", workflow.name,
                workflow.num_tasks, len(workflow.edges))
    return workflow
