"""Wall-clock timers for the pipeline stages (plan, solve, merge)."""
import time
from typing import Dict, List, Optional


class _Timer:
    """Durations of one named stage, one entry per timed block."""

    def __init__(self, name: str):
        self.name = name
        self.durations: List[float] = []
        self._since: Optional[float] = None

    @property
    def running(self) -> bool:
        return self._since is not None

    def start(self):
        if self.running:
            raise RuntimeError(f"stage {self.name!r} is already being timed")
        self._since = time.perf_counter()

    def stop(self) -> float:
        if not self.running:
            raise RuntimeError(f"stage {self.name!r} was never started")
        duration = time.perf_counter() - self._since
        self.durations.append(duration)
        self._since = None
        return duration

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc):
        self.stop()
        return False

    def reset(self):
        self.durations.clear()
        self._since = None

    def elapsed(self, mode: str = "sum") -> float:
        if mode not in ("sum", "average"):
            raise ValueError(f"mode must be 'sum' or 'average', got {mode!r}")
        total = sum(self.durations)
        if mode == "average" and self.durations:
            return total / len(self.durations)
        return total


class Timers:
    """Registry of stage timers, created on first use."""

    def __init__(self):
        self.timers: Dict[str, _Timer] = {}

    def __call__(self, name: str) -> _Timer:
        return self.timers.setdefault(name, _Timer(name))

    def __contains__(self, name: str):
        return name in self.timers

    def reset(self):
        for timer in self.timers.values():
            timer.reset()

    def summary(self, suffix: str = "_time_s") -> Dict[str, float]:
        """``{"<stage><suffix>": seconds}`` for every stage that ran."""
        return {f"{name}{suffix}": t.elapsed() for name, t in self.timers.items() if t.durations}


timers = Timers()
