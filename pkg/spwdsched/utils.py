import dataclasses
import logging
import math
import os
from typing import Optional, Union


TOL = 1e-9  # feasibility tolerance on every time comparison
PATH_CAP = 10 ** 7
PATH_COUNT_LIMIT = 2 ** 63 - 1
DEFAULT_BUDGET = 10 ** 8
BRUTE_FORCE_LIMIT = 10 ** 7
SWEEP_PERCENTAGES = (75, 50, 25, 15, 10, 5, 2, 1)

LOG_ENV = "SPWD_LOG"
_LOG_LEVELS = {"off": logging.CRITICAL + 1, "info": logging.INFO, "debug": logging.DEBUG}


class SpwdError(Exception):
    """Base class of every error the command line turns into an exit status."""
    exit_code = 1


class ConfigError(SpwdError, ValueError):
    exit_code = 2


class ParseError(SpwdError, ValueError):
    exit_code = 3


class Infeasible(SpwdError):
    """No assignment meets every path deadline."""
    exit_code = 4


class SolverTimeout(SpwdError):
    """The node budget ran out; the schedule found so far is not proven optimal."""
    exit_code = 5


class PathExplosion(SpwdError):
    exit_code = 6


class NotSeriesParallel(SpwdError, ValueError):
    """Series and parallel reductions stalled before a single edge remained."""


class SpaceTooLarge(SpwdError, ValueError):
    pass


class MissingSubschedule(SpwdError, ValueError):
    pass


class InfeasibleMerge(SpwdError, AssertionError):
    pass


def setup_logging(value: Optional[str] = None):
    """Configure the package logger from SPWD_LOG (off|info|debug)."""
    if value is None:
        value = os.environ.get(LOG_ENV)
    if value is None or value == "":
        level = logging.WARNING
    else:
        value = value.strip().lower()
        if value not in _LOG_LEVELS:
            raise ConfigError(f"{LOG_ENV} must be one of off|info|debug, got {value!r}")
        level = _LOG_LEVELS[value]

    logger = logging.getLogger(__name__.partition(".")[0])
    logger.setLevel(level)
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(asctime)s %(name)s %(levelname)s: %(message)s"))
        logger.addHandler(handler)
    return logger


@dataclasses.dataclass(frozen=True)
class SizeSpec:
    """Max subgraph size, absolute or relative to the mapped graph."""
    value: float
    percent: bool

    def resolve(self, vertex_count: int) -> int:
        if not self.percent:
            return int(self.value)
        return max(2, math.ceil(self.value / 100 * vertex_count))

    def __str__(self):
        if self.percent:
            return f"{self.value:g}%"
        return str(int(self.value))


def parse_size_spec(text: Union[str, int, SizeSpec]) -> SizeSpec:
    if isinstance(text, SizeSpec):
        return text
    if isinstance(text, int):
        text = str(text)
    text = text.strip()
    if text.endswith("%"):
        try:
            value = float(text[:-1])
        except ValueError:
            raise ConfigError(f"invalid subgraph size {text!r}") from None
        if not 0 < value <= 100:
            raise ConfigError(f"percentage subgraph size must lie in (0, 100], got {text!r}")
        return SizeSpec(value, True)
    try:
        value = int(text)
    except ValueError:
        raise ConfigError(f"invalid subgraph size {text!r}") from None
    if value < 2:
        raise ConfigError(f"absolute subgraph size must be at least 2, got {value}")
    return SizeSpec(value, False)


def parse_deadline_spec(text: Optional[str]) -> Optional[float]:
    """Return the deadline in seconds, or None for the critical path value."""
    if text is None or text.strip().lower() == "cpv":
        return None
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"deadline must be seconds or 'cpv', got {text!r}") from None
    if not value > 0 or math.isinf(value):
        raise ConfigError(f"deadline must be positive and finite, got {text!r}")
    return value
