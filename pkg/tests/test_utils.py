import logging
import os
import sys

import pytest

import spwdsched
from spwdsched import solver
from spwdsched.generate import generate
from spwdsched.timer import timers
from spwdsched.utils import (ConfigError, Infeasible, ParseError, PathExplosion, SizeSpec,
    SolverTimeout, parse_deadline_spec, parse_size_spec, setup_logging)
from spwdsched.wf_model import validate


def test_exit_codes():
    assert [e.exit_code for e in (ConfigError, ParseError, Infeasible, SolverTimeout,
                                  PathExplosion)] == [2, 3, 4, 5, 6]


def test_size_spec():
    assert parse_size_spec("25%") == SizeSpec(25.0, True)
    assert parse_size_spec(" 12 ") == SizeSpec(12, False)
    assert str(parse_size_spec("12.5%")) == "12.5%"
    assert SizeSpec(25.0, True).resolve(10) == 3
    assert SizeSpec(1.0, True).resolve(10) == 2


def test_deadline_spec():
    assert parse_deadline_spec(None) is None
    assert parse_deadline_spec("CPV") is None
    assert parse_deadline_spec("12.5") == 12.5
    for bad in ("0", "-3", "inf", "soon"):
        with pytest.raises(ConfigError):
            parse_deadline_spec(bad)


def test_setup_logging(monkeypatch):
    monkeypatch.setenv("SPWD_LOG", "debug")
    assert setup_logging().level == logging.DEBUG
    assert setup_logging("off").level > logging.CRITICAL
    monkeypatch.delenv("SPWD_LOG")
    assert setup_logging().level == logging.WARNING
    with pytest.raises(ConfigError):
        setup_logging("loud")


def test_package_logger_owns_module_loggers(monkeypatch):
    monkeypatch.delenv("SPWD_LOG", raising=False)
    package = setup_logging()
    assert package.name == "spwdsched"
    assert logging.getLogger(solver.__name__).parent is package


def test_package_is_not_a_builtin_module():
    assert spwdsched.__name__ not in sys.builtin_module_names
    assert os.path.basename(spwdsched.__file__) == "__init__.py"


def test_timers():
    timers.reset()
    with timers("parse"):
        pass
    assert "parse" in timers
    assert timers("parse").elapsed() >= 0.0
    assert "parse_time_s" in timers.summary()
    timers.reset()
    assert timers("parse").elapsed() == 0.0
    assert "parse_time_s" not in timers.summary()

    stage = timers("parse")
    stage.start()
    with pytest.raises(RuntimeError):
        stage.start()
    assert stage.stop() >= 0.0
    with pytest.raises(RuntimeError):
        stage.stop()
    assert stage.elapsed("average") == stage.elapsed()
    with pytest.raises(ValueError):
        stage.elapsed("median")
    timers.reset()


@pytest.mark.parametrize("shape, sizes, tasks, edges", [
    ("chain", [5], 5, 4),
    ("fork-join", [3], 5, 6),
    ("fork-join", [2, 3], 10, 12),
    ("layered", [3, 4, 2], 12, None),
    ("random-sp", [30], 30, None),
])
def test_generate_shapes(shape, sizes, tasks, edges):
    wf = generate(shape, sizes, seed=1)
    assert wf.num_tasks == tasks
    if edges is not None:
        assert len(wf.edges) == edges
    assert validate(wf).valid
    assert generate(shape, sizes, seed=1) == wf


def test_generate_errors():
    with pytest.raises(ConfigError):
        generate("star", [3])
    with pytest.raises(ConfigError):
        generate("chain", [0])
