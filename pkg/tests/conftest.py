import pytest

from spwdsched.wf_model import make_instance, reference_machines

import helpers


@pytest.fixture
def diamond():
    return helpers.diamond()


@pytest.fixture
def n_graph():
    return helpers.n_graph()


@pytest.fixture
def two_machines():
    return helpers.two_machines()


@pytest.fixture
def reference_pool():
    return reference_machines()


@pytest.fixture
def diamond_instance(diamond, two_machines):
    return make_instance(diamond, two_machines, 1.0, 6.0)
