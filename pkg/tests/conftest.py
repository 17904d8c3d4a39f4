"""Shared fixtures and hypothesis profiles."""

import hypothesis
import numpy as np
import pytest

from ncindex import common
from ncindex.algebra_core import make_matrix_algebra
from ncindex.algebra_core import named_algebra

np.seterr(all='warn')

hypothesis.settings.register_profile('fast', max_examples=5,
                                     deadline=None)
hypothesis.settings.register_profile('debugger', report_multiple_bugs=False,
                                     deadline=None)


@pytest.fixture(autouse=True)
def default_config():
    """Every test starts from the built in defaults."""
    common.use_config(common.load_config())
    yield common.config()
    common.use_config(common.load_config())


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def m2():
    return make_matrix_algebra(2)


@pytest.fixture
def z3():
    return named_algebra('z3')
