"""Shared fixtures.

The weak-norm factorization is the only expensive object the suite needs
repeatedly, so it is built once per session at the two grid sizes the
refinement tests compare.
"""

import numpy as np
import pytest

from transport_hjb import ControlBounds, ProblemSpec, build_weak_norm


@pytest.fixture(scope="session")
def problem():
    # desk configuration: beta = 1, mu = 0, sbar = 1, rho = 1, 201 nodes
    return ProblemSpec.make()


@pytest.fixture(scope="session")
def fine_problem():
    return ProblemSpec.make(node_count=401)


@pytest.fixture(scope="session")
def weak_norm(problem):
    return build_weak_norm(problem)


@pytest.fixture(scope="session")
def fine_weak_norm(fine_problem):
    return build_weak_norm(fine_problem)


@pytest.fixture(scope="session")
def box():
    # boundary values in [0, 1], distributed control pinned to zero
    return ControlBounds(0.0, 1.0, 0.0, 0.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
