import numpy as np
import pytest

import polysens as ps
from polysens.distributions import ParameterSpace, Uniform


@pytest.fixture(scope="session")
def unit_space_2d():
    return ParameterSpace(dims=(("x1", Uniform(0.0, 1.0)),
                                ("x2", Uniform(0.0, 1.0))))


@pytest.fixture(scope="session")
def unit_space_3d():
    return ParameterSpace(dims=tuple(
        (f"x{j}", Uniform(0.0, 1.0)) for j in (1, 2, 3)))


@pytest.fixture(scope="session")
def g3():
    return ps.g_function([0.0, 1.0, 9.0])


@pytest.fixture(scope="session")
def g3_model_nr1(g3):
    """g-function fitted with one refinement, shared by several tests."""
    design = ps.qmc_design(g3.space, 4096)
    return ps.fit(g3.training_set(design), level=1, order=2)
