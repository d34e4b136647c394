import numpy as np
import pytest

from fomrac import (
    BasisTerm,
    NonlinearBasis,
    PlantModel,
    ReferenceModel,
    SignalSpec,
    load_config,
)

DEMO_P = np.array([[20.0, 10.0], [10.0, 20.0]])
DEMO_AM = np.array([[0.0, 1.0], [-5.0, -5.0]])


@pytest.fixture
def demo_basis():
    # row 2 of F: x1^2 + sin(x2)
    return NonlinearBasis(
        2,
        (
            BasisTerm(1, 1.0, (2, 0)),
            BasisTerm(1, 1.0, (0, 0), "sin", 1),
        ),
    )


@pytest.fixture
def demo_plant(demo_basis):
    return PlantModel([[0, 1], [1, 1]], [0, 1], demo_basis, 0.7)


@pytest.fixture
def demo_reference():
    return ReferenceModel(DEMO_AM, [0, 5], SignalSpec("square", 20.0, 1.0))


@pytest.fixture(scope="session")
def demo_config():
    return load_config("paper_sec4")
