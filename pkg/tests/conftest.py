import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from foslsbem.coupling import build_system  # noqa: E402
from foslsbem.heatbem import assemble_bem  # noqa: E402
from foslsbem.mesh import build_unit_square_mesh  # noqa: E402


@pytest.fixture(scope="session")
def mesh2():
    return build_unit_square_mesh(2)


@pytest.fixture(scope="session")
def mesh3():
    return build_unit_square_mesh(3)


@pytest.fixture(scope="session")
def bem2(mesh2):
    return assemble_bem(mesh2)


@pytest.fixture(scope="session")
def system2(mesh2):
    return build_system(mesh2)
