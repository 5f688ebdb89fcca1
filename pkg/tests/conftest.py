import math
import sys

import numpy as np
import pytest

from bandlimit import Mesh, Sphere, Torus, build_basis

TWO_PI = 2.0 * math.pi


@pytest.fixture(scope="session")
def sphere_basis():
    """Sphere, L = 100 (degrees 0..9), oversampled for ball queries."""
    return build_basis(Sphere.for_bandwidth(100, 4), 100)


@pytest.fixture(scope="session")
def small_sphere_basis():
    """Sphere, L = 6: k_L = 9, small enough for brute-force oracles."""
    return build_basis(Sphere.for_bandwidth(6, 4), 6)


@pytest.fixture(scope="session")
def torus_basis():
    return build_basis(Torus.for_bandwidth(TWO_PI, TWO_PI, 100, 2), 100)


@pytest.fixture(scope="session")
def small_torus_basis():
    """Torus 2pi x 2pi, L = 2: k_L = 9."""
    return build_basis(Torus.for_bandwidth(TWO_PI, TWO_PI, 2, 4), 2)


@pytest.fixture(scope="session")
def ico3():
    return Mesh.icosphere(3)


@pytest.fixture(scope="session")
def mesh_basis(ico3):
    return build_basis(ico3, 30)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """Print the acceptance PASS/FAIL lines when the acceptance suite ran."""
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
