import sys

import numpy as np
import pytest

from formdeck.generators import annulus_mesh, cube_mesh, polygon_mesh, pyramid_mesh, square_mesh


@pytest.fixture(scope="session")
def square():
    return square_mesh(1)


@pytest.fixture(scope="session")
def square3():
    return square_mesh(3)


@pytest.fixture(scope="session")
def pyramid():
    return pyramid_mesh()


@pytest.fixture(scope="session")
def polygon():
    return polygon_mesh(2, seed=0)


@pytest.fixture(scope="session")
def annulus():
    return annulus_mesh(1)


@pytest.fixture(scope="session")
def cube():
    return cube_mesh(2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture(scope="session")
def hand_square():
    """One-cell unit square from the hand-written JSON (simplex numbering fixed)."""
    from pathlib import Path

    from formdeck.mesh import load_mesh

    return load_mesh(Path(__file__).parent / "data" / "square.mesh.json")


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = sorted(getattr(module, "REPORT_LINES", []),
                   key=lambda line: int(line.split()[1].rstrip(":")))
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
