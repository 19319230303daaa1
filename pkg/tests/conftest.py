import numpy as np
import pytest

from shellkit.material import ShellMaterial
from shellkit.surfaces import Cylinder, Graph, Plane, Sphere, Torus


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def unit_material():
    return ShellMaterial(h=0.1, mu=1.0, lam=1.0, mu_c=1.0, L_c=1.0, b1=1.0, b2=1.0, b3=1.0)


def catalog_surfaces():
    return {
        "plane": Plane(),
        "cylinder": Cylinder(1.0),
        "sphere": Sphere(1.0),
        "torus": Torus(2.0, 0.5),
        "saddle": Graph({(2, 0): 1.0, (0, 2): -1.0}),
    }


def random_rotation(rng):
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for an acceptance criterion."""

    def record(number, ok, detail):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE[number] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
