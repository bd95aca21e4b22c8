import numpy as np
import pytest

from enclosure.cgo import ProbeParams, WaveNumbers
from enclosure.fem import generate_mesh
from enclosure.geometry import ConeFrame, Disc, DomainSpec, MaterialConfig
from enclosure.indicator import ForwardModel

# lines collected by the acceptance tests, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def domain():
    return DomainSpec((3.0, 0.0), 1.0)


@pytest.fixture(scope="session")
def disc():
    return Disc(0.0, 2.0, (3.0, 0.2), 0.3)


@pytest.fixture(scope="session")
def material(disc):
    return MaterialConfig(2.0, 1.0, 1.0, (disc,))


@pytest.fixture(scope="session")
def waves(material):
    return WaveNumbers.from_material(material)


@pytest.fixture(scope="session")
def frame():
    return ConeFrame((0.0, 0.0), 1, 0.0)


@pytest.fixture(scope="session")
def base():
    return ProbeParams(1.0, 0.5, 0.05)


@pytest.fixture(scope="session")
def coarse_model(domain, material):
    """Reference configuration on a coarse mesh, for fast structural tests."""
    return ForwardModel(generate_mesh(domain, material, 0.05), material)


@pytest.fixture(scope="session")
def ref_model(domain, material):
    """Reference configuration at meshSize 0.02."""
    return ForwardModel(generate_mesh(domain, material, 0.02), material)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


REFERENCE_INI = """\
[domain]
center = 3, 0
radius = 1

[background]
lambda0 = 2
mu0 = 1
k = 1

[inclusion.D]
kind = disc
center = 3, 0.2
radius = 0.3
lambdaD = 0
muD = 2

[cone.main]
N = 1
theta0 = 0
apex = 0, 0

[probe]
dMin = 0.2702702702702703
dMax = 0.3448275862068966
"""


@pytest.fixture
def reference_ini(tmp_path):
    p = tmp_path / "reference.ini"
    p.write_text(REFERENCE_INI)
    return p
