import numpy as np
import pytest

from stochmcf.geometry import CircleCurve, EllipseCurve, build_chart
from stochmcf.profiles import GaussianBump, NoiseProfile, PolynomialG

ACCEPTANCE_LINES = []


def record_acceptance(number, title, ok, detail):
    line = f"ACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def circle_chart():
    return build_chart(CircleCurve(), 0.4)


@pytest.fixture(scope="session")
def ellipse_chart():
    return build_chart(EllipseCurve(1.2, 1.0), 0.4)


@pytest.fixture(scope="session")
def bump_noise():
    """Multiplicative noise g = 1 + u/2 with a Gaussian profile covering the tube."""
    return NoiseProfile(g=PolynomialG((1.0, 0.5)), modes=(GaussianBump((0.0, 0.0), 1.5, 1.0),))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
