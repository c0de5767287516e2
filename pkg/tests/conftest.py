import functools
import sys

import pytest

from stablefi import Potential, normalize


@functools.lru_cache(maxsize=None)
def measure_of(family: str, eps: float, alpha: float | None = None, dim: int = 1):
    """Normalized measures are immutable, so tests share them."""
    return normalize(Potential.from_family(family, eps, dim, alpha))


@pytest.fixture(scope="session")
def cauchy():
    return measure_of("poly_tail", 1.0)


@pytest.fixture(scope="session")
def poly2():
    return measure_of("poly_tail", 2.0)


def pytest_terminal_summary(terminalreporter):
    """Print the acceptance verdicts, one line per criterion, after the run."""
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results):
        terminalreporter.write_line(results[key])
