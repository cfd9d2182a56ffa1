import numpy as np
import pytest

from masscone.measure import DiscreteMeasure


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_measure(rng, k, dim, mass=1.0, uniform=False):
    pts = rng.uniform(0, 1, (k, dim))
    w = np.ones(k) if uniform else rng.uniform(0.1, 1, k)
    return DiscreteMeasure(pts, mass * w / w.sum())


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
