import numpy as np
import pytest


def matvec_loops(a, v):
    """Plain-Python matrix-vector product, used as an oracle."""
    out = []
    for r in range(len(a)):
        acc = 0.0
        for c in range(len(v)):
            acc += float(a[r][c]) * float(v[c])
        out.append(acc)
    return np.array(out)


def two_region_row(rng, shape=(8, 8), amp=(500.0, 4000.0)):
    """Row split by one straight cut into two flat regions."""
    x = np.empty(shape)
    if rng.integers(2):
        c = int(rng.integers(1, shape[1]))
        x[:, :c], x[:, c:] = rng.uniform(*amp), rng.uniform(*amp)
    else:
        c = int(rng.integers(1, shape[0]))
        x[:c, :], x[c:, :] = rng.uniform(*amp), rng.uniform(*amp)
    return x


@pytest.fixture
def rng():
    return np.random.default_rng(20140504)


# criterion number -> (verdict, title), filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        verdict, title = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {verdict}  {title}")
