import numpy as np
import pandas as pd
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_corr(rng, n=20, L=None):
    """Sample correlation matrix of ``n`` correlated Gaussian series."""
    L = L or 3 * n
    mix = rng.standard_normal((n, n)) * rng.uniform(0.1, 1.0)
    x = mix @ rng.standard_normal((n, L)) + rng.standard_normal((n, L))
    c = np.corrcoef(x)
    c = 0.5 * (c + c.T)
    np.fill_diagonal(c, 1.0)
    return c


def write_wide(path, dates, columns: dict):
    df = pd.DataFrame({"date": dates, **columns})
    df.to_csv(path, index=False)
    return path


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
