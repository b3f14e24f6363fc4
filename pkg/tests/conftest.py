import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ergochain import runner

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []


@st.composite
def stochastic_matrices(draw, min_m=1, max_m=6, m=None):
    """Random row-stochastic matrices, some rows sparse."""
    if m is None:
        m = draw(st.integers(min_m, max_m))
    raw = draw(arrays(np.float64, (m, m), elements=st.floats(0, 1, allow_subnormal=False)))
    mask = draw(arrays(np.bool_, (m, m)))
    raw = np.where(mask, raw, 0.0)
    raw[np.arange(m), np.arange(m)] += 1e-3
    return raw / raw.sum(axis=1, keepdims=True)


@st.composite
def partitions(draw, m):
    labels = draw(st.lists(st.integers(0, m - 1), min_size=m, max_size=m))
    return labels


def random_stochastic(rng, m, sparsity=0.3):
    A = rng.random((m, m)) * (rng.random((m, m)) > sparsity)
    A[np.arange(m), np.arange(m)] += 1e-3
    return A / A.sum(axis=1, keepdims=True)


@pytest.fixture(scope="session")
def bundled_run():
    """Run a bundled scenario once per session (workers=1) and cache it."""
    cache = {}

    def get(name, workers=1):
        key = (name, workers)
        if key not in cache:
            scenario = runner.resolve_scenario(name)
            cache[key] = runner.run_scenario(scenario, workers=workers)
        return cache[key]

    return get


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
