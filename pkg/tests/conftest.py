import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from saefh import AreaDataset

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


def make_dataset(y, d=1.0, x=None, kappa_e=0.0):
    y = np.asarray(y, dtype=float)
    m = y.size
    x = np.ones((m, 1)) if x is None else np.asarray(x, dtype=float)
    d = np.broadcast_to(np.asarray(d, dtype=float), (m,)).copy()
    k = np.broadcast_to(np.asarray(kappa_e, dtype=float), (m,)).copy()
    return AreaDataset(y, x, d, k)


@st.composite
def datasets(draw, m_min=5, m_max=30, p_max=3, balanced=None, with_kurtosis=True):
    """Random well-conditioned datasets with an intercept column."""
    m = draw(st.integers(m_min, m_max))
    p = draw(st.integers(1, min(p_max, m - 3)))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    x = np.column_stack([np.ones(m), rng.normal(size=(m, p - 1))])
    if balanced is None:
        balanced = draw(st.booleans())
    if balanced:
        d = np.full(m, float(rng.uniform(0.2, 3.0)))
    else:
        d = rng.uniform(0.1, 3.0, m)
    psi = float(rng.uniform(0.0, 3.0))
    beta = rng.normal(size=p)
    y = x @ beta + rng.normal(size=m) * np.sqrt(psi) + rng.normal(size=m) * np.sqrt(d)
    k = rng.uniform(-1.5, 8.0, m) if with_kurtosis else np.zeros(m)
    return AreaDataset(y, x, d, k)


@pytest.fixture
def balanced3():
    return make_dataset([2.0, -2.0, 0.0])
