import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile(
    "lab", deadline=None, max_examples=30, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("lab")

# filled by tests/test_acceptance.py, printed once at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def complex_matrices(max_dim=6, scale=2.0):
    """Strategy: small complex square matrices with bounded entries."""
    return st.integers(1, max_dim).flatmap(
        lambda n: st.integers(0, 2**32 - 1).map(
            lambda s: _seeded_matrix(n, s, scale)
        )
    )


def _seeded_matrix(n, seed, scale):
    g = np.random.default_rng(seed)
    return scale * (g.standard_normal((n, n)) + 1j * g.standard_normal((n, n))) / np.sqrt(2 * n)
