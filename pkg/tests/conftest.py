import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_symmetric(rng, n):
    A = rng.normal(size=(n, n))
    return A + A.T


def random_qp(rng, max_d=5, max_p=8):
    """Small feasible, bounded convex QP; about one in five has a singular Q."""
    from qsurf.qp import QPProblem

    d = int(rng.integers(1, max_d + 1))
    p = int(rng.integers(0, max_p + 1))
    if rng.random() < 0.8:
        B = rng.normal(size=(d, d))
        Q = B @ B.T + 1e-3 * np.eye(d)
    else:
        B = rng.normal(size=(d, max(1, d - 2)))
        Q = B @ B.T
    q = rng.normal(size=d)
    if np.linalg.eigvalsh(Q).min() < 1e-8:
        # q in range(Q) keeps the objective bounded below
        q = Q @ q
    A = rng.normal(size=(p, d))
    x0 = np.abs(rng.normal(size=d))
    # x0 is feasible; about half the rows are tight at x0
    b = A @ x0 - np.abs(rng.normal(size=p)) * (rng.random(p) < 0.5)
    mask = rng.random(d) < 0.4
    return QPProblem(Q, q, A, b, mask)


def small_quadratic_set(m_per_class=30, seed=3):
    from qsurf import dataset as ds

    data = ds.synth_quadratic(m_per_class, rng_seed=seed)
    norm = ds.fit_normalizer(data)
    return data.with_points(ds.apply_normalizer(norm, data.points))


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
