import time

import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qval import QPoint

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

coords = st.floats(-10, 10, allow_nan=False, allow_infinity=False, width=64)


@st.composite
def qpoints(draw, q=None, n=None, max_q=5, max_n=3):
    q = draw(st.integers(1, max_q)) if q is None else q
    n = draw(st.integers(1, max_n)) if n is None else n
    return QPoint(draw(arrays(np.float64, (q, n), elements=coords)))


@st.composite
def qpoint_pairs(draw, count=2, max_q=5, max_n=3):
    q = draw(st.integers(1, max_q))
    n = draw(st.integers(1, max_n))
    return tuple(draw(qpoints(q, n)) for _ in range(count))


@pytest.fixture(scope="session")
def solutions():
    """Solved root problems on the unit disk, cached per (q, resolution)."""
    from qval.dirichlet import build_disk_mesh, minimize, root_boundary

    cache = {}

    def get(q, resolution):
        key = (q, resolution)
        if key not in cache:
            mesh = build_disk_mesh(1.0, resolution)
            start = time.perf_counter()
            cache[key] = minimize(root_boundary(q, mesh), mesh)
            get.seconds[key] = time.perf_counter() - start
        return cache[key]

    get.seconds = {}
    return get


_acceptance_key = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record one summary line per acceptance criterion."""
    lines = request.config.stash.setdefault(_acceptance_key, {})

    def record(number, ok, detail):
        lines[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_acceptance_key, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
