import numpy as np
import pytest

from iotvote import _kernels

_PENDING: dict[str, tuple[int, str]] = {}
_OUTCOMES: dict[int, tuple[str, str]] = {}


@pytest.fixture
def criterion(request):
    """Tag the running test as acceptance criterion ``number``."""

    def record(number: int, title: str):
        _PENDING[request.node.nodeid] = (number, title)

    return record


def pytest_runtest_makereport(item, call):
    if item.nodeid not in _PENDING or call.when != "call":
        return
    number, title = _PENDING.pop(item.nodeid)
    if call.excinfo is None:
        outcome = "PASS"
    elif call.excinfo.errisinstance(pytest.skip.Exception):
        outcome = "SKIP"
    else:
        outcome = "FAIL"
    prev = _OUTCOMES.get(number, ("SKIP", title))[0]
    # a criterion may span several tests: any failure fails it, any pass beats skip
    rank = {"FAIL": 2, "PASS": 1, "SKIP": 0}
    _OUTCOMES[number] = (max(prev, outcome, key=rank.get), title)


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_OUTCOMES):
        outcome, title = _OUTCOMES[number]
        terminalreporter.write_line(f"criterion {number}: {outcome:<4}  {title}")


@pytest.fixture(params=sorted(_kernels.BACKENDS))
def backend(request, monkeypatch):
    """Run a test once per available kernel backend."""
    impl = _kernels.BACKENDS[request.param]
    monkeypatch.setattr(_kernels, "best_split", impl.best_split)
    monkeypatch.setattr(_kernels, "knn_neighbors", impl.knn_neighbors)
    return request.param


def blobs(seed=0, n=500, sep=4.0, dim=2):
    """Two Gaussian blobs with unit variance whose means are ``sep`` apart."""
    rng = np.random.default_rng(seed)
    shift = np.zeros(dim)
    shift[0] = sep
    X = np.vstack([rng.normal(0, 1, (n, dim)), rng.normal(0, 1, (n, dim)) + shift])
    y = np.r_[np.zeros(n, dtype=np.intp), np.ones(n, dtype=np.intp)]
    return X, y
