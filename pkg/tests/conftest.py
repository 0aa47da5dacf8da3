import time

import numpy as np
import pytest

from mrkit import kernels

_RESULTS: list[tuple[str, bool, str]] = []
_START = time.perf_counter()
SUITE_BUDGET_S = 60.0


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=sorted(kernels.available_backends()))
def backend(request, monkeypatch):
    """Run a test against each importable kernel backend."""
    mod = kernels.available_backends()[request.param]
    for name in ("iou_matrix", "giou_matrix", "linear_sum_assignment", "greedy_hits"):
        monkeypatch.setattr(kernels, name, getattr(mod, name))
    return request.param


@pytest.fixture
def criterion(request):
    """Record a pass/fail line for an acceptance criterion."""
    label = request.node.get_closest_marker("criterion").args[0]
    state = {"detail": ""}
    yield state
    rep = getattr(request.node, "rep_call", None)
    ok = rep is not None and rep.passed
    _RESULTS.append((label, ok, state["detail"]))


@pytest.hookimpl(wrapper=True, tryfirst=True)
def pytest_runtest_makereport(item, call):
    rep = yield
    if rep.when == "call":
        item.rep_call = rep
    return rep


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    elapsed = time.perf_counter() - _START
    if _RESULTS:
        terminalreporter.section("acceptance criteria")
        for label, ok, detail in _RESULTS:
            terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {label}" + (f" ({detail})" if detail else ""))
    terminalreporter.write_line(f"suite wall time {elapsed:.1f}s (budget {SUITE_BUDGET_S:.0f}s), kernels={kernels.BACKEND}")


def pytest_sessionfinish(session, exitstatus):
    elapsed = time.perf_counter() - _START
    if elapsed > SUITE_BUDGET_S and exitstatus == 0:
        session.exitstatus = 1
