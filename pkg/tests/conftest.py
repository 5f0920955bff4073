"""Shared fixtures plus a terminal summary for the acceptance criteria."""

import numpy as np
import pytest

from mfcascade import CascadeModel

ACCEPTANCE_LOG: list[str] = []


def record(line: str) -> None:
    ACCEPTANCE_LOG.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LOG:
        terminalreporter.write_line(line)


@pytest.fixture
def binomial():
    return CascadeModel(d=1, weights=(0.25, 0.75), gamma=1.0)


@pytest.fixture
def uniform1d():
    return CascadeModel(d=1, weights=(0.5, 0.5), gamma=1.0)


@pytest.fixture
def quad2d():
    return CascadeModel(d=2, weights=(0.4, 0.4, 0.1, 0.1), gamma=1.0)


def random_multifractal(rng: np.random.Generator) -> CascadeModel:
    """Random non-degenerate model: weights bounded away from 0 and equality."""
    d = int(rng.integers(1, 3))
    while True:
        w = rng.dirichlet(np.ones(1 << d))
        w = np.clip(w, 0.04, None)
        w = w / w.sum()
        if w.max() / w.min() > 1.1:
            return CascadeModel(d=d, weights=tuple(float(x) for x in w),
                                gamma=float(rng.uniform(0.5, 2.0)))
