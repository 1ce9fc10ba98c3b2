import numpy as np
import pytest

from hokpool.kernel_maps import PivotSet
from hokpool.pooling import ScoreSequence

_ACCEPTANCE_LINES = []


def record_criterion(number, title, passed, detail=""):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title}" + (f" | {detail}" if detail else "")
    _ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)


def random_sequence(rng, n, d, label=0, seq_id="s"):
    return ScoreSequence(seq_id, label, rng.dirichlet(np.ones(d), size=n))


def random_pivots(rng, d, k_f, k_t=5, sigma_t=0.1):
    return PivotSet(
        rng.dirichlet(np.ones(d), size=k_f),
        rng.uniform(0.2, 0.6, size=k_f),
        np.linspace(0, 1, k_t) if k_t > 1 else np.array([0.5]),
        sigma_t,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
