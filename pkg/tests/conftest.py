from __future__ import annotations

import numpy as np
import pytest

from rightmost.ensembles import sample_matrix


@pytest.fixture
def ginibre32():
    return sample_matrix("ginibre", 32, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance verdicts, printed once at the end of the session
VERDICTS: dict[int, tuple[bool, str, float]] = {}


@pytest.fixture
def criterion():
    def record(k: int, ok: bool, detail: str, seconds: float = float("nan")) -> None:
        VERDICTS[k] = (bool(ok), detail, seconds)
        print(f"CRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(VERDICTS):
        ok, detail, sec = VERDICTS[k]
        terminalreporter.write_line(f"CRITERION {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}  [{sec:.0f}s]")
