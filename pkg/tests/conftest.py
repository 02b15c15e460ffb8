import json
import warnings
from pathlib import Path

import numpy as np
import pytest

from recrank.aggregation import MetricMatrix

FIXTURES = Path(__file__).parent / "fixtures"

# criterion number -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[number] = (bool(passed), detail)
    print(f"ACCEPTANCE {number}: {'PASS' if passed else 'FAIL'} - {detail}")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running end-to-end checks")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(
            f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}")


def load_fixture(name: str) -> MetricMatrix:
    doc = json.loads((FIXTURES / f"{name}.json").read_text())
    q = np.array(doc["q"], dtype=float)
    d, m = q.shape
    return MetricMatrix(q, tuple(f"d{t}" for t in range(d)), tuple(f"M{j}" for j in range(m)))


def random_q(rng: np.random.Generator, d_max: int = 30, m_max: int = 11,
             quantized: bool | None = None) -> MetricMatrix:
    """Positive random metric matrix; half of them quantised so ties occur."""
    d = int(rng.integers(2, d_max + 1))
    m = int(rng.integers(3, m_max + 1))
    if quantized is None:
        quantized = bool(rng.integers(2))
    if quantized:
        q = rng.integers(1, 11, size=(d, m)) / 10.0
    else:
        q = rng.uniform(0.01, 1.0, size=(d, m))
    return MetricMatrix(q, tuple(f"d{t}" for t in range(d)), tuple(f"M{j:02d}" for j in range(m)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def _quiet_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield
