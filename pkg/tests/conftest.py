import numpy as np
import pytest

from gpaml.dataset import MetadataDataset, synthetic_classification

ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one pass/fail line per acceptance criterion."""

    def _report(number, ok, detail):
        status = ok if isinstance(ok, str) else ("PASS" if ok else "FAIL")
        line = f"criterion {number}: {status} - {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def toy_counts():
    return MetadataDataset.from_counts(50, 50)


@pytest.fixture(scope="session")
def easy_data():
    return synthetic_classification(200, separation=10.0, rng=7)


@pytest.fixture
def small_labeled():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(12, 3))
    y = np.arange(12) % 2
    cat = np.array(["A"] * 5 + ["B"] * 7)
    return MetadataDataset(X, y, cat)
