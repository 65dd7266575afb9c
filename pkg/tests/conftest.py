import numpy as np
import pytest

from crnpir.spectrumdb import GridConfig, generate_database


class FixedRandom:
    """Stands in for a numpy Generator; hands out preset arrays in order."""

    def __init__(self, *arrays):
        self.arrays = list(arrays)

    def integers(self, low, high, size=None, dtype=np.uint8):
        a = np.asarray(self.arrays.pop(0), dtype=np.uint8)
        return a.reshape(size) if size is not None else a


@pytest.fixture
def fixed_random():
    return FixedRandom


@pytest.fixture(scope="session")
def small_db():
    return generate_database(GridConfig.strip(64), 32, seed=11)


@pytest.fixture(scope="session")
def raid_db():
    # 6 servers need 8 * 6 | r so chunk bits pack exactly
    return generate_database(GridConfig.strip(90), 24, seed=5, align=48)


def hand_db(blocks):
    from crnpir.spectrumdb import DatabaseMatrix
    return DatabaseMatrix(np.array(blocks, dtype=np.uint8).reshape(len(blocks), -1))


_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Context manager that records PASS/FAIL for one acceptance criterion."""
    from contextlib import contextmanager

    results = request.config.stash.setdefault(_ACCEPTANCE, {})

    @contextmanager
    def run(number, title):
        notes = []
        try:
            yield notes
        except BaseException as exc:
            results[number] = f"FAIL  criterion {number:>2}: {title} ({type(exc).__name__}: {exc})".splitlines()[0]
            raise
        extra = f" [{'; '.join(notes)}]" if notes else ""
        results[number] = f"PASS  criterion {number:>2}: {title}{extra}"

    return run


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_ACCEPTANCE, {})
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
