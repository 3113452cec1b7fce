import numpy as np
import pytest

# populated by the acceptance suite; one pass/fail line per criterion is
# echoed in the terminal summary
ACCEPTANCE_RESULTS = {}


def record_criterion(num: int, description: str, passed: bool):
    ACCEPTANCE_RESULTS[num] = (description, passed)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_RESULTS):
        desc, ok = ACCEPTANCE_RESULTS[num]
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d} {verdict}: {desc}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_complex(rng, rows, cols):
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def random_psd(rng, n):
    M = random_complex(rng, n, n)
    return M @ M.conj().T
