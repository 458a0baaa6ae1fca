import pytest

# criterion id -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE = {}


def record(cid, passed, detail):
    ACCEPTANCE[cid] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {cid}: {detail}")


@pytest.fixture
def rng():
    import numpy as np
    return np.random.default_rng(12345)
