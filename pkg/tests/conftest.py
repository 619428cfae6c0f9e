import time

import pytest

from uq_adapt.driver import run_adaptive
from uq_adapt.param_space import benchmark_config

# criterion id -> (passed, detail), filled in by test_acceptance.py
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def converged_run(tmp_path_factory):
    """One full adaptive run of the built-in benchmark at default settings."""
    out = tmp_path_factory.mktemp("benchmark") / "run"
    t0 = time.perf_counter()
    state, report = run_adaptive(benchmark_config(), out)
    return out, state, report, time.perf_counter() - t0


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split("_")[0]), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {key}: {detail}")
