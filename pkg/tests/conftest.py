import pytest
from hypothesis import HealthCheck, settings

from hbtms.config import R_FIXTURE
from hbtms.heatgen import BatterySpec, DischargeSpec
from hbtms.materials import rt35
from hbtms.solver import Scenario

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def battery():
    return BatterySpec(internal_resistance=R_FIXTURE)


@pytest.fixture
def pcm():
    return rt35()


@pytest.fixture
def short_scenario(battery, pcm):
    """Small, quick module run: 3C for two minutes."""
    return Scenario(battery=battery, discharge=DischargeSpec(c_rate=3.0, duration=120.0), pcm=pcm)


# --- acceptance reporting -----------------------------------------------------
# test_acceptance.py records one verdict per check; the terminal summary folds
# them into a single line per criterion.

ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


def record(criterion: int, check: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE.setdefault(criterion, []).append((check, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[crit]
        ok = all(p for _, p, _ in checks)
        parts = "; ".join(f"{name}{'' if p else ' [FAIL]'}: {detail}" for name, p, detail in checks)
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {crit:2d}  {parts}")
