import pytest

from avery_sim.controller import SchedulerMode
from avery_sim.core import MissionGoal, Policy, StageProfile, table1_lut
from avery_sim.harness import Scenario
from avery_sim.traces import constant_trace


@pytest.fixture(scope="session")
def lut():
    return table1_lut()


def insight_scenario(trace, policy=Policy.AVERY, goal=MissionGoal.PRIORITIZE_ACCURACY, **kw):
    """Insight-only mission with DualStream requested from t=0."""
    kw.setdefault("context_period_s", None)
    kw.setdefault("insight_schedule", ((0.0, SchedulerMode.DUAL_STREAM),))
    kw.setdefault("duration_s", trace.duration_s)
    return Scenario(trace=trace, policy=policy, goal=goal, **kw)


@pytest.fixture
def constant15():
    return constant_trace(15.0, 1200)


@pytest.fixture
def profile():
    return StageProfile()


# one line per acceptance check, printed after the run whatever the outcome
ACCEPTANCE = []


@pytest.fixture
def criterion():
    def record(tag, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} {tag}: {detail}"
        ACCEPTANCE.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
