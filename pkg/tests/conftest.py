import functools

import pytest

from prosumer_opt.model import scenario_preset
from prosumer_opt.optim import RankingEvaluator, exhaustive_search
from prosumer_opt.profiles import default_profiles

WEEK = 7


@functools.lru_cache(maxsize=None)
def week_profiles():
    return default_profiles(42, 6, WEEK)


@functools.lru_cache(maxsize=None)
def week_evaluator(sid: str) -> RankingEvaluator:
    spec = scenario_preset(sid, horizon_days=WEEK)
    return RankingEvaluator(spec, week_profiles())


@functools.lru_cache(maxsize=None)
def week_optimum(sid: str):
    """Exhaustive result for a scenario over the default one-week profiles (cached per session)."""
    ev = week_evaluator(sid)
    return exhaustive_search(ev.spec, ev.profiles, cap=10, evaluator=ev)


# --- acceptance summary ------------------------------------------------------------

_outcomes: dict[int, list[bool]] = {}
_titles: dict[int, str] = {}
_details: dict[int, list[str]] = {}


def note(number: int, text: str) -> None:
    """Attach a measured figure to an acceptance criterion's summary line."""
    _details.setdefault(number, []).append(text)


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    marker = report.user_properties and dict(report.user_properties).get("acceptance")
    if marker:
        number, title = marker
        _titles[number] = title
        _outcomes.setdefault(number, []).append(report.passed)


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_setup(item):
    m = item.get_closest_marker("acceptance")
    if m:
        item.user_properties.append(("acceptance", (m.args[0], m.args[1])))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        ok = all(_outcomes[number])
        terminalreporter.write_line(f"criterion {number:>2} [{'PASS' if ok else 'FAIL'}] {_titles[number]}")
        for text in _details.get(number, []):
            terminalreporter.write_line(f"    {text}")
