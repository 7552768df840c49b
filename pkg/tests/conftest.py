from __future__ import annotations

import numpy as np
import pytest

from cloudano.bench import GenSpec, gen_benchmark, gen_case, load_templates
from cloudano.model import CaseLabel, CaseRecord, Difficulty, LogEntry, MetricSeries
from cloudano.rules import default_ruleset


@pytest.fixture(scope="session")
def ruleset():
    return default_ruleset()


@pytest.fixture(scope="session")
def templates():
    return load_templates()


@pytest.fixture(scope="session")
def benchmark(ruleset, templates):
    return gen_benchmark(GenSpec(seed=0), templates, ruleset)


@pytest.fixture(scope="session")
def sweep(ruleset, templates):
    """200 anomaly and 200 normal cases; enough to hit every template at both difficulties."""
    return gen_benchmark(GenSpec(seed=5, anomaly_cases=200, normal_cases=200), templates, ruleset)


@pytest.fixture
def make_case(templates, ruleset):
    def build(template_id: str, difficulty: str = "easy", seed: int = 0, case_id: str = "case-x") -> CaseRecord:
        return gen_case(templates.get(template_id), Difficulty(difficulty), np.random.default_rng(seed),
                        case_id, GenSpec(), templates.benign_pool, ruleset)
    return build


def constant_case(value: float = 50.0, n: int = 20, logs: tuple[str, ...] = ()) -> CaseRecord:
    metrics = (
        MetricSeries("cpu", "percent", 5, (value,) * n),
        MetricSeries("memory", "percent", 5, (value,) * n),
    )
    entries = tuple(LogEntry(5 * i, text) for i, text in enumerate(logs))
    return CaseRecord("const", CaseLabel(False, None, Difficulty.EASY), metrics, entries)


# -- acceptance criteria summary ----------------------------------------------

_CRITERIA: dict[int, tuple[str, bool, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (rep.when != "call" and not rep.failed):
        return
    number, title = marker.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    _CRITERIA[number] = (title, rep.passed and rep.when == "call", detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok, detail = _CRITERIA[number]
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}: {title}"
        terminalreporter.write_line(line + (f" [{detail}]" if detail else ""))
