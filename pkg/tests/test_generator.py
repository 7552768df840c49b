from __future__ import annotations

import re
import time
from dataclasses import replace

import numpy as np
import pytest

from cloudano.agents import ScriptedBackend
from cloudano.bench import (
    ClosureError,
    GenSpec,
    InfeasibleRangeError,
    gen_benchmark,
    gen_case,
    gen_metric_series,
    llm_augment_logs,
)
from cloudano.bench.augment import render_rewrite_prompt
from cloudano.bench.generator import METRIC_READING_RX, check_closure, onset_index
from cloudano.bench.templates import MetricScript, templates_from_dict
from cloudano.dataset import load_dataset, write_dataset
from cloudano.features import classify_pattern
from cloudano.model import AnomalyType, Difficulty, PatternType, serialize_case
from cloudano.verifier import verify_log


class EchoRewrite:
    """Rewrite backend that returns the log lines it was given."""

    def __init__(self, edit=lambda line: line):
        self.edit = edit

    def complete(self, prompt):
        lines = [ln[2:] for ln in prompt.user_text.splitlines() if ln.startswith("- ")]
        return "lines:\n" + "\n".join(f"- {self.edit(ln)}" for ln in lines)


@pytest.mark.parametrize("pattern", list(PatternType) + [None])
@pytest.mark.parametrize("length", [20, 60])
def test_metric_series_classifies_as_requested(pattern, length):
    rng = np.random.default_rng(1)
    for _ in range(20):
        s = gen_metric_series(pattern, (10, 100), length, rng, "cpu")
        assert classify_pattern(s) == pattern
        assert len(s) == length and all(0 <= v <= 100 for v in s.values)


def test_metric_series_is_deterministic():
    a = gen_metric_series(PatternType.SPIKE, (10, 100), 20, np.random.default_rng(7), "cpu")
    b = gen_metric_series(PatternType.SPIKE, (10, 100), 20, np.random.default_rng(7), "cpu")
    assert a == b


def test_generated_spike_is_reflected_to_dip():
    rng = np.random.default_rng(3)
    s = gen_metric_series(PatternType.GRADUAL_INCREASE, (10, 100), 20, rng, "cpu")
    x = np.array(s.values)
    assert classify_pattern(2 * x.mean() - x) is PatternType.GRADUAL_DECREASE


@pytest.mark.parametrize("pattern, value_range", [
    (PatternType.SPIKE, (60, 100)),
    (PatternType.GRADUAL_INCREASE, (80, 100)),
    (PatternType.FLUCTUATION, (90, 100)),
    (PatternType.SPIKE, (50, 40)),
    (None, (-1, 10)),
])
def test_infeasible_ranges(pattern, value_range):
    with pytest.raises(InfeasibleRangeError):
        gen_metric_series(pattern, value_range, 20, np.random.default_rng(0), "cpu")


def test_percent_range_above_100_is_infeasible():
    with pytest.raises(InfeasibleRangeError):
        gen_metric_series(PatternType.SPIKE, (10, 150), 20, np.random.default_rng(0), "cpu")


def test_onset_index():
    assert onset_index(PatternType.SPIKE, 20) == 14
    assert onset_index(PatternType.GRADUAL_INCREASE, 20) == 0
    assert onset_index(PatternType.FLUCTUATION, 20) == 6


def test_default_benchmark_shape(benchmark):
    assert benchmark.manifest.counts == {"total": 49, "anomaly": 19, "normal": 30, "easy": 30, "difficult": 19}
    types = {c.label.anomaly_type for c in benchmark.cases if c.label.is_anomaly}
    assert types == set(AnomalyType)
    assert len({c.id for c in benchmark.cases}) == 49


def test_default_benchmark_is_fast_and_deterministic():
    start = time.perf_counter()
    a = gen_benchmark(GenSpec(seed=11))
    assert time.perf_counter() - start < 5
    b = gen_benchmark(GenSpec(seed=11))
    assert [serialize_case(c) for c in a.cases] == [serialize_case(c) for c in b.cases]
    assert a.manifest == b.manifest


def test_different_seeds_differ():
    a = gen_benchmark(GenSpec(seed=1, anomaly_cases=2, normal_cases=2))
    b = gen_benchmark(GenSpec(seed=2, anomaly_cases=2, normal_cases=2))
    assert [serialize_case(c) for c in a.cases] != [serialize_case(c) for c in b.cases]


def test_mine_easy_case(make_case, ruleset):
    case = make_case("mine_xmrig_cron", "easy")
    anomalous = [m.name for m in case.metrics if classify_pattern(m) is not None]
    assert anomalous == ["cpu"]
    assert classify_pattern(case.metric("cpu")) is PatternType.SPIKE
    assert any("xmrig" in ln for ln in case.log_lines)
    assert any(re.search(r"\bCRON\b", ln) for ln in case.log_lines)
    assert len(case.metrics[0]) == 20


def test_difficult_anomalies_have_two_anomalous_metrics(sweep):
    for case in sweep.cases:
        if case.label.is_anomaly and case.label.difficulty is Difficulty.DIFFICULT:
            assert sum(classify_pattern(m) is not None for m in case.metrics) >= 2
            assert len(case.metrics[0]) == 60


def test_deceptive_training_launch(make_case, ruleset):
    case = make_case("dl_training_launch")
    assert classify_pattern(case.metric("gpu")) is PatternType.SPIKE
    assert not any(verify_log(case.logs, t, ruleset).passed for t in AnomalyType)


def test_same_inputs_same_case(make_case):
    assert make_case("port_scan_syn_sweep", "difficult", 4) == make_case("port_scan_syn_sweep", "difficult", 4)


def test_signature_lines_span_the_onset(make_case):
    case = make_case("mine_xmrig_cron", "easy", 2)
    onset_t = (onset_index(PatternType.SPIKE, 20) - 1) * 5
    xmrig = [e.timestamp for e in case.logs if "xmrig" in e.text]
    assert min(xmrig) >= onset_t


def test_deceptiveness_and_modality_separation(sweep):
    normals = [c for c in sweep.cases if not c.label.is_anomaly]
    deceptive = sum(any(classify_pattern(m) is not None for m in c.metrics) for c in normals)
    assert deceptive >= 0.9 * len(normals)
    for case in sweep.cases:
        for line in case.log_lines:
            assert not METRIC_READING_RX.search(line), line


def test_closure_check_names_template(make_case, templates, ruleset):
    bad = replace(templates.get("mine_xmrig_cron"),
                  metric_script=(MetricScript("cpu", PatternType.GRADUAL_INCREASE, (10, 100)),))
    with pytest.raises(ClosureError) as exc:
        gen_case(bad, Difficulty.EASY, np.random.default_rng(0), "x", GenSpec(), templates.benign_pool, ruleset)
    assert exc.value.template_id == "mine_xmrig_cron"


def test_closure_rejects_metric_readings_in_logs(make_case, templates, ruleset):
    case = make_case("routine_quiet")
    from cloudano.model import LogEntry
    leaky = replace(case, logs=(LogEntry(0, "cpu at 97% for pid 4"),))
    with pytest.raises(ClosureError):
        check_closure(leaky, templates.get("routine_quiet"), ruleset)


def test_templates_cover_all_types(templates):
    assert all(templates.for_type(t) for t in AnomalyType)
    assert len([t for t in templates.normal_templates if t.metric_script]) >= 10


def test_template_validation():
    with pytest.raises(ValueError):
        templates_from_dict({"benign_pool": [], "templates": [{"id": "x", "kind": "weird"}]})


def test_dataset_files_round_trip(tmp_path, benchmark):
    write_dataset(tmp_path, list(benchmark.cases), 0)
    manifest, cases = load_dataset(tmp_path)
    assert manifest.counts == benchmark.manifest.counts
    assert cases == list(benchmark.cases)


def test_genspec_validation():
    with pytest.raises(ValueError):
        GenSpec(anomaly_cases=0, normal_cases=0)
    with pytest.raises(ValueError):
        GenSpec(easy_length=3)
    with pytest.raises(ValueError):
        GenSpec(seed=-1)


def test_echo_rewrite_leaves_case_unchanged(make_case, ruleset):
    case = make_case("mine_xmrig_cron")
    assert llm_augment_logs(case, EchoRewrite(), ruleset) == case


def test_rewrite_keeping_keywords_is_accepted(make_case, ruleset):
    case = make_case("mine_xmrig_cron")
    out = llm_augment_logs(case, EchoRewrite(lambda ln: ln.replace("Accepted", "accepted")), ruleset)
    assert out != case and out.label == case.label
    assert [e.timestamp for e in out.logs] == [e.timestamp for e in case.logs]


def test_rewrite_dropping_xmrig_keeps_original(make_case, ruleset, caplog):
    case = make_case("mine_xmrig_cron")
    out = llm_augment_logs(case, EchoRewrite(lambda ln: ln.replace("xmrig", "miner")), ruleset)
    assert out is case
    assert "rejected" in caplog.text


def test_rewrite_that_leaks_readings_or_breaks_shape_is_rejected(make_case, ruleset):
    case = make_case("package_upgrade")
    assert llm_augment_logs(case, EchoRewrite(lambda ln: ln + " cpu 99%"), ruleset) is case
    assert llm_augment_logs(case, ScriptedBackend(default="lines:\n- only one"), ruleset) is case
    assert llm_augment_logs(case, ScriptedBackend(default="no idea"), ruleset) is case


def test_rewrite_prompt_has_no_metric_values(make_case):
    case = make_case("oom_heap_leak")
    text = render_rewrite_prompt(case).user_text
    assert repr(case.metrics[0].values[0]) not in text
