"""The metrics agent, log agent and decision-maker over a text-completion backend.

Each agent asks once, re-asks once with a repair instruction when the reply
cannot be parsed, and otherwise falls back to its symbolic counterpart. A
``backend`` of ``None`` selects the symbolic path directly.
"""

from __future__ import annotations

import logging
from typing import Callable, Optional, Sequence, TypeVar

from ..features import PatternConfig
from ..model import DetectionHypothesis, LogAssessment, LogEntry, MetricSeries, Possibility, Verdict
from ..rules import Ruleset
from .backend import AgentPrompt, Backend
from .parsing import ParseError, parse_assessment, parse_hypothesis, parse_verdict
from .prompts import render_decision_prompt, render_log_prompt, render_metrics_prompt, repair_prompt
from .symbolic import symbolic_assessment, symbolic_decision, symbolic_hypothesis

log = logging.getLogger(__name__)

FALLBACK_TAG = "[symbolic fallback]"

T = TypeVar("T")


def ask(backend: Backend, prompt: AgentPrompt, parse: Callable[[str], T], repair: bool = True) -> Optional[T]:
    """Return the parsed reply, or ``None`` when it stays unreadable.

    Backend errors propagate untouched.
    """
    try:
        return parse(backend.complete(prompt))
    except ParseError as exc:
        log.debug("unparseable %s reply: %s", prompt.expected_schema, exc)
        if not repair:
            return None
        try:
            return parse(backend.complete(repair_prompt(prompt, exc)))
        except ParseError as exc2:
            log.debug("repair of %s reply failed: %s", prompt.expected_schema, exc2)
            return None


def metrics_agent_detect(
    window: Sequence[MetricSeries],
    backend: Optional[Backend],
    config: PatternConfig = PatternConfig(),
) -> DetectionHypothesis:
    if not window:
        raise ValueError("metric window is empty")
    if backend is not None:
        names = [m.name for m in window]
        parsed = ask(backend, render_metrics_prompt(window), lambda text: parse_hypothesis(text, names))
        if parsed is not None:
            return parsed
    h = symbolic_hypothesis(window, config)
    if backend is None:
        return h
    return DetectionHypothesis(h.anomaly_detected, h.findings, f"{FALLBACK_TAG} {h.raw_rationale}")


def log_agent_assess(
    logs: Sequence[LogEntry],
    hypothesis: DetectionHypothesis,
    backend: Optional[Backend],
    ruleset: Ruleset,
) -> LogAssessment:
    if not logs:
        return LogAssessment(Possibility.LOW, (), None, "no log lines in the window")
    if backend is not None:
        lines = [e.text for e in logs]
        parsed = ask(backend, render_log_prompt(logs, hypothesis), lambda text: parse_assessment(text, lines))
        if parsed is not None:
            return parsed
    a = symbolic_assessment(logs, hypothesis, ruleset)
    if backend is None:
        return a
    return LogAssessment(a.possibility, a.evidence, a.candidate_type, f"{FALLBACK_TAG} {a.raw_rationale}")


def decide(
    hypothesis: DetectionHypothesis,
    assessment: Optional[LogAssessment],
    backend: Optional[Backend],
) -> Verdict:
    if not hypothesis.anomaly_detected or assessment is None:
        return symbolic_decision(hypothesis, None)
    if backend is not None:
        parsed = ask(backend, render_decision_prompt(hypothesis, assessment), parse_verdict)
        if parsed is not None:
            return parsed
    v = symbolic_decision(hypothesis, assessment)
    if backend is None:
        return v
    return Verdict(v.is_anomaly, v.anomaly_type, f"{FALLBACK_TAG} {v.explanation}")
