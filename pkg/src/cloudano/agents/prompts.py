"""Prompt rendering for each agent, plus readers for the rendered evidence blocks.

The readers let the offline oracle backend recover exactly the evidence an
agent was shown, so mock answers come from the prompt, not the case label.
"""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources
from typing import Optional, Sequence

from ..model import AnomalyType, DetectionHypothesis, LogAssessment, LogEntry, MetricSeries, Verdict
from .backend import AgentPrompt
from .parsing import parse_assessment, parse_verdict


@lru_cache(maxsize=None)
def load_prompt(name: str) -> str:
    return resources.files("cloudano.agents").joinpath(f"prompts/{name}.txt").read_text(encoding="utf-8")


def _findings_block(hypothesis: DetectionHypothesis) -> str:
    if not hypothesis.findings:
        return "- none"
    return "\n".join(f"- {m}: {p.value}" for m, p in hypothesis.findings)


def _assessment_block(assessment: LogAssessment) -> str:
    lines = [
        f"possibility: {assessment.possibility.value}",
        f"candidate_type: {assessment.candidate_type.value if assessment.candidate_type else 'none'}",
        "evidence:",
    ]
    lines += [f"- {e}" for e in assessment.evidence] or ["- none"]
    return "\n".join(lines)


def render_metrics_prompt(window: Sequence[MetricSeries]) -> AgentPrompt:
    first = window[0]
    lines = [f"Window: {len(first)} samples, one every {first.interval_seconds}s.", ""]
    for m in window:
        lines.append(f"metric {m.name} [{m.unit}]: " + ", ".join(repr(v) for v in m.values))
    return AgentPrompt(load_prompt("metrics_agent"), "\n".join(lines), "hypothesis")


def render_log_prompt(logs: Sequence[LogEntry], hypothesis: DetectionHypothesis) -> AgentPrompt:
    lines = ["Metric findings:", _findings_block(hypothesis), "", "Log lines:"]
    lines += [f"[t+{e.timestamp}s] {e.text}" for e in logs]
    return AgentPrompt(load_prompt("log_agent"), "\n".join(lines), "assessment")


def render_decision_prompt(hypothesis: DetectionHypothesis, assessment: LogAssessment) -> AgentPrompt:
    text = "\n".join(["Metric findings:", _findings_block(hypothesis), "",
                      "Log assessment:", _assessment_block(assessment)])
    return AgentPrompt(load_prompt("decision_maker"), text, "verdict")


def render_retest_prompt(
    hypothesis: DetectionHypothesis,
    assessment: LogAssessment,
    previous: Verdict,
    failed_checks: Sequence[str],
    suggested_type: Optional[AnomalyType],
) -> AgentPrompt:
    prev = previous.anomaly_type.value if previous.anomaly_type else "none"
    lines = [
        "Metric findings:", _findings_block(hypothesis), "",
        "Log assessment:", _assessment_block(assessment), "",
        f"Previous verdict: is_anomaly={str(previous.is_anomaly).lower()} anomaly_type={prev}",
        "Failed checks:",
    ]
    lines += [f"- {c}" for c in failed_checks]
    if suggested_type is not None:
        lines.append(f"Verifier suggestion: {suggested_type.value}")
    return AgentPrompt(load_prompt("retest"), "\n".join(lines), "verdict")


def repair_prompt(prompt: AgentPrompt, error: Exception) -> AgentPrompt:
    return prompt.with_suffix(load_prompt("repair").format(error=error))


# -- readers ------------------------------------------------------------------

_METRIC_LINE = re.compile(r"^metric (\w+) \[([^\]]+)\]: (.*)$", re.M)
_WINDOW_LINE = re.compile(r"^Window: (\d+) samples, one every (\d+)s\.$", re.M)
_FINDING_LINE = re.compile(r"^- (\w+): (\w+)$")
_LOG_LINE = re.compile(r"^\[t\+(\d+)s\] (.*)$")


def read_metric_window(user_text: str) -> list[MetricSeries]:
    w = _WINDOW_LINE.search(user_text)
    interval = int(w.group(2)) if w else 5
    return [
        MetricSeries(name, unit, interval, tuple(float(v) for v in values.split(", ")))
        for name, unit, values in _METRIC_LINE.findall(user_text)
    ]


def _section(user_text: str, header: str) -> list[str]:
    lines = user_text.splitlines()
    try:
        start = lines.index(header) + 1
    except ValueError:
        return []
    out = []
    for line in lines[start:]:
        if not line.strip():
            break
        out.append(line)
    return out


def read_findings(user_text: str) -> DetectionHypothesis:
    findings = []
    for line in _section(user_text, "Metric findings:"):
        m = _FINDING_LINE.match(line)
        if m:
            findings.append((m.group(1), m.group(2)))
    return DetectionHypothesis(bool(findings), tuple(findings))


def read_log_lines(user_text: str) -> list[LogEntry]:
    out = []
    for line in user_text.splitlines():
        m = _LOG_LINE.match(line)
        if m:
            out.append(LogEntry(int(m.group(1)), m.group(2)))
    return out


def read_assessment(user_text: str) -> LogAssessment:
    block = "\n".join(_section(user_text, "Log assessment:"))
    evidence = [line[2:] for line in block.splitlines() if line.startswith("- ") and line != "- none"]
    return parse_assessment(block, evidence)


def read_retest_context(user_text: str) -> tuple[Verdict, list[str], Optional[AnomalyType]]:
    m = re.search(r"^Previous verdict: is_anomaly=(\w+) anomaly_type=(\w+)$", user_text, re.M)
    previous = parse_verdict(f"is_anomaly: {m.group(1)}\nanomaly_type: {m.group(2)}") if m else Verdict(False)
    failed = [line[2:] for line in _section(user_text, "Failed checks:") if line.startswith("- ")]
    s = re.search(r"^Verifier suggestion: (\w+)$", user_text, re.M)
    return previous, failed, AnomalyType(s.group(1)) if s else None
