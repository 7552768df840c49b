"""Deterministic counterparts of the three agents.

These serve as the fallback when a reply cannot be parsed, as the purely
symbolic pipeline, and as the answer key of the offline oracle backend.
"""

from __future__ import annotations

from typing import Optional, Sequence

from ..features import PatternConfig, classify_pattern
from ..model import (
    AnomalyType,
    DetectionHypothesis,
    LogAssessment,
    LogEntry,
    MetricSeries,
    Possibility,
    Verdict,
)
from ..rules import Ruleset
from ..verifier import verify_log


def symbolic_hypothesis(window: Sequence[MetricSeries], config: PatternConfig = PatternConfig()) -> DetectionHypothesis:
    findings = []
    for m in window:
        pattern = classify_pattern(m, config) if len(m) >= 4 else None
        if pattern is not None:
            findings.append((m.name, pattern))
    if findings:
        why = "pattern classifier flagged " + ", ".join(f"{m} ({p.value})" for m, p in findings)
    else:
        why = "no metric matches a canonical anomaly pattern"
    return DetectionHypothesis(bool(findings), tuple(findings), why)


def _fits_findings(t: AnomalyType, hypothesis: DetectionHypothesis, ruleset: Ruleset) -> bool:
    found = set(hypothesis.findings)
    return all((p.metric, p.required_pattern) in found for p in ruleset[t].metric_predicates)


def symbolic_assessment(
    logs: Sequence[LogEntry | str],
    hypothesis: DetectionHypothesis,
    ruleset: Ruleset,
) -> LogAssessment:
    """High possibility iff some type's log signature fully matches.

    Among matching types the first (enum order) whose metric patterns agree
    with the hypothesis is preferred as the candidate.
    """
    lines = [e.text if isinstance(e, LogEntry) else e for e in logs]
    matches = {}
    for t in ruleset.types:
        check = verify_log(lines, t, ruleset)
        if check.passed:
            matches[t] = check
    if not matches:
        return LogAssessment(Possibility.LOW, (), None, "no anomaly signature matches the log lines")
    candidate = next((t for t in matches if _fits_findings(t, hypothesis, ruleset)), next(iter(matches)))
    evidence = tuple(dict.fromkeys(matches[candidate].matched_evidence))
    return LogAssessment(Possibility.HIGH, evidence, candidate,
                         f"log lines match the {candidate.value} signature")


def _explain(hypothesis: DetectionHypothesis, assessment: Optional[LogAssessment], verdict_type: Optional[AnomalyType]) -> str:
    metrics = ", ".join(f"{m} {p.value}" for m, p in hypothesis.findings) or "no metric pattern"
    if assessment is None:
        return f"Metrics: {metrics}. Logs were not consulted because no metric looked anomalous."
    if verdict_type is None:
        return (f"Metrics: {metrics}. Logs: {assessment.possibility.value} anomaly possibility, "
                f"no incident signature, so the deviation is treated as benign.")
    quote = f" e.g. \"{assessment.evidence[0]}\"" if assessment.evidence else ""
    return f"Metrics: {metrics}. Logs: {assessment.possibility.value} possibility of {verdict_type.value}{quote}."


def symbolic_decision(hypothesis: DetectionHypothesis, assessment: Optional[LogAssessment]) -> Verdict:
    if not hypothesis.anomaly_detected or assessment is None:
        return Verdict(False, None, _explain(hypothesis, assessment, None))
    if assessment.possibility is Possibility.HIGH and assessment.candidate_type is not None:
        t = assessment.candidate_type
        return Verdict(True, t, _explain(hypothesis, assessment, t))
    return Verdict(False, None, _explain(hypothesis, assessment, None))


def symbolic_retest(
    hypothesis: DetectionHypothesis,
    assessment: LogAssessment,
    previous: Verdict,
    failed_checks: Sequence[str],
    suggested_type: Optional[AnomalyType],
) -> Verdict:
    if suggested_type is not None:
        return Verdict(True, suggested_type,
                       f"Verifier found the {suggested_type.value} signature in both metrics and logs.")
    baseline = symbolic_decision(hypothesis, assessment)
    if not baseline.same_decision(previous):
        return Verdict(baseline.is_anomaly, baseline.anomaly_type,
                       f"Revised after failed checks: {baseline.explanation}")
    return Verdict(previous.is_anomaly, previous.anomaly_type,
                   "No better-supported answer; keeping the previous verdict.")
