"""Symbolic verification of anomaly hypotheses and the retest/abstain critic loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

from .features import PatternConfig, classify_pattern, extract_features
from .model import (
    AnomalyType,
    CaseRecord,
    FinalVerdict,
    LogEntry,
    MetricSeries,
    Verdict,
    VerdictStatus,
)
from .rules import Ruleset

log = logging.getLogger(__name__)

DEFAULT_MAX_RETRIES = 2


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    failed_items: tuple[str, ...] = ()
    matched_evidence: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "failed_items", tuple(self.failed_items))
        object.__setattr__(self, "matched_evidence", tuple(self.matched_evidence))
        if self.passed != (not self.failed_items):
            raise ValueError("passed must hold exactly when there are no failed items")


def verify_metric(
    metrics: Sequence[MetricSeries],
    t: AnomalyType,
    ruleset: Ruleset,
    config: Optional[PatternConfig] = None,
) -> CheckResult:
    spec = ruleset[t]
    config = config or ruleset.pattern_config
    by_name = {m.name: m for m in metrics}
    failed, evidence = [], []
    for pred in spec.metric_predicates:
        series = by_name.get(pred.metric)
        if series is None:
            failed.append(f"{t.value}: metric {pred.metric} is not present")
            continue
        observed = classify_pattern(series, config) if len(series) >= 4 else None
        if observed != pred.required_pattern:
            seen = observed.value if observed else "no pattern"
            failed.append(f"{t.value}: {pred.metric} should show {pred.required_pattern.value} but shows {seen}")
            continue
        features = extract_features(series)
        aux_ok = True
        for aux in pred.aux_checks:
            value = features.get(aux.statistic)
            if not aux.holds(value):
                aux_ok = False
                failed.append(f"{t.value}: {pred.metric} {aux.describe()} fails (observed {value:.4g})")
        if aux_ok:
            evidence.append(f"{pred.metric}: {observed.value}")
    return CheckResult(not failed, tuple(failed), tuple(evidence))


def verify_log(logs: Sequence[LogEntry], t: AnomalyType, ruleset: Ruleset) -> CheckResult:
    must, must_not = ruleset[t].log_signature.compiled
    lines = [e.text if isinstance(e, LogEntry) else str(e) for e in logs]
    failed, evidence = [], []
    for rx in must:
        hit = next((line for line in lines if rx.search(line)), None)
        if hit is None:
            failed.append(f"{t.value}: no log line matches /{rx.pattern}/")
        else:
            evidence.append(hit)
    for rx in must_not:
        hit = next((line for line in lines if rx.search(line)), None)
        if hit is not None:
            failed.append(f"{t.value}: benign explanation /{rx.pattern}/ present: {hit}")
    return CheckResult(not failed, tuple(failed), tuple(evidence))


def verify_type(case: CaseRecord, t: AnomalyType, ruleset: Ruleset) -> tuple[CheckResult, CheckResult]:
    return verify_metric(case.metrics, t, ruleset), verify_log(case.logs, t, ruleset)


def passing_types(case: CaseRecord, ruleset: Ruleset) -> list[AnomalyType]:
    """Every type whose metric and log checks both pass, in enum order."""
    out = []
    for t in ruleset.types:
        m, lg = verify_type(case, t, ruleset)
        if m.passed and lg.passed:
            out.append(t)
    return out


class Retester(Protocol):
    def retest(self, verdict: Verdict, failed_checks: Sequence[str],
               suggested_type: Optional[AnomalyType]) -> Verdict: ...


def _finish(initial: Verdict, current: Verdict, retries: int) -> FinalVerdict:
    status = VerdictStatus.ACCEPTED if current.same_decision(initial) else VerdictStatus.CORRECTED
    return FinalVerdict(current, status, retries, ())


def verify_and_critic(
    initial: Verdict,
    case: CaseRecord,
    ruleset: Ruleset,
    agents: Retester,
    max_retries: int = DEFAULT_MAX_RETRIES,
) -> FinalVerdict:
    """Validate a decision against the ruleset, retesting on failure.

    An anomalous verdict is accepted once both checks pass for its type. A
    normal verdict is challenged only when some type passes both checks; the
    first such type (enum order) seeds the retest. After ``max_retries``
    failed retests the last verdict is returned with status ``abstained``.
    """
    if max_retries < 0:
        raise ValueError("max_retries must be >= 0")
    current = initial
    retries = 0
    while True:
        suggested = None
        if current.is_anomaly and current.anomaly_type is None:
            failed = ("anomalous verdict names no anomaly type",)
        elif current.is_anomaly:
            m, lg = verify_type(case, current.anomaly_type, ruleset)
            if m.passed and lg.passed:
                return _finish(initial, current, retries)
            failed = m.failed_items + lg.failed_items
        else:
            candidates = passing_types(case, ruleset)
            if not candidates:
                return _finish(initial, current, retries)
            suggested = candidates[0]
            failed = (f"normal verdict contradicted: metrics and logs satisfy the {suggested.value} signature",)
        if retries >= max_retries:
            log.debug("case %s: abstaining after %d retests", case.id, retries)
            return FinalVerdict(current, VerdictStatus.ABSTAINED, retries, failed)
        current = agents.retest(current, failed, suggested)
        retries += 1
