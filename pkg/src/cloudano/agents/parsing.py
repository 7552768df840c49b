"""Tolerant reader for the key/value replies the agents are asked to produce."""

from __future__ import annotations

import re
from typing import Optional, Sequence

from ..model import (
    METRIC_NAMES,
    AnomalyType,
    DetectionHypothesis,
    LogAssessment,
    PatternType,
    Possibility,
    Verdict,
)


class ParseError(ValueError):
    pass


_KEY_RX = re.compile(r"^\s*[*#>]*\s*([A-Za-z][A-Za-z _-]*?)\s*\**\s*[:=]\s*(.*)$")
_ITEM_RX = re.compile(r"^\s*[-*•]\s+(.*)$")
_FENCE_RX = re.compile(r"^\s*```")
_TIME_PREFIX_RX = re.compile(r"^\[t\+\d+s\]\s*")

_TRUE = {"true", "yes", "y", "1", "anomaly", "anomalous"}
_FALSE = {"false", "no", "n", "0", "normal", "none"}
_NONE = {"", "none", "null", "n/a", "na", "-", "normal"}


def read_fields(text: str) -> dict[str, object]:
    """Split a reply into ``key -> str`` and ``key -> list[str]`` entries.

    Keys are lower-cased with spaces and dashes folded to underscores.
    Markdown fences are skipped. A key with an empty value collects the
    bullet items that follow it.
    """
    fields: dict[str, object] = {}
    current_list: Optional[list[str]] = None
    for raw in text.splitlines():
        if _FENCE_RX.match(raw):
            continue
        item = _ITEM_RX.match(raw)
        if item and current_list is not None:
            current_list.append(item.group(1).rstrip())
            continue
        m = _KEY_RX.match(raw)
        if m:
            key = re.sub(r"[\s-]+", "_", m.group(1).strip().lower())
            value = m.group(2).strip().strip("*").strip()
            if value:
                fields[key] = value
                current_list = None
            else:
                current_list = []
                fields[key] = current_list
            continue
        if raw.strip() and current_list is None and fields:
            # continuation of the previous scalar value
            last = next(reversed(fields))
            if isinstance(fields[last], str):
                fields[last] = f"{fields[last]} {raw.strip()}"
    return fields


def _scalar(fields: dict, key: str, required: bool = True) -> str:
    value = fields.get(key)
    if value is None:
        if required:
            raise ParseError(f"missing key {key!r}")
        return ""
    if isinstance(value, list):
        return ", ".join(value)
    return str(value)


def _bool(value: str, key: str) -> bool:
    v = value.strip().strip(".").lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise ParseError(f"{key}: cannot read {value!r} as yes/no")


def _anomaly_type(value: str, key: str) -> Optional[AnomalyType]:
    v = value.strip().strip(".`'\"").lower().replace(" ", "_").replace("-", "_")
    if v in _NONE:
        return None
    try:
        return AnomalyType(v)
    except ValueError:
        raise ParseError(f"{key}: {value!r} is not a known anomaly type") from None


_PATTERN_ALIASES = {p.value.lower(): p for p in PatternType}
_PATTERN_ALIASES.update({
    "gradual_increase": PatternType.GRADUAL_INCREASE,
    "gradual increase": PatternType.GRADUAL_INCREASE,
    "gradual_decrease": PatternType.GRADUAL_DECREASE,
    "gradual decrease": PatternType.GRADUAL_DECREASE,
})


def parse_hypothesis(text: str, metric_names: Sequence[str] = METRIC_NAMES) -> DetectionHypothesis:
    fields = read_fields(text)
    detected = _bool(_scalar(fields, "anomaly_detected"), "anomaly_detected")
    raw = _scalar(fields, "findings", required=detected)
    findings = []
    if raw.strip().lower() not in _NONE:
        for part in re.split(r"[,;]", raw):
            if not part.strip():
                continue
            m = re.match(r"^\s*([a-z_]+)\s*[=:(]\s*([A-Za-z _]+?)\s*\)?\s*$", part.strip().lower())
            if not m:
                raise ParseError(f"findings: cannot read {part.strip()!r}")
            metric, pattern = m.group(1), _PATTERN_ALIASES.get(m.group(2))
            if metric not in metric_names:
                raise ParseError(f"findings: metric {metric!r} is not in the window")
            if pattern is None:
                raise ParseError(f"findings: unknown pattern {m.group(2)!r}")
            findings.append((metric, pattern))
    if detected != bool(findings):
        raise ParseError("anomaly_detected disagrees with findings")
    return DetectionHypothesis(detected, tuple(findings), _scalar(fields, "rationale", required=False))


def strip_time_prefix(line: str) -> str:
    return _TIME_PREFIX_RX.sub("", line.strip().strip('"').strip("`"))


def parse_assessment(text: str, log_lines: Sequence[str]) -> LogAssessment:
    fields = read_fields(text)
    raw = _scalar(fields, "possibility").strip(".").lower()
    try:
        possibility = Possibility(raw)
    except ValueError:
        raise ParseError(f"possibility: {raw!r} is not low/medium/high") from None
    candidate = _anomaly_type(_scalar(fields, "candidate_type", required=False), "candidate_type")
    quoted = fields.get("evidence", [])
    if isinstance(quoted, str):
        quoted = [quoted]
    evidence = []
    for q in quoted:
        # only verbatim quotes survive; each resolves to the full line holding it
        for form in (_TIME_PREFIX_RX.sub("", q.strip()), strip_time_prefix(q)):
            line = next((ln for ln in log_lines if form and form in ln), None)
            if line is not None:
                if line not in evidence:
                    evidence.append(line)
                break
    return LogAssessment(possibility, tuple(evidence), candidate, _scalar(fields, "rationale", required=False))


def parse_verdict(text: str) -> Verdict:
    fields = read_fields(text)
    is_anomaly = _bool(_scalar(fields, "is_anomaly"), "is_anomaly")
    t = _anomaly_type(_scalar(fields, "anomaly_type", required=False), "anomaly_type")
    if is_anomaly and t is None:
        raise ParseError("is_anomaly is true but no anomaly_type was given")
    if not is_anomaly:
        t = None
    return Verdict(is_anomaly, t, _scalar(fields, "explanation", required=False))
