"""Domain types for paired metric/log telemetry cases and their JSON case format.

All types are frozen dataclasses holding tuples, so a parsed case can be
shared between worker threads without copying.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

METRIC_NAMES = ("cpu", "gpu", "memory", "disk_io", "net_in", "net_out")

DEFAULT_UNITS = {
    "cpu": "percent",
    "gpu": "percent",
    "memory": "percent",
    "disk_io": "MB/s",
    "net_in": "MB/s",
    "net_out": "MB/s",
}
DEFAULT_INTERVAL_SECONDS = 5


class CaseFormatError(ValueError):
    """A case document violates the schema or a type invariant.

    ``field`` is a dotted path to the offending location, e.g.
    ``metrics[1].values``.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class PatternType(str, Enum):
    SPIKE = "Spike"
    DIP = "Dip"
    GRADUAL_INCREASE = "GradualIncrease"
    GRADUAL_DECREASE = "GradualDecrease"
    FLUCTUATION = "Fluctuation"


class AnomalyType(str, Enum):
    MINE = "mine"
    OOM = "oom"
    GPU_HIJACK = "gpu_hijack"
    PORT_SCAN = "port_scan"
    ICMP_FLOOD_DOS = "icmp_flood_dos"
    DNS_AMPLIFICATION = "dns_amplification"
    DATA_EXFILTRATION = "data_exfiltration"
    ARP_SPOOFING = "arp_spoofing"
    LOG_STORM = "log_storm"
    LOG_GROWTH_ANOMALY = "log_growth_anomaly"


class Difficulty(str, Enum):
    EASY = "easy"
    DIFFICULT = "difficult"


class Possibility(str, Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


class VerdictStatus(str, Enum):
    ACCEPTED = "accepted"
    CORRECTED = "corrected"
    ABSTAINED = "abstained"


@dataclass(frozen=True)
class MetricSeries:
    name: str
    unit: str
    interval_seconds: int
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.name not in METRIC_NAMES:
            raise CaseFormatError("name", f"unknown metric {self.name!r}")
        if not isinstance(self.interval_seconds, int) or isinstance(self.interval_seconds, bool) \
                or self.interval_seconds <= 0:
            raise CaseFormatError("interval_seconds", "must be a positive integer")
        if not self.values:
            raise CaseFormatError("values", "must be non-empty")
        for i, v in enumerate(self.values):
            if not math.isfinite(v) or v < 0:
                raise CaseFormatError(f"values[{i}]", f"sample {v!r} is not finite and non-negative")
            if self.unit == "percent" and v > 100:
                raise CaseFormatError(f"values[{i}]", f"percent sample {v!r} exceeds 100")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class LogEntry:
    timestamp: int
    text: str

    def __post_init__(self) -> None:
        if not isinstance(self.timestamp, int) or isinstance(self.timestamp, bool) or self.timestamp < 0:
            raise CaseFormatError("timestamp", "must be a non-negative integer")
        if "\n" in self.text or "\r" in self.text:
            raise CaseFormatError("text", "log line contains a newline")


@dataclass(frozen=True)
class CaseLabel:
    is_anomaly: bool
    anomaly_type: Optional[AnomalyType]
    difficulty: Difficulty
    scenario: str = ""

    def __post_init__(self) -> None:
        if self.is_anomaly != (self.anomaly_type is not None):
            raise CaseFormatError("label", "is_anomaly must be true exactly when anomaly_type is set")


@dataclass(frozen=True)
class CaseRecord:
    id: str
    label: CaseLabel
    metrics: tuple[MetricSeries, ...]
    logs: tuple[LogEntry, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "metrics", tuple(self.metrics))
        object.__setattr__(self, "logs", tuple(self.logs))
        if not self.metrics:
            raise CaseFormatError("metrics", "must be non-empty")
        names = [m.name for m in self.metrics]
        if len(set(names)) != len(names):
            raise CaseFormatError("metrics", "duplicate metric names")
        first = self.metrics[0]
        for i, m in enumerate(self.metrics):
            if len(m) != len(first):
                raise CaseFormatError(f"metrics[{i}].values", "series lengths differ within the case")
            if m.interval_seconds != first.interval_seconds:
                raise CaseFormatError(f"metrics[{i}].interval_seconds", "intervals differ within the case")
        span = self.window_seconds
        prev = 0
        for i, entry in enumerate(self.logs):
            if entry.timestamp < prev:
                raise CaseFormatError(f"logs[{i}].timestamp", "log entries are not sorted by timestamp")
            if entry.timestamp > span:
                raise CaseFormatError(f"logs[{i}].timestamp", f"outside the {span}s metric window")
            prev = entry.timestamp

    @property
    def window_length(self) -> int:
        return len(self.metrics[0])

    @property
    def window_seconds(self) -> int:
        return len(self.metrics[0]) * self.metrics[0].interval_seconds

    def metric(self, name: str) -> Optional[MetricSeries]:
        for m in self.metrics:
            if m.name == name:
                return m
        return None

    @property
    def log_lines(self) -> list[str]:
        return [e.text for e in self.logs]


@dataclass(frozen=True)
class DetectionHypothesis:
    anomaly_detected: bool
    findings: tuple[tuple[str, PatternType], ...] = ()
    raw_rationale: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "findings", tuple((m, PatternType(p)) for m, p in self.findings))
        if self.anomaly_detected != bool(self.findings):
            raise ValueError("anomaly_detected must be true exactly when findings are present")


@dataclass(frozen=True)
class LogAssessment:
    possibility: Possibility
    evidence: tuple[str, ...] = ()
    candidate_type: Optional[AnomalyType] = None
    raw_rationale: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "evidence", tuple(self.evidence))


@dataclass(frozen=True)
class Verdict:
    is_anomaly: bool
    anomaly_type: Optional[AnomalyType] = None
    explanation: str = ""

    def __post_init__(self) -> None:
        # binary detectors may flag an anomaly without naming its type
        if not self.is_anomaly and self.anomaly_type is not None:
            raise ValueError("a normal verdict carries no anomaly_type")

    def same_decision(self, other: "Verdict") -> bool:
        return self.is_anomaly == other.is_anomaly and self.anomaly_type == other.anomaly_type


NORMAL = Verdict(False, None, "")


@dataclass(frozen=True)
class FinalVerdict:
    verdict: Verdict
    status: VerdictStatus
    retries_used: int = 0
    failed_checks: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "failed_checks", tuple(self.failed_checks))
        if self.retries_used < 0:
            raise ValueError("retries_used must be non-negative")
        if self.status is VerdictStatus.ACCEPTED and self.failed_checks:
            raise ValueError("an accepted verdict carries no failed checks")

    @property
    def is_anomaly(self) -> bool:
        return self.verdict.is_anomaly

    @property
    def anomaly_type(self) -> Optional[AnomalyType]:
        return self.verdict.anomaly_type


# -- case documents ---------------------------------------------------------

def _require(doc: dict, key: str, types: type | tuple[type, ...], path: str) -> Any:
    where = f"{path}.{key}" if path else key
    if key not in doc:
        raise CaseFormatError(where, "missing field")
    value = doc[key]
    if isinstance(value, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
        raise CaseFormatError(where, f"expected {types}, got bool")
    if not isinstance(value, types):
        raise CaseFormatError(where, f"expected {getattr(types, '__name__', types)}, got {type(value).__name__}")
    return value


def _nested(path: str, build):
    # re-root field errors raised inside a constructor
    try:
        return build()
    except CaseFormatError as exc:
        raise CaseFormatError(f"{path}.{exc.field}" if path else exc.field, str(exc).split(": ", 1)[-1]) from None


def case_from_dict(doc: Any) -> CaseRecord:
    if not isinstance(doc, dict):
        raise CaseFormatError("<root>", "case document must be a JSON object")
    case_id = _require(doc, "id", str, "")
    label_doc = _require(doc, "label", dict, "")
    is_anomaly = _require(label_doc, "is_anomaly", bool, "label")
    if "anomaly_type" not in label_doc:
        raise CaseFormatError("label.anomaly_type", "missing field")
    raw_type = label_doc["anomaly_type"]
    if raw_type is None:
        anomaly_type = None
    else:
        try:
            anomaly_type = AnomalyType(raw_type)
        except ValueError:
            raise CaseFormatError("label.anomaly_type", f"unknown anomaly type {raw_type!r}") from None
    try:
        difficulty = Difficulty(_require(label_doc, "difficulty", str, "label"))
    except ValueError:
        raise CaseFormatError("label.difficulty", "must be 'easy' or 'difficult'") from None
    scenario = _require(label_doc, "scenario", str, "label")
    label = _nested("", lambda: CaseLabel(is_anomaly, anomaly_type, difficulty, scenario))

    metrics = []
    for i, m in enumerate(_require(doc, "metrics", list, "")):
        path = f"metrics[{i}]"
        if not isinstance(m, dict):
            raise CaseFormatError(path, "expected an object")
        values = _require(m, "values", list, path)
        for j, v in enumerate(values):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise CaseFormatError(f"{path}.values[{j}]", "expected a number")
        name = _require(m, "name", str, path)
        unit = _require(m, "unit", str, path)
        interval = _require(m, "interval_seconds", int, path)
        metrics.append(_nested(path, lambda: MetricSeries(name, unit, interval, tuple(values))))

    logs = []
    for i, entry in enumerate(_require(doc, "logs", list, "")):
        path = f"logs[{i}]"
        if not isinstance(entry, dict):
            raise CaseFormatError(path, "expected an object")
        ts = _require(entry, "timestamp", int, path)
        text = _require(entry, "text", str, path)
        logs.append(_nested(path, lambda: LogEntry(ts, text)))

    return CaseRecord(case_id, label, tuple(metrics), tuple(logs))


def case_to_dict(case: CaseRecord) -> dict:
    return {
        "id": case.id,
        "label": {
            "is_anomaly": case.label.is_anomaly,
            "anomaly_type": case.label.anomaly_type.value if case.label.anomaly_type else None,
            "difficulty": case.label.difficulty.value,
            "scenario": case.label.scenario,
        },
        "metrics": [
            {"name": m.name, "unit": m.unit, "interval_seconds": m.interval_seconds, "values": list(m.values)}
            for m in case.metrics
        ],
        "logs": [{"timestamp": e.timestamp, "text": e.text} for e in case.logs],
    }


def parse_case(document: str | bytes) -> CaseRecord:
    """Parse one JSON case document, validating every type invariant."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise CaseFormatError("<root>", f"not valid JSON ({exc.msg})") from None
    return case_from_dict(doc)


def serialize_case(case: CaseRecord) -> str:
    """Render a case as JSON text; byte-identical for equal records."""
    return json.dumps(case_to_dict(case), indent=2, ensure_ascii=False) + "\n"
