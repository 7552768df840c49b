"""Scenario templates for the synthetic benchmark, loaded from a JSON asset."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from ..model import METRIC_NAMES, AnomalyType, PatternType

KINDS = ("anomaly", "deceptive_normal", "normal")


@dataclass(frozen=True)
class MetricScript:
    name: str
    pattern: PatternType
    value_range: tuple[float, float]


@dataclass(frozen=True)
class LogLine:
    text: str
    repeat: tuple[int, int] = (1, 1)


@dataclass(frozen=True)
class ScenarioTemplate:
    id: str
    kind: str
    anomaly_type: Optional[AnomalyType]
    scenario: str
    metric_script: tuple[MetricScript, ...]
    difficult_metrics: tuple[MetricScript, ...]
    log_script: tuple[LogLine, ...]

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"template {self.id}: unknown kind {self.kind!r}")
        if (self.kind == "anomaly") != (self.anomaly_type is not None):
            raise ValueError(f"template {self.id}: anomaly_type set iff kind is anomaly")
        if self.kind != "normal" and not self.metric_script:
            raise ValueError(f"template {self.id}: needs at least one patterned metric")
        names = [m.name for m in self.metric_script + self.difficult_metrics]
        if len(set(names)) != len(names):
            raise ValueError(f"template {self.id}: metric listed twice")

    @property
    def is_anomaly(self) -> bool:
        return self.kind == "anomaly"


@dataclass(frozen=True)
class TemplateSet:
    templates: tuple[ScenarioTemplate, ...]
    benign_pool: tuple[str, ...]

    def for_type(self, t: AnomalyType) -> list[ScenarioTemplate]:
        return [tp for tp in self.templates if tp.anomaly_type == t]

    @property
    def normal_templates(self) -> list[ScenarioTemplate]:
        return [tp for tp in self.templates if not tp.is_anomaly]

    def get(self, template_id: str) -> ScenarioTemplate:
        for tp in self.templates:
            if tp.id == template_id:
                return tp
        raise KeyError(template_id)


def _metric(doc: dict) -> MetricScript:
    if doc["name"] not in METRIC_NAMES:
        raise ValueError(f"unknown metric {doc['name']!r}")
    low, high = doc["range"]
    return MetricScript(doc["name"], PatternType(doc["pattern"]), (float(low), float(high)))


def _line(doc: Union[str, dict]) -> LogLine:
    if isinstance(doc, str):
        return LogLine(doc)
    lo, hi = doc.get("repeat", (1, 1))
    return LogLine(doc["text"], (int(lo), int(hi)))


def _template(t: dict) -> ScenarioTemplate:
    try:
        return ScenarioTemplate(
            id=t["id"],
            kind=t["kind"],
            anomaly_type=AnomalyType(t["anomaly_type"]) if t.get("anomaly_type") else None,
            scenario=t.get("scenario", ""),
            metric_script=tuple(_metric(m) for m in t.get("metrics", [])),
            difficult_metrics=tuple(_metric(m) for m in t.get("difficult_metrics", [])),
            log_script=tuple(_line(line) for line in t["log_script"]),
        )
    except KeyError as exc:
        raise ValueError(f"template {t.get('id', '?')!r}: missing field {exc.args[0]!r}") from None


def templates_from_dict(doc: dict) -> TemplateSet:
    try:
        raw = doc["templates"]
        pool = tuple(doc["benign_pool"])
    except KeyError as exc:
        raise ValueError(f"template set: missing field {exc.args[0]!r}") from None
    templates = tuple(_template(t) for t in raw)
    ids = [t.id for t in templates]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate template ids")
    return TemplateSet(templates, pool)


def load_templates(path: Optional[str | Path] = None) -> TemplateSet:
    """Load a template set; the packaged default when ``path`` is omitted."""
    if path is None:
        text = resources.files("cloudano.bench").joinpath("assets/templates.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return templates_from_dict(json.loads(text))
