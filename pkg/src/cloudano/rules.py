"""Per-anomaly-type symbolic signatures and the ruleset file format."""

from __future__ import annotations

import json
import operator
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional

from .features import PatternConfig
from .model import METRIC_NAMES, AnomalyType, PatternType

STATISTICS = ("mean", "max", "variation", "volatility", "trend")
COMPARATORS = {
    ">=": operator.ge,
    ">": operator.gt,
    "<=": operator.le,
    "<": operator.lt,
}


class RulesetError(ValueError):
    pass


@dataclass(frozen=True)
class AuxCheck:
    statistic: str
    comparator: str
    threshold: float

    def __post_init__(self) -> None:
        if self.statistic not in STATISTICS:
            raise RulesetError(f"unknown statistic {self.statistic!r}")
        if self.comparator not in COMPARATORS:
            raise RulesetError(f"unknown comparator {self.comparator!r}")

    def holds(self, value: float) -> bool:
        return COMPARATORS[self.comparator](value, self.threshold)

    def describe(self) -> str:
        return f"{self.statistic} {self.comparator} {self.threshold:g}"


@dataclass(frozen=True)
class MetricPredicate:
    metric: str
    required_pattern: PatternType
    aux_checks: tuple[AuxCheck, ...] = ()

    def __post_init__(self) -> None:
        if self.metric not in METRIC_NAMES:
            raise RulesetError(f"unknown metric {self.metric!r}")
        object.__setattr__(self, "required_pattern", PatternType(self.required_pattern))
        object.__setattr__(self, "aux_checks", tuple(self.aux_checks))


@dataclass(frozen=True)
class LogSignature:
    must_match: tuple[str, ...]
    must_not_match: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "must_match", tuple(self.must_match))
        object.__setattr__(self, "must_not_match", tuple(self.must_not_match))
        if not self.must_match:
            raise RulesetError("must_match must be non-empty")
        for pattern in self.must_match + self.must_not_match:
            try:
                re.compile(pattern)
            except re.error as exc:
                raise RulesetError(f"regex {pattern!r} does not compile: {exc}") from None

    @cached_property
    def compiled(self) -> tuple[tuple[re.Pattern, ...], tuple[re.Pattern, ...]]:
        return (tuple(re.compile(p) for p in self.must_match),
                tuple(re.compile(p) for p in self.must_not_match))


@dataclass(frozen=True)
class RuleSpec:
    anomaly_type: AnomalyType
    metric_predicates: tuple[MetricPredicate, ...]
    log_signature: LogSignature
    description: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "anomaly_type", AnomalyType(self.anomaly_type))
        object.__setattr__(self, "metric_predicates", tuple(self.metric_predicates))
        if not self.metric_predicates:
            raise RulesetError(f"{self.anomaly_type.value}: metric_predicates must be non-empty")


@dataclass(frozen=True)
class Ruleset:
    specs: tuple[RuleSpec, ...]
    pattern_config: PatternConfig = field(default_factory=PatternConfig)

    def __post_init__(self) -> None:
        object.__setattr__(self, "specs", tuple(sorted(self.specs, key=lambda s: list(AnomalyType).index(s.anomaly_type))))
        seen = [s.anomaly_type for s in self.specs]
        if len(set(seen)) != len(seen):
            raise RulesetError("more than one RuleSpec for an anomaly type")

    def __contains__(self, t: AnomalyType) -> bool:
        return any(s.anomaly_type == t for s in self.specs)

    def __getitem__(self, t: AnomalyType) -> RuleSpec:
        t = AnomalyType(t)
        for s in self.specs:
            if s.anomaly_type == t:
                return s
        raise KeyError(f"ruleset has no entry for anomaly type {t.value!r}")

    @property
    def types(self) -> list[AnomalyType]:
        return [s.anomaly_type for s in self.specs]


def _pred(metric: str, pattern: PatternType, *aux: tuple[str, str, float]) -> MetricPredicate:
    return MetricPredicate(metric, pattern, tuple(AuxCheck(*a) for a in aux))


P = PatternType
A = AnomalyType

DEFAULT_SPECS = (
    RuleSpec(
        A.MINE,
        (_pred("cpu", P.SPIKE, ("max", ">=", 50.0)),),
        LogSignature((r"xmrig", r"(?i)\bcron\b")),
        "crypto-mining: CPU spike with xmrig fetched and run from a CRON entry",
    ),
    RuleSpec(
        A.OOM,
        (_pred("memory", P.GRADUAL_INCREASE, ("max", ">=", 75.0)),),
        LogSignature((r"(?i)\boom[- ]?kill", r"\bGC\b")),
        "out-of-memory: memory climbs steadily, GC fails and the OOM killer fires",
    ),
    RuleSpec(
        A.GPU_HIJACK,
        (_pred("gpu", P.SPIKE),),
        LogSignature(
            (r"(?i)\bunknown container\b|not in (the )?image allowlist",
             r"(?i)\b(train(ing)?|torchrun|cuda)\b"),
            (r"(?i)approved by ml-platform",),
        ),
        "GPU hijack: GPU spike from a training job in an unrecognised container",
    ),
    RuleSpec(
        A.PORT_SCAN,
        (_pred("net_in", P.FLUCTUATION),),
        LogSignature((r"\[UFW BLOCK\].*\bDPT=\d+.*\bSYN\b",
                      r"(?i)did not receive identification string")),
        "port scan: fluctuating inbound traffic with repeated blocked connection attempts",
    ),
    RuleSpec(
        A.ICMP_FLOOD_DOS,
        (_pred("net_in", P.SPIKE),),
        LogSignature((r"(?i)icmp echo request", r"(?i)net_ratelimit|icmp flood")),
        "ICMP flood: inbound traffic spike with bursts of echo requests",
    ),
    RuleSpec(
        A.DNS_AMPLIFICATION,
        (_pred("net_out", P.SPIKE),),
        LogSignature((r"\bIN ANY\b", r"(?i)named\[\d+\]: client \S+ .*query")),
        "DNS amplification: outbound spike answering ANY queries for spoofed clients",
    ),
    RuleSpec(
        A.DATA_EXFILTRATION,
        (_pred("net_out", P.GRADUAL_INCREASE),),
        LogSignature(
            (r"\b(scp|curl)\b.*(\S+@\S+:|https?://)",
             r"(?i)\.(sql|dump|csv)(\.gz)?\b|\.tar\.gz\b"),
            (r"(?i)approved transfer",),
        ),
        "data exfiltration: outbound traffic ramps while archives leave via scp/curl",
    ),
    RuleSpec(
        A.ARP_SPOOFING,
        (_pred("net_out", P.FLUCTUATION),),
        LogSignature((r"(?i)\barp reply\b", r"(?i)flip flop|changed ethernet address")),
        "ARP spoofing: unstable traffic with a storm of conflicting ARP replies",
    ),
    RuleSpec(
        A.LOG_STORM,
        (_pred("disk_io", P.SPIKE),),
        LogSignature(
            (r"(?i)(crawler|spider|bot)/", r'"(GET|HEAD) /\S* HTTP/1\.[01]"'),
            (r"(?i)verified crawler",),
        ),
        "log storm: disk I/O spike from a burst of crawler requests from unknown addresses",
    ),
    RuleSpec(
        A.LOG_GROWTH_ANOMALY,
        (_pred("disk_io", P.GRADUAL_INCREASE),),
        LogSignature((r"(?i)\bbackup\b", r"(?i)retention (policy )?(disabled|skipped)|rotation skipped")),
        "log growth: disk writes grow steadily as scheduled backups pile up unrotated",
    ),
)


def default_ruleset(pattern_config: Optional[PatternConfig] = None) -> Ruleset:
    return Ruleset(DEFAULT_SPECS, pattern_config or PatternConfig())


def ruleset_to_dict(ruleset: Ruleset) -> dict:
    return {
        "pattern_config": ruleset.pattern_config.to_dict(),
        "rules": [
            {
                "anomaly_type": s.anomaly_type.value,
                "description": s.description,
                "metric_predicates": [
                    {
                        "metric": p.metric,
                        "required_pattern": p.required_pattern.value,
                        "aux_checks": [[a.statistic, a.comparator, a.threshold] for a in p.aux_checks],
                    }
                    for p in s.metric_predicates
                ],
                "log_signature": {
                    "must_match": list(s.log_signature.must_match),
                    "must_not_match": list(s.log_signature.must_not_match),
                },
            }
            for s in ruleset.specs
        ],
    }


def ruleset_from_dict(doc: dict, require_all_types: bool = True) -> Ruleset:
    try:
        specs = []
        for entry in doc["rules"]:
            sig = entry["log_signature"]
            specs.append(RuleSpec(
                AnomalyType(entry["anomaly_type"]),
                tuple(
                    MetricPredicate(
                        p["metric"],
                        PatternType(p["required_pattern"]),
                        tuple(AuxCheck(s, c, float(t)) for s, c, t in p.get("aux_checks", [])),
                    )
                    for p in entry["metric_predicates"]
                ),
                LogSignature(tuple(sig["must_match"]), tuple(sig.get("must_not_match", []))),
                entry.get("description", ""),
            ))
        config = PatternConfig.from_dict(doc.get("pattern_config", {}))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, RulesetError):
            raise
        raise RulesetError(f"malformed ruleset: {exc}") from None
    ruleset = Ruleset(tuple(specs), config)
    missing = [t.value for t in AnomalyType if t not in ruleset]
    if require_all_types and missing:
        raise RulesetError(f"ruleset lacks entries for {missing}")
    return ruleset


def dump_ruleset(ruleset: Ruleset) -> str:
    return json.dumps(ruleset_to_dict(ruleset), indent=2) + "\n"


def load_ruleset(path: str | Path) -> Ruleset:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise RulesetError(f"{path}: not valid JSON ({exc.msg})") from None
    return ruleset_from_dict(doc)
