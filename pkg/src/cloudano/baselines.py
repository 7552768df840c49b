"""Deterministic comparison detectors: a rule-vote ensemble, an OOV log detector
and two degenerate reference detectors."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .features import PatternConfig, classify_pattern, extract_features
from .model import AnomalyType, CaseRecord, MetricSeries, Verdict

RULE_IDS = ("pattern", "variation", "trend", "volatility", "spike_ratio")

# volatility (std of first differences) relative to the mean; quiet telemetry
# with a few percent of jitter stays well under this
VOLATILITY_REFERENCE = 0.1
VOTE_FRACTION = 0.34
DEFAULT_OOV_THRESHOLD = 0.05

_TOKEN_RX = re.compile(r"[a-z0-9]+")
_DIGITS_RX = re.compile(r"\d+")


@dataclass(frozen=True)
class RuleVote:
    metric: str
    rule_id: str
    fired: bool
    detail: str = ""

    def __post_init__(self) -> None:
        if self.rule_id not in RULE_IDS:
            raise ValueError(f"unknown rule id {self.rule_id!r}")


def rule_votes(series: MetricSeries, config: PatternConfig = PatternConfig()) -> list[RuleVote]:
    f = extract_features(series)
    pattern = classify_pattern(series, config) if len(series) >= 4 else None
    mean = abs(f.mean) if abs(f.mean) > config.epsilon else config.epsilon
    trend = abs(f.trend) * (len(series) - 1) / mean
    ratio = f.max / mean if f.mean > config.epsilon else 0.0
    name = series.name
    return [
        RuleVote(name, "pattern", pattern is not None, pattern.value if pattern else "no pattern"),
        RuleVote(name, "variation", f.variation > config.fluctuation_cv_min, f"cv={f.variation:.4g}"),
        RuleVote(name, "trend", trend > config.trend_slope_min, f"normalized trend={trend:.4g}"),
        RuleVote(name, "volatility", f.volatility / mean > VOLATILITY_REFERENCE,
                 f"volatility/mean={f.volatility / mean:.4g}"),
        RuleVote(name, "spike_ratio", ratio >= config.spike_ratio, f"max/mean={ratio:.4g}"),
    ]


def vote_threshold(metric_count: int) -> int:
    if metric_count < 0:
        raise ValueError("metric_count must be non-negative")
    return max(1, math.ceil(metric_count * VOTE_FRACTION))


def rule_ensemble_detect(case: CaseRecord, config: PatternConfig = PatternConfig()) -> Verdict:
    """Binary verdict: anomalous when enough metrics have at least one fired rule."""
    fired = [m.name for m in case.metrics if any(v.fired for v in rule_votes(m, config))]
    need = vote_threshold(len(case.metrics))
    anomalous = len(fired) >= need
    why = f"{len(fired)} of {len(case.metrics)} metrics voted (need {need})"
    if fired:
        why += ": " + ", ".join(fired)
    return Verdict(anomalous, None, why)


@dataclass(frozen=True)
class Vocabulary:
    tokens: frozenset[str]
    source_case_count: int

    def __contains__(self, token: str) -> bool:
        return token in self.tokens

    def __len__(self) -> int:
        return len(self.tokens)


def tokenize(text: str) -> list[str]:
    """Lowercase alphanumeric runs, with every digit run collapsed to ``0``."""
    return [_DIGITS_RX.sub("0", tok) for tok in _TOKEN_RX.findall(text.lower())]


def build_vocabulary(corpus: Iterable[CaseRecord]) -> Vocabulary:
    tokens: set[str] = set()
    count = 0
    for case in corpus:
        count += 1
        for e in case.logs:
            tokens.update(tokenize(e.text))
    if count == 0:
        raise ValueError("vocabulary corpus is empty")
    return Vocabulary(frozenset(tokens), count)


def oov_fraction(case: CaseRecord, vocab: Vocabulary) -> float:
    tokens = [tok for e in case.logs for tok in tokenize(e.text)]
    if not tokens:
        return 0.0
    return sum(tok not in vocab for tok in tokens) / len(tokens)


def oov_detect(case: CaseRecord, vocab: Vocabulary, threshold: float = DEFAULT_OOV_THRESHOLD) -> Verdict:
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    frac = oov_fraction(case, vocab)
    return Verdict(frac > threshold, None, f"oov fraction {frac:.4f} vs threshold {threshold}")


def always_anomaly(case: CaseRecord, anomaly_type: AnomalyType = AnomalyType.MINE) -> Verdict:
    return Verdict(True, anomaly_type, "reference detector: always anomalous")


def never_anomaly(case: CaseRecord) -> Verdict:
    return Verdict(False, None, "reference detector: never anomalous")


def oov_vocabulary_for(cases: Sequence[CaseRecord]) -> Vocabulary:
    """Vocabulary over the normal-labeled cases of ``cases``."""
    return build_vocabulary(c for c in cases if not c.label.is_anomaly)
