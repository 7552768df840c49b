"""Statistical features and canonical pattern classification for metric windows."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Optional, Sequence, Union

import numpy as np

from .model import MetricSeries, PatternType

SeriesLike = Union[MetricSeries, Sequence[float], np.ndarray]

# fraction of first differences that must share the trend's sign
MONOTONE_FRACTION_MIN = 0.8


@dataclass(frozen=True)
class FeatureVector:
    mean: float
    std: float
    min: float
    max: float
    variation: float
    skewness: float
    trend: float
    volatility: float

    def get(self, name: str) -> float:
        return getattr(self, name)


@dataclass(frozen=True)
class PatternConfig:
    """Thresholds for :func:`classify_pattern`.

    ``trend_slope_min`` is compared against the fitted change over the whole
    window divided by the series range. ``min_relative_change`` additionally
    requires the fitted change to be a meaningful fraction of the series
    mean, so short stretches of sampling jitter do not read as ramps.
    """

    spike_ratio: float = 2.0
    dip_ratio: float = 0.5
    trend_slope_min: float = 0.3
    fluctuation_cv_min: float = 0.25
    baseline_fraction: float = 0.3
    epsilon: float = 1e-9
    min_relative_change: float = 0.2

    def __post_init__(self) -> None:
        if self.spike_ratio <= 1:
            raise ValueError("spike_ratio must exceed 1")
        if not 0 < self.dip_ratio < 1:
            raise ValueError("dip_ratio must lie in (0, 1)")
        if not 0 < self.baseline_fraction <= 0.5:
            raise ValueError("baseline_fraction must lie in (0, 0.5]")
        for f in ("trend_slope_min", "fluctuation_cv_min", "epsilon", "min_relative_change"):
            if getattr(self, f) <= 0:
                raise ValueError(f"{f} must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "PatternConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown pattern config keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in doc.items()})


def _values(series: SeriesLike) -> np.ndarray:
    if isinstance(series, MetricSeries):
        series = series.values
    return np.asarray(series, dtype=float)


def extract_features(series: SeriesLike) -> FeatureVector:
    x = _values(series)
    n = x.size
    if n < 2:
        raise ValueError("feature extraction needs at least 2 samples")
    mean = float(x.mean())
    centered = x - mean
    m2 = float(np.mean(centered ** 2))
    std = math.sqrt(m2)
    if std == 0.0:
        skewness = 0.0
    else:
        # standardize first; m2 ** 1.5 underflows for tiny but non-zero spreads
        skewness = float(np.mean((centered / std) ** 3))
    idx = np.arange(n, dtype=float)
    idx -= idx.mean()
    trend = float(np.dot(idx, centered) / np.dot(idx, idx))
    diffs = np.diff(x)
    volatility = float(diffs.std()) if std > 0 else 0.0
    return FeatureVector(
        mean=mean,
        std=std,
        min=float(x.min()),
        max=float(x.max()),
        variation=std / mean if mean != 0 else 0.0,
        skewness=skewness,
        trend=trend,
        volatility=volatility,
    )


def _baseline_split(n: int, config: PatternConfig) -> int:
    return max(1, int(n * config.baseline_fraction))


def _is_gradual(x: np.ndarray, config: PatternConfig, direction: int) -> bool:
    n = x.size
    span = float(x.max() - x.min())
    if span <= config.epsilon:
        return False
    idx = np.arange(n, dtype=float)
    idx -= idx.mean()
    fitted_change = float(np.dot(idx, x - x.mean()) / np.dot(idx, idx)) * (n - 1)
    if direction * fitted_change / span < config.trend_slope_min:
        return False
    if abs(fitted_change) < config.min_relative_change * max(float(x.mean()), config.epsilon):
        return False
    diffs = np.diff(x)
    return float(np.mean(direction * diffs > 0)) >= MONOTONE_FRACTION_MIN


def classify_values(values: SeriesLike, config: PatternConfig = PatternConfig()) -> Optional[PatternType]:
    x = _values(values)
    if x.size < 4:
        raise ValueError("pattern classification needs at least 4 samples")
    # ramps are tested before steps: a ramp also clears the peak-to-baseline ratio
    if _is_gradual(x, config, +1):
        return PatternType.GRADUAL_INCREASE
    if _is_gradual(x, config, -1):
        return PatternType.GRADUAL_DECREASE
    k = _baseline_split(x.size, config)
    raw_baseline = float(x[:k].mean())
    baseline = max(raw_baseline, config.epsilon)
    post = x[k:]
    if float(post.max()) >= config.spike_ratio * baseline:
        return PatternType.SPIKE
    # nothing can dip below a zero baseline
    if raw_baseline > config.epsilon and float(post.min()) <= config.dip_ratio * baseline:
        return PatternType.DIP
    mean = float(x.mean())
    if mean > 0 and float(x.std()) / mean >= config.fluctuation_cv_min:
        return PatternType.FLUCTUATION
    return None


def classify_pattern(series: SeriesLike, config: PatternConfig = PatternConfig()) -> Optional[PatternType]:
    """Classify a window as one of the five canonical shapes, or ``None``.

    Predicates are ratio- or range-normalized, so the result is unchanged by
    positive rescaling of the samples.
    """
    return classify_values(series, config)


def detect_onset(series: SeriesLike, config: PatternConfig = PatternConfig()) -> Optional[int]:
    """Index of the first sample whose prefix window classifies as a pattern."""
    x = _values(series)
    if x.size < 4:
        raise ValueError("onset detection needs at least 4 samples")
    for end in range(3, x.size):
        if classify_values(x[: end + 1], config) is not None:
            return end
    return None
