"""Seeded generation of labeled, temporally aligned metric + log cases."""

from __future__ import annotations

import re
import string
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from ..dataset import Manifest
from ..features import PatternConfig, classify_pattern
from ..model import (
    DEFAULT_INTERVAL_SECONDS,
    DEFAULT_UNITS,
    METRIC_NAMES,
    AnomalyType,
    CaseLabel,
    CaseRecord,
    Difficulty,
    LogEntry,
    MetricSeries,
    PatternType,
)
from ..rules import Ruleset, default_ruleset
from ..verifier import verify_log, verify_metric
from .templates import MetricScript, ScenarioTemplate, TemplateSet, load_templates

JITTER = 0.05
SHAPE_ATTEMPTS = 8

QUIET_RANGES = {
    "cpu": (5.0, 60.0),
    "gpu": (0.5, 40.0),
    "memory": (20.0, 70.0),
    "disk_io": (1.0, 80.0),
    "net_in": (1.0, 100.0),
    "net_out": (1.0, 100.0),
}

# numeric readings that must never leak from metrics into log text
METRIC_READING_RX = re.compile(
    r"\d\s*%|\d\s*(?:[KMGT]i?B|[KMGT]?bit|B)/s\b|\d\s*[KMG]bps\b", re.IGNORECASE
)


class InfeasibleRangeError(ValueError):
    pass


class ClosureError(RuntimeError):
    """A generated case does not satisfy its template's rule signature."""

    def __init__(self, template_id: str, reason: str):
        super().__init__(f"template {template_id}: {reason}")
        self.template_id = template_id


@dataclass(frozen=True)
class GenSpec:
    seed: int = 0
    anomaly_cases: int = 19
    normal_cases: int = 30
    difficulty_split: float = 30 / 49
    easy_length: int = 20
    difficult_length: int = 60
    easy_noise_lines: tuple[int, int] = (3, 8)
    difficult_noise_lines: tuple[int, int] = (20, 60)
    easy_metric_count: int = 2
    difficult_metric_count: int = 5
    interval_seconds: int = DEFAULT_INTERVAL_SECONDS
    pattern_config: PatternConfig = field(default_factory=PatternConfig)

    def __post_init__(self) -> None:
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.anomaly_cases < 0 or self.normal_cases < 0 or self.anomaly_cases + self.normal_cases == 0:
            raise ValueError("case counts must be non-negative and not both zero")
        if self.easy_length < 4 or self.difficult_length < 4:
            raise ValueError("window lengths must be at least 4")
        if not 0 <= self.difficulty_split <= 1:
            raise ValueError("difficulty_split must lie in [0, 1]")


class Dataset(NamedTuple):
    manifest: Manifest
    cases: list[CaseRecord]


def onset_index(pattern: Optional[PatternType], length: int, config: PatternConfig = PatternConfig()) -> int:
    """Sample index where a generated shape begins."""
    if pattern in (PatternType.SPIKE, PatternType.DIP):
        return length - max(1, round(length * 0.3))
    if pattern is PatternType.FLUCTUATION:
        return max(1, int(length * config.baseline_fraction))
    return 0


def _jitter(rng: np.random.Generator, level: float | np.ndarray, size: int, amount: float = JITTER) -> np.ndarray:
    return level * (1 + rng.uniform(-amount, amount, size))


def _shape(pattern: Optional[PatternType], low: float, high: float, n: int,
           rng: np.random.Generator, config: PatternConfig) -> np.ndarray:
    q = (high - low) / 4
    onset = onset_index(pattern, n, config)
    if pattern is None:
        return _jitter(rng, rng.uniform(low, low + q), n)
    if pattern is PatternType.SPIKE:
        b_hi = min(low + q, high / 2.4)
        if b_hi < low:
            raise InfeasibleRangeError(f"no baseline in [{low}, {high}] leaves room for a spike")
        b = rng.uniform(low, b_hi)
        h = rng.uniform(2.2 * b, min(high / (1 + JITTER), 3.4 * b))
        return np.concatenate([_jitter(rng, b, onset), _jitter(rng, h, n - onset)])
    if pattern is PatternType.DIP:
        top = high / (1 + JITTER)
        big = rng.uniform(min(high - q, top), top)
        d_lo, d_hi = max(low, 0.1 * big), 0.3 * big
        if d_lo > d_hi:
            raise InfeasibleRangeError(f"range [{low}, {high}] cannot hold a dip below 30% of baseline")
        d = rng.uniform(d_lo, d_hi)
        return np.concatenate([_jitter(rng, big, onset), _jitter(rng, d, n - onset)])
    if pattern in (PatternType.GRADUAL_INCREASE, PatternType.GRADUAL_DECREASE):
        if (high - low) / 2 < 0.25 * high:
            raise InfeasibleRangeError(f"range [{low}, {high}] is too narrow for a ramp")
        start, end = rng.uniform(low, low + q), rng.uniform(high - q, high)
        if pattern is PatternType.GRADUAL_DECREASE:
            start, end = end, start
        steps = rng.uniform(0.5, 1.5, n - 1)
        steps *= (end - start) / steps.sum()
        return start + np.concatenate([[0.0], np.cumsum(steps)])
    if pattern is PatternType.FLUCTUATION:
        m_hi = min(low + 2 * q, high / 1.5)
        if m_hi < low + q:
            raise InfeasibleRangeError(f"range [{low}, {high}] cannot hold a fluctuation")
        m = rng.uniform(low + q, m_hi)
        swing = rng.uniform(0.36, 0.44, n - onset)
        signs = np.where(np.arange(n - onset) % 2 == 0, 1.0, -1.0) * rng.choice([-1.0, 1.0])
        return np.concatenate([_jitter(rng, m, onset, 0.03), m * (1 + signs * swing)])
    raise ValueError(f"unknown pattern {pattern!r}")


def gen_metric_series(
    pattern: Optional[PatternType],
    value_range: tuple[float, float],
    length: int,
    rng: np.random.Generator,
    name: str = "cpu",
    unit: Optional[str] = None,
    interval_seconds: int = DEFAULT_INTERVAL_SECONDS,
    config: PatternConfig = PatternConfig(),
) -> MetricSeries:
    """Draw one series showing ``pattern`` (or a quiet baseline for ``None``).

    The result is re-classified and redrawn from the same generator until it
    classifies as requested, so the closure holds under ``config``.
    """
    low, high = map(float, value_range)
    unit = unit or DEFAULT_UNITS[name]
    if not 0 <= low < high:
        raise InfeasibleRangeError(f"invalid range [{low}, {high}]")
    if unit == "percent" and high > 100:
        raise InfeasibleRangeError("percent series cannot exceed 100")
    if length < 4:
        raise ValueError("length must be at least 4")
    for _ in range(SHAPE_ATTEMPTS):
        values = np.round(np.clip(_shape(pattern, low, high, length, rng, config), 0.0, high), 3)
        if classify_pattern(values, config) == pattern:
            return MetricSeries(name, unit, interval_seconds, tuple(values.tolist()))
    raise InfeasibleRangeError(f"could not draw a {pattern} series in [{low}, {high}] of length {length}")


# -- log rendering -----------------------------------------------------------

USERS = ("deploy", "ubuntu", "alice", "bob", "jenkins", "ops", "svc-web", "mlops")
DOMAINS = ("example.net", "corp-mail.org", "datahub.io", "cdnsite.com", "fastlane.cc")
APPS = ("orders", "billing", "search", "inventory", "catalog")
JOBS = ("resnet50", "bert-ft", "llama-lora", "vit-b16", "wav2vec")
CRAWLERS = ("Bytespider/1.0", "AhrefsBot/7.0", "PetalBot/2.0", "MJ12bot/v1.4.8", "DataForSeoCrawler/1.0")
PATHS = ("products", "blog", "tags", "search", "category", "reviews")
EXTERNAL_PREFIXES = (45, 91, 103, 185, 193, 212)


def _ext_ip(rng: np.random.Generator) -> str:
    a = int(rng.choice(EXTERNAL_PREFIXES))
    return f"{a}.{rng.integers(1, 255)}.{rng.integers(1, 255)}.{rng.integers(1, 255)}"


def _mac(rng: np.random.Generator) -> str:
    return "02:42:" + ":".join(f"{int(b):02x}" for b in rng.integers(0, 256, 4))


def _case_slots(rng: np.random.Generator) -> dict[str, str]:
    return {
        "pid": str(rng.integers(1000, 65000)),
        "user": str(rng.choice(USERS)),
        "ext_ip": _ext_ip(rng),
        "host_ip": f"10.0.{rng.integers(1, 255)}.{rng.integers(2, 255)}",
        "gw_ip": "10.0.0.1",
        "ip": f"10.{rng.integers(1, 255)}.{rng.integers(1, 255)}.{rng.integers(2, 255)}",
        "domain": str(rng.choice(DOMAINS)),
        "hex": "".join(rng.choice(list("0123456789abcdef"), 12)),
        "mac": _mac(rng),
        "mac2": _mac(rng),
        "ver": f"{rng.integers(1, 7)}.{rng.integers(0, 22)}.{rng.integers(0, 10)}",
        "app": str(rng.choice(APPS)),
        "job": f"{rng.choice(JOBS)}-{rng.integers(100, 999)}",
        "date": f"2025{rng.integers(1, 13):02d}{rng.integers(1, 29):02d}",
    }


class _LineSlots(dict):
    """Per-case slots plus values drawn fresh for each rendered line."""

    def __init__(self, fixed: dict[str, str], rng: np.random.Generator):
        super().__init__(fixed)
        self._rng = rng

    def __missing__(self, key: str) -> str:
        rng = self._rng
        draw = {
            "pidx": lambda: str(rng.integers(1000, 65000)),
            "port": lambda: str(rng.integers(1024, 65535)),
            "port2": lambda: str(rng.choice([22, 23, 80, 443, 445, 1433, 3306, 3389, 5432, 6379, 8080])),
            "n": lambda: str(rng.integers(2, 9999)),
            "cip": lambda: _ext_ip(rng),
            "path": lambda: f"{rng.choice(PATHS)}/{rng.integers(1, 5000)}",
            "crawler": lambda: str(rng.choice(CRAWLERS)),
        }.get(key)
        if draw is None:
            raise KeyError(f"unknown template slot {{{key}}}")
        self[key] = value = draw()
        return value


def render_line(text: str, fixed: dict[str, str], rng: np.random.Generator) -> str:
    return string.Formatter().vformat(text, (), _LineSlots(fixed, rng))


def _spread(rng: np.random.Generator, count: int, t0: int, t1: int) -> list[int]:
    if count == 0:
        return []
    return sorted(int(t) for t in rng.integers(t0, t1 + 1, count))


# -- cases -------------------------------------------------------------------

def _scripts(template: ScenarioTemplate, difficulty: Difficulty) -> tuple[MetricScript, ...]:
    scripts = template.metric_script
    if difficulty is Difficulty.DIFFICULT:
        scripts = scripts + template.difficult_metrics
    return scripts


def gen_case(
    template: ScenarioTemplate,
    difficulty: Difficulty,
    rng: np.random.Generator,
    case_id: str = "case",
    spec: GenSpec = GenSpec(),
    benign_pool: Sequence[str] = (),
    ruleset: Optional[Ruleset] = None,
) -> CaseRecord:
    difficulty = Difficulty(difficulty)
    ruleset = ruleset or default_ruleset(spec.pattern_config)
    config = spec.pattern_config
    easy = difficulty is Difficulty.EASY
    n = spec.easy_length if easy else spec.difficult_length
    metric_count = spec.easy_metric_count if easy else spec.difficult_metric_count
    scripts = _scripts(template, difficulty)
    if template.is_anomaly and not easy and len(scripts) < 2:
        raise ClosureError(template.id, "difficult anomaly cases need two or more anomalous metrics")
    if len(scripts) > metric_count:
        raise ClosureError(template.id, f"{len(scripts)} scripted metrics exceed the {metric_count}-metric window")

    series = {}
    for s in scripts:
        try:
            series[s.name] = gen_metric_series(s.pattern, s.value_range, n, rng, s.name,
                                               interval_seconds=spec.interval_seconds, config=config)
        except InfeasibleRangeError as exc:
            raise ClosureError(template.id, f"{s.name}: {exc}") from None
    spare = [m for m in METRIC_NAMES if m not in series]
    for name in rng.choice(spare, metric_count - len(series), replace=False):
        name = str(name)
        series[name] = gen_metric_series(None, QUIET_RANGES[name], n, rng, name,
                                         interval_seconds=spec.interval_seconds, config=config)
    metrics = tuple(series[m] for m in METRIC_NAMES if m in series)

    last_ts = (n - 1) * spec.interval_seconds
    primary = scripts[0].pattern if scripts else None
    start = max(0, onset_index(primary, n, config) - 1) * spec.interval_seconds
    fixed = _case_slots(rng)
    script_lines = []
    for line in template.log_script:
        lo, hi = line.repeat
        script_lines.extend(render_line(line.text, fixed, rng) for _ in range(int(rng.integers(lo, hi + 1))))
    entries = [(t, 0, i, text) for i, (t, text) in
               enumerate(zip(_spread(rng, len(script_lines), start, last_ts), script_lines))]
    lo, hi = spec.easy_noise_lines if easy else spec.difficult_noise_lines
    noise_count = int(rng.integers(lo, hi + 1)) if benign_pool else 0
    noise_times = _spread(rng, noise_count, 0, last_ts)
    for i, t in enumerate(noise_times):
        text = render_line(str(rng.choice(list(benign_pool))), fixed, rng)
        entries.append((t, 1, i, text))
    logs = tuple(LogEntry(t, text) for t, _, _, text in sorted(entries))

    label = CaseLabel(template.is_anomaly, template.anomaly_type, difficulty, template.scenario)
    case = CaseRecord(case_id, label, metrics, logs)
    check_closure(case, template, ruleset)
    return case


def check_closure(case: CaseRecord, template: ScenarioTemplate, ruleset: Ruleset) -> None:
    """Raise :class:`ClosureError` unless ``case`` is solvable by the ruleset."""
    for entry in case.logs:
        if METRIC_READING_RX.search(entry.text):
            raise ClosureError(template.id, f"log line carries a metric reading: {entry.text}")
    if template.is_anomaly:
        t = template.anomaly_type
        m = verify_metric(case.metrics, t, ruleset)
        lg = verify_log(case.logs, t, ruleset)
        if not (m.passed and lg.passed):
            raise ClosureError(template.id, "; ".join(m.failed_items + lg.failed_items))
    else:
        for t in ruleset.types:
            if verify_log(case.logs, t, ruleset).passed:
                raise ClosureError(template.id, f"normal case logs satisfy the {t.value} signature")


def case_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def _easy_flags(count: int, easy: int, rng: np.random.Generator) -> list[bool]:
    flags = np.zeros(count, dtype=bool)
    flags[rng.permutation(count)[:easy]] = True
    return flags.tolist()


def gen_benchmark(
    spec: GenSpec = GenSpec(),
    templates: Optional[TemplateSet] = None,
    ruleset: Optional[Ruleset] = None,
) -> Dataset:
    """Generate a labeled benchmark; every anomaly case is closure-checked."""
    templates = templates or load_templates()
    ruleset = ruleset or default_ruleset(spec.pattern_config)
    types = list(AnomalyType)
    missing = [t.value for t in types if not templates.for_type(t)]
    if missing and spec.anomaly_cases:
        raise ValueError(f"no templates for anomaly types {missing}")
    normals = templates.normal_templates
    if spec.normal_cases and not normals:
        raise ValueError("no normal templates")

    total = spec.anomaly_cases + spec.normal_cases
    easy_total = round(total * spec.difficulty_split)
    easy_anomaly = min(spec.anomaly_cases, round(spec.anomaly_cases * spec.difficulty_split))
    easy_normal = min(spec.normal_cases, max(0, easy_total - easy_anomaly))
    split_rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(2 ** 32,)))
    anomaly_easy = _easy_flags(spec.anomaly_cases, easy_anomaly, split_rng)
    normal_easy = _easy_flags(spec.normal_cases, easy_normal, split_rng)

    plan: list[tuple[ScenarioTemplate, bool]] = []
    for i in range(spec.anomaly_cases):
        t = types[i % len(types)]
        options = templates.for_type(t)
        plan.append((options[(i // len(types)) % len(options)], anomaly_easy[i]))
    for j in range(spec.normal_cases):
        plan.append((normals[j % len(normals)], normal_easy[j]))

    width = max(4, len(str(total)))
    cases = []
    for k, (template, is_easy) in enumerate(plan):
        difficulty = Difficulty.EASY if is_easy else Difficulty.DIFFICULT
        cases.append(gen_case(template, difficulty, case_rng(spec.seed, k), f"case-{k:0{width}d}",
                              spec, templates.benign_pool, ruleset))
    return Dataset(Manifest.from_cases(cases, spec.seed), cases)
