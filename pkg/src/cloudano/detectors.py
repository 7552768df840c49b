"""Named detector registry shared by the CLI and the evaluation harness."""

from __future__ import annotations

from typing import Optional, Sequence

from .agents import Backend, DetectionPipeline
from .baselines import (
    DEFAULT_OOV_THRESHOLD,
    Vocabulary,
    always_anomaly,
    never_anomaly,
    oov_detect,
    rule_ensemble_detect,
)
from .bench import GenSpec, gen_benchmark
from .baselines import build_vocabulary
from .evaluation import Detector
from .rules import Ruleset, default_ruleset
from .verifier import DEFAULT_MAX_RETRIES

DETECTOR_NAMES = (
    "agent",
    "agent-no-verifier",
    "rule-ensemble",
    "oov",
    "always-anomaly",
    "never-anomaly",
)

# offset keeping the OOV reference corpus disjoint from the evaluated seed
REFERENCE_SEED_OFFSET = 10_007
REFERENCE_NORMAL_CASES = 60


def reference_vocabulary(seed: int, ruleset: Optional[Ruleset] = None, cases: int = REFERENCE_NORMAL_CASES) -> Vocabulary:
    """Vocabulary from a freshly generated all-normal corpus under a shifted seed."""
    spec = GenSpec(seed=seed + REFERENCE_SEED_OFFSET, anomaly_cases=0, normal_cases=cases)
    return build_vocabulary(gen_benchmark(spec, ruleset=ruleset).cases)


def build_detector(
    name: str,
    backend: Optional[Backend] = None,
    ruleset: Optional[Ruleset] = None,
    max_retries: int = DEFAULT_MAX_RETRIES,
    vocabulary: Optional[Vocabulary] = None,
    oov_threshold: float = DEFAULT_OOV_THRESHOLD,
    seed: int = 0,
) -> Detector:
    ruleset = ruleset or default_ruleset()
    config = ruleset.pattern_config
    if name in ("agent", "agent-no-verifier"):
        pipeline = DetectionPipeline(backend, ruleset, use_verifier=name == "agent", max_retries=max_retries)
        return Detector(name, pipeline.detect, typed=True, deterministic=backend is None)
    if name == "rule-ensemble":
        return Detector(name, lambda c: rule_ensemble_detect(c, config), typed=False)
    if name == "oov":
        vocab = vocabulary or reference_vocabulary(seed, ruleset)
        return Detector(name, lambda c: oov_detect(c, vocab, oov_threshold), typed=False)
    if name == "always-anomaly":
        return Detector(name, always_anomaly, typed=True)
    if name == "never-anomaly":
        return Detector(name, never_anomaly, typed=True)
    raise ValueError(f"unknown detector {name!r}; choose from {', '.join(DETECTOR_NAMES)}")


def build_detectors(names: Sequence[str], **kwargs) -> list[Detector]:
    return [build_detector(n, **kwargs) for n in names]
