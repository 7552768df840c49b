"""Offline backends for tests, CI and the ablation runs."""

from __future__ import annotations

import hashlib
import threading
from collections import Counter
from typing import Mapping, Optional, Sequence

import numpy as np

from ..features import PatternConfig
from ..model import AnomalyType, DetectionHypothesis, LogAssessment, Verdict
from ..rules import Ruleset, default_ruleset
from .backend import AgentPrompt
from .parsing import ParseError, parse_verdict
from .prompts import read_assessment, read_findings, read_log_lines, read_metric_window, read_retest_context
from .symbolic import symbolic_assessment, symbolic_decision, symbolic_hypothesis, symbolic_retest


def format_hypothesis(h: DetectionHypothesis) -> str:
    findings = ", ".join(f"{m}={p.value}" for m, p in h.findings) or "none"
    return (f"anomaly_detected: {'yes' if h.anomaly_detected else 'no'}\n"
            f"findings: {findings}\nrationale: {h.raw_rationale}")


def format_assessment(a: LogAssessment) -> str:
    lines = [f"possibility: {a.possibility.value}",
             f"candidate_type: {a.candidate_type.value if a.candidate_type else 'none'}",
             "evidence:"]
    lines += [f"- {e}" for e in a.evidence]
    lines.append(f"rationale: {a.raw_rationale}")
    return "\n".join(lines)


def format_verdict(v: Verdict) -> str:
    t = v.anomaly_type.value if v.anomaly_type else "none"
    return f"is_anomaly: {str(v.is_anomaly).lower()}\nanomaly_type: {t}\nexplanation: {v.explanation}"


class CountingBackend:
    """Thread-safe call counters shared by the mocks."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.calls_by_schema: Counter[str] = Counter()

    @property
    def calls(self) -> int:
        with self._lock:
            return sum(self.calls_by_schema.values())

    def _count(self, prompt: AgentPrompt) -> None:
        with self._lock:
            self.calls_by_schema[prompt.expected_schema] += 1

    def complete(self, prompt: AgentPrompt) -> str:
        self._count(prompt)
        return self._reply(prompt)

    def _reply(self, prompt: AgentPrompt) -> str:
        raise NotImplementedError


class ScriptedBackend(CountingBackend):
    """Answers from a fixed table keyed by schema name, else ``default``.

    A table value may be a string (always returned) or a sequence of strings
    consumed in order, with the last one repeating.
    """

    def __init__(self, table: Optional[Mapping[str, str | Sequence[str]]] = None, default: str = ""):
        super().__init__()
        self.table = dict(table or {})
        self.default = default

    def _reply(self, prompt: AgentPrompt) -> str:
        entry = self.table.get(prompt.expected_schema, self.default)
        if isinstance(entry, str):
            return entry
        n = self.calls_by_schema[prompt.expected_schema] - 1
        return entry[min(n, len(entry) - 1)]


class GarbageBackend(CountingBackend):
    def _reply(self, prompt: AgentPrompt) -> str:
        return "I am not sure what you mean. Could you rephrase?"


class OracleBackend(CountingBackend):
    """Answers each prompt with what the symbolic ruleset implies for it.

    Evidence is recovered from the rendered prompt text, never from a label,
    so the full parsing and gating path is exercised.
    """

    def __init__(self, ruleset: Optional[Ruleset] = None):
        super().__init__()
        self.ruleset = ruleset or default_ruleset()

    @property
    def config(self) -> PatternConfig:
        return self.ruleset.pattern_config

    def _reply(self, prompt: AgentPrompt) -> str:
        text = prompt.user_text
        schema = prompt.expected_schema
        if schema == "hypothesis":
            return format_hypothesis(symbolic_hypothesis(read_metric_window(text), self.config))
        if schema == "assessment":
            return format_assessment(symbolic_assessment(read_log_lines(text), read_findings(text), self.ruleset))
        if schema == "verdict":
            hypothesis, assessment = read_findings(text), read_assessment(text)
            if "Previous verdict:" in text:
                previous, failed, suggested = read_retest_context(text)
                return format_verdict(symbolic_retest(hypothesis, assessment, previous, failed, suggested))
            return format_verdict(symbolic_decision(hypothesis, assessment))
        # report prose and log rewrites are not modelled
        return ""


class NoisyBackend(CountingBackend):
    """Wraps a backend and corrupts the anomaly type of verdict replies.

    Each verdict reply is corrupted with probability ``rate``. The draw
    depends only on ``seed`` and the prompt text, so runs are reproducible
    and independent of scheduling. An anomalous verdict gets a different
    type; a normal verdict is turned into a random type.
    """

    def __init__(self, inner: CountingBackend, rate: float = 0.3, seed: int = 0):
        if not 0.0 <= rate <= 1.0:
            raise ValueError("rate must lie in [0, 1]")
        super().__init__()
        self.inner = inner
        self.rate = rate
        self.seed = seed
        self._corrupted = 0

    @property
    def corrupted(self) -> int:
        with self._lock:
            return self._corrupted

    def _rng(self, prompt: AgentPrompt) -> np.random.Generator:
        digest = hashlib.sha256(f"{self.seed}\n{prompt.system_text}\n{prompt.user_text}".encode()).digest()
        return np.random.default_rng(int.from_bytes(digest[:8], "little"))

    def _reply(self, prompt: AgentPrompt) -> str:
        reply = self.inner.complete(prompt)
        if prompt.expected_schema != "verdict":
            return reply
        rng = self._rng(prompt)
        if rng.random() >= self.rate:
            return reply
        try:
            v = parse_verdict(reply)
        except ParseError:
            return reply
        types = list(AnomalyType)
        if v.is_anomaly:
            types.remove(v.anomaly_type)
        wrong = types[int(rng.integers(len(types)))]
        with self._lock:
            self._corrupted += 1
        return format_verdict(Verdict(True, wrong, v.explanation))
