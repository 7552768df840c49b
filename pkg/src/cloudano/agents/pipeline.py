"""End-to-end detection: fast metric triage, event-driven log reasoning, verification."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from ..model import (
    AnomalyType,
    CaseRecord,
    DetectionHypothesis,
    FinalVerdict,
    LogAssessment,
    Possibility,
    Verdict,
    VerdictStatus,
)
from ..rules import Ruleset, default_ruleset
from ..verifier import DEFAULT_MAX_RETRIES, verify_and_critic
from .agents import FALLBACK_TAG, ask, decide, log_agent_assess, metrics_agent_detect
from .backend import Backend
from .parsing import parse_verdict
from .prompts import render_retest_prompt
from .symbolic import symbolic_retest

_NOT_CONSULTED = LogAssessment(Possibility.LOW, (), None, "log agent not consulted")


@dataclass(frozen=True)
class PipelineTrace:
    hypothesis: DetectionHypothesis
    assessment: Optional[LogAssessment]
    initial: Verdict
    final: FinalVerdict


class CriticSession:
    """Retest adapter handed to the critic loop for a single case.

    Retests get one backend call and no repair round; an unreadable reply
    falls back to the symbolic retest rule.
    """

    def __init__(self, hypothesis: DetectionHypothesis, assessment: Optional[LogAssessment],
                 backend: Optional[Backend]):
        self.hypothesis = hypothesis
        self.assessment = assessment or _NOT_CONSULTED
        self.backend = backend

    def retest(self, verdict: Verdict, failed_checks: Sequence[str],
               suggested_type: Optional[AnomalyType]) -> Verdict:
        if self.backend is not None:
            prompt = render_retest_prompt(self.hypothesis, self.assessment, verdict, failed_checks, suggested_type)
            parsed = ask(self.backend, prompt, parse_verdict, repair=False)
            if parsed is not None:
                return parsed
        v = symbolic_retest(self.hypothesis, self.assessment, verdict, failed_checks, suggested_type)
        if self.backend is None:
            return v
        return Verdict(v.is_anomaly, v.anomaly_type, f"{FALLBACK_TAG} {v.explanation}")


class DetectionPipeline:
    """Agents plus (optionally) the symbolic verifier.

    With ``backend=None`` every agent runs its symbolic counterpart. With
    ``use_verifier=False`` the initial decision is returned as accepted,
    which is the ablation mode.
    """

    def __init__(
        self,
        backend: Optional[Backend] = None,
        ruleset: Optional[Ruleset] = None,
        use_verifier: bool = True,
        max_retries: int = DEFAULT_MAX_RETRIES,
    ):
        if max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        self.backend = backend
        self.ruleset = ruleset or default_ruleset()
        self.use_verifier = use_verifier
        self.max_retries = max_retries

    def trace(self, case: CaseRecord) -> PipelineTrace:
        hypothesis = metrics_agent_detect(case.metrics, self.backend, self.ruleset.pattern_config)
        assessment = None
        if hypothesis.anomaly_detected:
            assessment = log_agent_assess(case.logs, hypothesis, self.backend, self.ruleset)
        initial = decide(hypothesis, assessment, self.backend)
        if self.use_verifier:
            session = CriticSession(hypothesis, assessment, self.backend)
            final = verify_and_critic(initial, case, self.ruleset, session, self.max_retries)
        else:
            final = FinalVerdict(initial, VerdictStatus.ACCEPTED, 0, ())
        return PipelineTrace(hypothesis, assessment, initial, final)

    def detect(self, case: CaseRecord) -> FinalVerdict:
        return self.trace(case).final
