"""Optional rewording of generated log lines through a text-completion backend."""

from __future__ import annotations

import logging
from dataclasses import replace
from typing import Optional

from ..agents.backend import AgentPrompt, Backend
from ..agents.parsing import read_fields
from ..agents.prompts import load_prompt
from ..model import CaseRecord, LogEntry
from ..rules import Ruleset, default_ruleset
from ..verifier import verify_log
from .generator import METRIC_READING_RX

log = logging.getLogger(__name__)


def render_rewrite_prompt(case: CaseRecord) -> AgentPrompt:
    body = "Log lines:\n" + "\n".join(f"- {e.text}" for e in case.logs)
    return AgentPrompt(load_prompt("log_rewrite"), body, "lines")


def _read_lines(text: str) -> Optional[list[str]]:
    lines = read_fields(text).get("lines")
    if not isinstance(lines, list):
        return None
    return lines


def label_still_holds(case: CaseRecord, ruleset: Ruleset) -> Optional[str]:
    """Return why ``case`` no longer fits its label, or ``None`` if it does."""
    for e in case.logs:
        if METRIC_READING_RX.search(e.text):
            return f"line carries a metric reading: {e.text}"
    if case.label.is_anomaly:
        check = verify_log(case.logs, case.label.anomaly_type, ruleset)
        if not check.passed:
            return "; ".join(check.failed_items)
        return None
    for t in ruleset.types:
        if verify_log(case.logs, t, ruleset).passed:
            return f"normal logs now satisfy the {t.value} signature"
    return None


def llm_augment_logs(case: CaseRecord, backend: Backend, ruleset: Optional[Ruleset] = None) -> CaseRecord:
    """Reword the log lines of ``case``, keeping timestamps and the label.

    The rewritten case must keep the label's log signature properties;
    otherwise a warning is logged and ``case`` is returned unchanged.
    Backend errors propagate.
    """
    if not case.logs:
        return case
    ruleset = ruleset or default_ruleset()
    lines = _read_lines(backend.complete(render_rewrite_prompt(case)))
    if lines is None or len(lines) != len(case.logs):
        log.warning("case %s: rewrite returned an unusable line list; keeping original", case.id)
        return case
    logs = tuple(LogEntry(e.timestamp, text.strip()) for e, text in zip(case.logs, lines))
    if any(not e.text for e in logs):
        log.warning("case %s: rewrite produced an empty line; keeping original", case.id)
        return case
    rewritten = replace(case, logs=logs)
    problem = label_still_holds(rewritten, ruleset)
    if problem is not None:
        log.warning("case %s: rewrite rejected (%s); keeping original", case.id, problem)
        return case
    return rewritten
