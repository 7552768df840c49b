"""Structured anomaly reports for on-call engineers."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import asdict, dataclass
from typing import Optional

from .agents.backend import AgentPrompt, Backend, BackendError
from .agents.parsing import read_fields
from .agents.prompts import load_prompt
from .model import AnomalyType, CaseRecord, FinalVerdict, VerdictStatus
from .rules import Ruleset, default_ruleset
from .verifier import verify_log, verify_metric
from .features import classify_pattern

log = logging.getLogger(__name__)

ROOT_CAUSES: dict[AnomalyType, str] = {
    AnomalyType.MINE: "Unauthorized cryptocurrency mining (xmrig) installed and persisted through a CRON entry.",
    AnomalyType.OOM: "Memory leak driving the process into garbage-collection thrash and the OOM killer.",
    AnomalyType.GPU_HIJACK: "An unapproved container is running training workloads on the GPUs.",
    AnomalyType.PORT_SCAN: "An external host is sweeping ports with SYN probes.",
    AnomalyType.ICMP_FLOOD_DOS: "An ICMP echo-request flood is saturating inbound traffic.",
    AnomalyType.DNS_AMPLIFICATION: "The resolver is answering spoofed ANY queries and amplifying traffic to a victim.",
    AnomalyType.DATA_EXFILTRATION: "Database dumps or archives are being copied to an external destination.",
    AnomalyType.ARP_SPOOFING: "A host on the segment is forging ARP replies to hijack traffic.",
    AnomalyType.LOG_STORM: "Unverified crawler traffic is flooding the web server and its access logs.",
    AnomalyType.LOG_GROWTH_ANOMALY: "Backups are piling up on disk because retention or rotation was skipped.",
}

PLAYBOOK: dict[AnomalyType, tuple[str, ...]] = {
    AnomalyType.MINE: (
        "Kill the mining process and quarantine its binary.",
        "Remove the malicious CRON entry and audit other crontabs.",
        "Rotate credentials for the account that logged in and review SSH access.",
        "Block the mining pool domain at the egress firewall.",
    ),
    AnomalyType.OOM: (
        "Restart the affected service to restore capacity.",
        "Capture a heap dump and identify the leaking allocation path.",
        "Set or lower container memory limits and alert on GC overhead.",
    ),
    AnomalyType.GPU_HIJACK: (
        "Stop the unapproved container and revoke its scheduling credentials.",
        "Enforce the image allowlist on the GPU node pool.",
        "Audit who submitted the job and rotate their tokens.",
    ),
    AnomalyType.PORT_SCAN: (
        "Block the scanning source address at the perimeter.",
        "Verify that no unexpected services are listening on the probed ports.",
        "Enable rate limiting on new inbound connections.",
    ),
    AnomalyType.ICMP_FLOOD_DOS: (
        "Rate-limit or drop inbound ICMP echo requests at the edge.",
        "Engage upstream DDoS mitigation if saturation persists.",
        "Block the top offending source ranges.",
    ),
    AnomalyType.DNS_AMPLIFICATION: (
        "Disable recursion and ANY responses for external clients.",
        "Enable response rate limiting on the resolver.",
        "Notify the upstream provider about the spoofed victim address.",
    ),
    AnomalyType.DATA_EXFILTRATION: (
        "Cut the outbound transfer and block the destination host.",
        "Revoke credentials used for the transfer and preserve logs for forensics.",
        "Inventory the copied files and start the data-breach process.",
    ),
    AnomalyType.ARP_SPOOFING: (
        "Isolate the port of the forging MAC address on the switch.",
        "Pin static ARP entries for the gateway on critical hosts.",
        "Enable dynamic ARP inspection on the segment.",
    ),
    AnomalyType.LOG_STORM: (
        "Block or rate-limit the unverified crawler addresses.",
        "Tighten robots rules and add bot verification at the edge.",
        "Move access logs to a volume with headroom until traffic subsides.",
    ),
    AnomalyType.LOG_GROWTH_ANOMALY: (
        "Free space by pruning backups past the retention window.",
        "Re-enable the retention policy and log rotation.",
        "Add disk-usage alerts ahead of the backup schedule.",
    ),
}

BENIGN_HINTS: tuple[tuple[str, re.Pattern], ...] = tuple(
    (why, re.compile(rx, re.IGNORECASE)) for why, rx in (
        ("a package upgrade", r"\b(unattended-upgrades|apt|dpkg|update-initramfs)\b"),
        ("an approved change", r"\bapproved\b|change window"),
        ("a planned drill or load test", r"\b(drill|load test|locust)\b"),
        ("a verified crawler", r"\bverified crawler\b"),
        ("log rotation", r"\blogrotate\b"),
        ("database maintenance", r"\b(vacuum|checkpoint)\b"),
        ("a cache warmup", r"\bwarm(ing|up)\b"),
        ("a release rollout", r"\brelease\b|\bdeploy\b"),
        ("a marketing campaign", r"\bcampaign\b"),
        ("a scheduled job", r"\bscheduled\b|\bCRON\b"),
    )
)


@dataclass(frozen=True)
class AnomalyReport:
    case_id: str
    status: str
    is_anomaly: bool
    anomaly_type: Optional[str]
    summary: str
    reasoning_chain: tuple[str, ...]
    root_cause: str
    remediation: tuple[str, ...]
    verifier_trace: tuple[str, ...]
    retries_used: int
    evidence: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("reasoning_chain", "remediation", "verifier_trace", "evidence"):
            d[k] = list(d[k])
        return d


def _benign_explanation(case: CaseRecord) -> tuple[str, list[str]]:
    reasons, lines = [], []
    for why, rx in BENIGN_HINTS:
        hit = next((e.text for e in case.logs if rx.search(e.text)), None)
        if hit is not None:
            reasons.append(why)
            lines.append(hit)
    if not reasons:
        return "no incident signature appears in the logs", []
    return "the logs point to " + " and ".join(reasons[:2]), lines[:2]


def _pattern_findings(case: CaseRecord, ruleset: Ruleset) -> list[str]:
    out = []
    for m in case.metrics:
        p = classify_pattern(m, ruleset.pattern_config) if len(m) >= 4 else None
        if p is not None:
            out.append(f"{m.name}: {p.value}")
    return out


def render_report(
    final: FinalVerdict,
    case: CaseRecord,
    ruleset: Optional[Ruleset] = None,
    backend: Optional[Backend] = None,
) -> AnomalyReport:
    """Build a report from a pipeline verdict. The template path never fails.

    With a backend the summary paragraph is reworded, and the rewrite is kept
    only if every evidence line and the anomaly type survive verbatim.
    """
    ruleset = ruleset or default_ruleset()
    t = final.anomaly_type
    status = final.status
    unverified = status is VerdictStatus.ABSTAINED
    trace = [f"status: {status.value}", f"retries used: {final.retries_used}"]
    trace += [f"failed: {c}" for c in final.failed_checks]

    if final.is_anomaly and t is not None:
        m_check = verify_metric(case.metrics, t, ruleset)
        l_check = verify_log(case.logs, t, ruleset)
        findings = list(m_check.matched_evidence) or _pattern_findings(case, ruleset)
        evidence = list(dict.fromkeys(l_check.matched_evidence))
        if m_check.passed:
            trace.append(f"passed: {t.value} metric predicates")
        if l_check.passed:
            trace.append(f"passed: {t.value} log signature")
        if not unverified:
            trace += [f"failed: {c}" for c in m_check.failed_items + l_check.failed_items]
        chain = [f"Metric finding: {f}" for f in findings]
        chain += [f"Log evidence: {e}" for e in evidence]
        chain.append("Verification: " + ("checks failed, hypothesis left unverified" if unverified
                                         else f"{t.value} signature confirmed"))
        root = ROOT_CAUSES[t]
        remediation = PLAYBOOK[t]
        prefix = "UNVERIFIED HYPOTHESIS: " if unverified else ""
        summary = f"{prefix}Anomaly of type {t.value} on case {case.id}. {root}"
        if evidence:
            summary += f' Key log line: "{evidence[0]}".'
    elif final.is_anomaly:
        findings, evidence = _pattern_findings(case, ruleset), []
        chain = [f"Metric finding: {f}" for f in findings] + ["Verification: no anomaly type was named"]
        root = "An anomaly was flagged without a type; no playbook applies."
        remediation = ("Triage the flagged metrics manually.",)
        summary = f"UNVERIFIED HYPOTHESIS: case {case.id} was flagged as anomalous without a type."
    else:
        findings = _pattern_findings(case, ruleset)
        why, evidence = _benign_explanation(case)
        chain = [f"Metric finding: {f}" for f in findings] or ["Metric finding: no anomalous pattern"]
        chain += [f"Log evidence: {e}" for e in evidence]
        chain.append("Verification: " + ("checks failed, verdict left unverified" if unverified
                                         else "no anomaly type satisfies both metric and log checks"))
        root = f"Benign activity: {why}."
        remediation = ("No action required.",)
        prefix = "UNVERIFIED HYPOTHESIS: " if unverified else ""
        seen = f" despite {', '.join(findings)}" if findings else ""
        summary = f"{prefix}Case {case.id} is normal{seen}; {why}."

    if backend is not None:
        summary = _rewrite_summary(summary, evidence, t, backend)

    return AnomalyReport(
        case.id, status.value, final.is_anomaly, t.value if t else None, summary,
        tuple(chain), root, tuple(remediation), tuple(trace), final.retries_used, tuple(evidence),
    )


def _rewrite_summary(summary: str, evidence: list[str], t: Optional[AnomalyType], backend: Backend) -> str:
    prompt = AgentPrompt(load_prompt("report_writer"), f"Summary:\n{summary}", "summary")
    try:
        reply = backend.complete(prompt)
    except BackendError as exc:
        log.warning("report rewrite failed, keeping template summary: %s", exc)
        return summary
    new = read_fields(reply).get("summary")
    if not isinstance(new, str) or not new.strip():
        return summary
    required = [e for e in evidence if e in summary] + ([t.value] if t else [])
    if "UNVERIFIED HYPOTHESIS" in summary:
        required.append("UNVERIFIED HYPOTHESIS")
    if all(r in new for r in required):
        return new
    log.warning("report rewrite dropped required text, keeping template summary")
    return summary


def format_report(report: AnomalyReport) -> str:
    lines = [f"Case: {report.case_id}", f"Status: {report.status}",
             f"Verdict: {report.anomaly_type if report.is_anomaly else 'normal'}", "",
             "Summary:", report.summary, "", "Reasoning:"]
    lines += [f"  {i}. {step}" for i, step in enumerate(report.reasoning_chain, 1)]
    lines += ["", f"Root cause: {report.root_cause}", "", "Remediation:"]
    lines += [f"  {i}. {step}" for i, step in enumerate(report.remediation, 1)]
    lines += ["", "Verifier trace:"] + [f"  - {c}" for c in report.verifier_trace]
    return "\n".join(lines) + "\n"


def report_to_json(report: AnomalyReport) -> str:
    return json.dumps(report.to_dict(), indent=2) + "\n"
