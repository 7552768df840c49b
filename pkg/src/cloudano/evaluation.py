"""Evaluation harness: run detectors over a dataset and score ACA / ATCA / FPR."""

from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .dataset import Manifest
from .model import CaseLabel, CaseRecord, Difficulty, FinalVerdict, Verdict, VerdictStatus

log = logging.getLogger(__name__)

SPLITS = ("anomaly", "normal", "easy", "difficult", "total")
CSV_COLUMNS = ("detector_id", "split", "metric", "value", "case_count", "repeats", "seed")
DEFAULT_REPEATS = 3

Prediction = Union[Verdict, FinalVerdict]


@dataclass(frozen=True)
class Detector:
    """A named case -> verdict function.

    ``typed`` is false for binary detectors, whose ATCA is not reported.
    """

    id: str
    fn: Callable[[CaseRecord], Prediction]
    typed: bool = True
    deterministic: bool = True

    def __call__(self, case: CaseRecord) -> Prediction:
        return self.fn(case)


@dataclass(frozen=True)
class CaseResult:
    case_id: str
    predicted: Optional[Prediction]
    truth: CaseLabel
    aca_correct: bool
    atca_correct: bool
    latency_ms: int
    repeat_index: int
    error: str = ""

    @property
    def verdict(self) -> Optional[Verdict]:
        if isinstance(self.predicted, FinalVerdict):
            return self.predicted.verdict
        return self.predicted


def score(predicted: Optional[Prediction], truth: CaseLabel, abstain_as_wrong: bool = False) -> tuple[bool, bool]:
    """Return ``(aca_correct, atca_correct)`` for one prediction."""
    if predicted is None:
        return False, False
    if isinstance(predicted, FinalVerdict):
        if abstain_as_wrong and predicted.status is VerdictStatus.ABSTAINED:
            return False, False
        predicted = predicted.verdict
    aca = predicted.is_anomaly == truth.is_anomaly
    if truth.is_anomaly:
        atca = predicted.is_anomaly and predicted.anomaly_type == truth.anomaly_type
    else:
        atca = not predicted.is_anomaly
    return aca, atca


def shuffle_seed(seed: int, repeat_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(repeat_index,))


def run_evaluation(
    cases: Sequence[CaseRecord],
    detector: Detector,
    repeats: int = DEFAULT_REPEATS,
    seed: int = 0,
    max_workers: int = 1,
    abstain_as_wrong: bool = False,
) -> list[CaseResult]:
    """Evaluate every case ``repeats`` times.

    Case order is shuffled per repeat from ``shuffle_seed(seed, r)``. A
    detector exception is recorded on the result and scored as wrong.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if max_workers < 1:
        raise ValueError("max_workers must be >= 1")

    def one(case: CaseRecord, r: int) -> CaseResult:
        start = time.perf_counter()
        predicted, error = None, ""
        try:
            predicted = detector(case)
        except Exception as exc:  # recorded, not fatal
            error = f"{type(exc).__name__}: {exc}"
            log.warning("detector %s failed on %s: %s", detector.id, case.id, error)
        elapsed = int(round((time.perf_counter() - start) * 1000))
        aca, atca = score(predicted, case.label, abstain_as_wrong)
        return CaseResult(case.id, predicted, case.label, aca, atca, elapsed, r, error)

    results: list[CaseResult] = []
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        for r in range(repeats):
            order = np.random.default_rng(shuffle_seed(seed, r)).permutation(len(cases))
            batch = [cases[i] for i in order]
            results.extend(pool.map(lambda c: one(c, r), batch))
    return results


@dataclass(frozen=True)
class SplitScore:
    case_count: int
    aca_correct: int
    atca_correct: int
    repeats: int

    def _pct(self, correct: int) -> float:
        if self.case_count == 0:
            return 0.0
        return round(correct / (self.case_count * self.repeats) * 100, 2)

    @property
    def aca_percent(self) -> float:
        return self._pct(self.aca_correct)

    @property
    def atca_percent(self) -> float:
        return self._pct(self.atca_correct)


@dataclass(frozen=True)
class EvalSummary:
    detector_id: str
    splits: dict[str, SplitScore]
    repeats: int
    typed: bool = True
    seed: int = 0
    errors: int = 0
    mean_latency_ms: float = field(default=0.0, compare=False)

    @property
    def fpr_percent(self) -> float:
        return round(100 - self.splits["normal"].aca_percent, 2)

    def aca(self, split: str) -> float:
        return self.splits[split].aca_percent

    def atca(self, split: str) -> Optional[float]:
        return self.splits[split].atca_percent if self.typed else None


def summarize(
    results: Iterable[CaseResult],
    manifest: Manifest,
    detector_id: str = "detector",
    typed: bool = True,
    seed: int = 0,
) -> EvalSummary:
    """Aggregate per split; counts are taken from ``manifest``.

    Raises ``ValueError`` when results and manifest disagree on case ids,
    labels or the number of repeats per case.
    """
    results = list(results)
    if not results:
        raise ValueError("no results to summarize")
    per_case: dict[str, list[CaseResult]] = {}
    for r in results:
        per_case.setdefault(r.case_id, []).append(r)
    ids = {e.id for e in manifest.entries}
    unknown = sorted(set(per_case) - ids)
    missing = sorted(ids - set(per_case))
    if unknown or missing:
        raise ValueError(f"results/manifest mismatch: unknown {unknown[:5]}, missing {missing[:5]}")
    repeats = {len(v) for v in per_case.values()}
    if len(repeats) != 1:
        raise ValueError(f"uneven repeat counts across cases: {sorted(repeats)}")
    n_rep = repeats.pop()

    tallies = {s: [0, 0, 0] for s in SPLITS}  # cases, aca, atca
    for e in manifest.entries:
        rs = per_case[e.id]
        for r in rs:
            truth_type = r.truth.anomaly_type.value if r.truth.anomaly_type else None
            if r.truth.is_anomaly != e.is_anomaly or truth_type != e.anomaly_type:
                raise ValueError(f"label of {e.id} differs between results and manifest")
        aca = sum(r.aca_correct for r in rs)
        atca = sum(r.atca_correct for r in rs)
        difficulty = "easy" if e.difficulty == Difficulty.EASY.value else "difficult"
        for split in ("anomaly" if e.is_anomaly else "normal", difficulty, "total"):
            tallies[split][0] += 1
            tallies[split][1] += aca
            tallies[split][2] += atca

    t = tallies
    for i in range(3):
        if t["total"][i] != t["anomaly"][i] + t["normal"][i] or t["total"][i] != t["easy"][i] + t["difficult"][i]:
            raise AssertionError("split totals are inconsistent")
    splits = {s: SplitScore(c, a, b, n_rep) for s, (c, a, b) in tallies.items()}
    errors = sum(bool(r.error) for r in results)
    latency = float(np.mean([r.latency_ms for r in results]))
    return EvalSummary(detector_id, splits, n_rep, typed, seed, errors, latency)


def _rows(summary: EvalSummary) -> list[tuple]:
    rows = []
    for split in SPLITS:
        s = summary.splits[split]
        rows.append((summary.detector_id, split, "aca", f"{s.aca_percent:.2f}", s.case_count, summary.repeats, summary.seed))
        if summary.typed:
            rows.append((summary.detector_id, split, "atca", f"{s.atca_percent:.2f}", s.case_count,
                         summary.repeats, summary.seed))
    normal = summary.splits["normal"]
    rows.append((summary.detector_id, "normal", "fpr", f"{summary.fpr_percent:.2f}", normal.case_count,
                 summary.repeats, summary.seed))
    return rows


def emit_report(summaries: EvalSummary | Sequence[EvalSummary], fmt: str = "table") -> str:
    """Render one or more summaries as ``table`` or ``csv`` text."""
    if isinstance(summaries, EvalSummary):
        summaries = [summaries]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for s in summaries:
            w.writerows(_rows(s))
        return buf.getvalue()
    if fmt != "table":
        raise ValueError(f"unknown report format {fmt!r}")
    header = ["detector", "metric"] + [f"{s} (n={{{s}}})" for s in SPLITS]
    lines = []
    for s in summaries:
        counts = {k: v.case_count for k, v in s.splits.items()}
        head = [h.format(**counts) for h in header]
        body = [[s.detector_id, "ACA"] + [f"{s.aca(k):.2f}" for k in SPLITS]]
        if s.typed:
            body.append([s.detector_id, "ATCA"] + [f"{s.atca(k):.2f}" for k in SPLITS])
        body.append([s.detector_id, "FPR", "", f"{s.fpr_percent:.2f}", "", "", ""])
        widths = [max(len(r[i]) for r in [head] + body) for i in range(len(head))]
        fmt_row = lambda r: "  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip()  # noqa: E731
        lines += [fmt_row(head), fmt_row(["-" * w for w in widths])] + [fmt_row(r) for r in body]
        lines.append(f"repeats={s.repeats} seed={s.seed} errors={s.errors}")
        lines.append("")
    return "\n".join(lines)
