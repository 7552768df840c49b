"""Command-line entry point.

Exit codes: 0 success, 2 usage error, 3 data or schema error, 4 backend error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .agents import (
    Backend,
    BackendConfig,
    BackendError,
    DetectionPipeline,
    HTTPBackend,
    NoisyBackend,
    OracleBackend,
)
from .agents.backend import DEFAULT_API_KEY_ENV
from .bench import GenSpec, gen_benchmark
from .dataset import Manifest, load_case, load_dataset, write_dataset
from .detectors import DETECTOR_NAMES, build_detector
from .evaluation import emit_report, run_evaluation, summarize
from .model import AnomalyType, CaseFormatError, CaseRecord
from .report import format_report, render_report, report_to_json
from .rules import RulesetError, default_ruleset, dump_ruleset, load_ruleset
from .verifier import DEFAULT_MAX_RETRIES, verify_type

log = logging.getLogger("cloudano")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_BACKEND = 0, 2, 3, 4
DEFAULT_ENDPOINT = "http://localhost:8000/v1/chat/completions"


class UsageError(Exception):
    pass


def _add_backend_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("backend")
    g.add_argument("--backend", choices=("mock", "real", "none"), default="mock",
                   help="mock: offline oracle; real: HTTP chat endpoint; none: symbolic agents")
    g.add_argument("--mock-noise", type=float, default=0.0, metavar="RATE",
                   help="corrupt mock verdict types at this rate (ablation studies)")
    g.add_argument("--mock-seed", type=int, default=0)
    g.add_argument("--endpoint", default=DEFAULT_ENDPOINT)
    g.add_argument("--model", default="default")
    g.add_argument("--api-key-env", default=DEFAULT_API_KEY_ENV, metavar="VAR")
    g.add_argument("--timeout", type=int, default=60)
    g.add_argument("--max-attempts", type=int, default=3)
    g.add_argument("--temperature", type=float, default=None)


def _add_ruleset_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ruleset", type=Path, help="ruleset JSON file (default: built-in)")
    p.add_argument("--max-retries", type=int, default=DEFAULT_MAX_RETRIES)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cloudano", description="Metric and log anomaly detection toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a labeled benchmark dataset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--anomaly-cases", type=int, default=19)
    p.add_argument("--normal-cases", type=int, default=30)

    p = sub.add_parser("detect", help="run the detection pipeline on a case file or dataset")
    p.add_argument("path", type=Path)
    p.add_argument("--no-verifier", action="store_true", help="skip symbolic verification (ablation)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    _add_ruleset_flags(p)
    _add_backend_flags(p)

    p = sub.add_parser("verify", help="check a case against rule signatures")
    p.add_argument("path", type=Path)
    p.add_argument("--type", dest="anomaly_type", choices=[t.value for t in AnomalyType])
    p.add_argument("--ruleset", type=Path)

    p = sub.add_parser("eval", help="evaluate detectors and write summaries")
    p.add_argument("--dataset", type=Path, help="dataset directory (default: generate from --seed)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--detector", action="append", choices=DETECTOR_NAMES,
                   help="repeatable; default rule-ensemble")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--format", choices=("table", "csv"), default="table")
    p.add_argument("--out", type=Path, help="write the report here instead of stdout")
    p.add_argument("--figures", type=Path, metavar="DIR", help="also write ACA/ATCA bar charts")
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--abstain-as-wrong", action="store_true")
    p.add_argument("--oov-threshold", type=float, default=0.05)
    _add_ruleset_flags(p)
    _add_backend_flags(p)

    p = sub.add_parser("report", help="render anomaly reports")
    p.add_argument("path", type=Path)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out", type=Path, metavar="DIR", help="write one report file per case")
    p.add_argument("--rewrite", action="store_true", help="reword summaries through the backend")
    _add_ruleset_flags(p)
    _add_backend_flags(p)

    p = sub.add_parser("export-ruleset", help="dump the built-in ruleset")
    p.add_argument("--out", type=Path)
    return parser


def _ruleset(args):
    return load_ruleset(args.ruleset) if getattr(args, "ruleset", None) else default_ruleset()


def make_backend(args, ruleset) -> Optional[Backend]:
    if args.backend == "none":
        return None
    if args.backend == "real":
        config = BackendConfig(args.endpoint, args.model, args.api_key_env, args.timeout,
                               args.max_attempts, args.temperature)
        return HTTPBackend(config)
    if not 0.0 <= args.mock_noise <= 1.0:
        raise UsageError("--mock-noise must lie in [0, 1]")
    oracle = OracleBackend(ruleset)
    if args.mock_noise > 0:
        return NoisyBackend(oracle, args.mock_noise, args.mock_seed)
    return oracle


def _load_cases(path: Path) -> tuple[Optional[Manifest], list[CaseRecord]]:
    if path.is_dir():
        return load_dataset(path)
    if not path.exists():
        raise CaseFormatError(str(path), "no such file or directory")
    return None, [load_case(path)]


def _write(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")


def cmd_gen(args) -> int:
    if args.anomaly_cases < 0 or args.normal_cases < 0 or args.anomaly_cases + args.normal_cases == 0:
        raise UsageError("case counts must be non-negative and not both zero")
    spec = GenSpec(seed=args.seed, anomaly_cases=args.anomaly_cases, normal_cases=args.normal_cases)
    ds = gen_benchmark(spec)
    manifest = write_dataset(args.out, list(ds.cases), args.seed)
    c = manifest.counts
    print(f"wrote {c['total']} cases ({c['anomaly']} anomaly, {c['normal']} normal, "
          f"{c['easy']} easy, {c['difficult']} difficult) to {args.out}")
    return EXIT_OK


def cmd_detect(args) -> int:
    ruleset = _ruleset(args)
    backend = make_backend(args, ruleset)
    _, cases = _load_cases(args.path)
    pipeline = DetectionPipeline(backend, ruleset, use_verifier=not args.no_verifier, max_retries=args.max_retries)
    rows = []
    for case in cases:
        final = pipeline.detect(case)
        rows.append({
            "case_id": case.id,
            "is_anomaly": final.is_anomaly,
            "anomaly_type": final.anomaly_type.value if final.anomaly_type else "",
            "status": final.status.value,
            "retries_used": final.retries_used,
        })
    if args.format == "json":
        sys.stdout.write(json.dumps(rows, indent=2) + "\n")
    else:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({**r, "is_anomaly": str(r["is_anomaly"]).lower()})
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def cmd_verify(args) -> int:
    ruleset = _ruleset(args)
    _, cases = _load_cases(args.path)
    types = [AnomalyType(args.anomaly_type)] if args.anomaly_type else ruleset.types
    for case in cases:
        for t in types:
            m, lg = verify_type(case, t, ruleset)
            ok = m.passed and lg.passed
            print(f"{case.id}\t{t.value}\t{'pass' if ok else 'fail'}")
            for item in m.failed_items + lg.failed_items:
                print(f"  failed: {item}")
            if ok:
                for item in m.matched_evidence + lg.matched_evidence:
                    print(f"  evidence: {item}")
    return EXIT_OK


def cmd_eval(args) -> int:
    if args.repeats < 1 or args.workers < 1:
        raise UsageError("--repeats and --workers must be >= 1")
    ruleset = _ruleset(args)
    if args.dataset is not None:
        manifest, cases = load_dataset(args.dataset)
    else:
        ds = gen_benchmark(GenSpec(seed=args.seed), ruleset=ruleset)
        manifest, cases = ds.manifest, list(ds.cases)
    names = args.detector or ["rule-ensemble"]
    backend = make_backend(args, ruleset) if any(n.startswith("agent") for n in names) else None
    summaries = []
    for name in names:
        detector = build_detector(name, backend=backend, ruleset=ruleset, max_retries=args.max_retries,
                                  oov_threshold=args.oov_threshold, seed=args.seed)
        results = run_evaluation(cases, detector, args.repeats, args.seed, args.workers, args.abstain_as_wrong)
        backend_failures = [r for r in results if r.error]
        if backend_failures and len(backend_failures) == len(results):
            raise BackendError(f"every case failed for {name}: {backend_failures[0].error}")
        summaries.append(summarize(results, manifest, detector.id, detector.typed, args.seed))
    _write(emit_report(summaries, args.format), args.out)
    if args.figures is not None:
        from .plotting import plot_summaries

        for path in plot_summaries(summaries, args.figures):
            log.info("wrote %s", path)
    return EXIT_OK


def cmd_report(args) -> int:
    ruleset = _ruleset(args)
    backend = make_backend(args, ruleset)
    _, cases = _load_cases(args.path)
    pipeline = DetectionPipeline(backend, ruleset, max_retries=args.max_retries)
    for case in cases:
        final = pipeline.detect(case)
        report = render_report(final, case, ruleset, backend if args.rewrite else None)
        text = report_to_json(report) if args.format == "json" else format_report(report)
        if args.out is not None:
            suffix = "json" if args.format == "json" else "txt"
            _write(text, args.out / f"{case.id}.report.{suffix}")
        else:
            sys.stdout.write(text + ("" if args.format == "json" else "\n"))
    return EXIT_OK


def cmd_export_ruleset(args) -> int:
    _write(dump_ruleset(default_ruleset()), args.out)
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "detect": cmd_detect,
    "verify": cmd_verify,
    "eval": cmd_eval,
    "report": cmd_report,
    "export-ruleset": cmd_export_ruleset,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"cloudano: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CaseFormatError, RulesetError, json.JSONDecodeError, OSError) as exc:
        print(f"cloudano: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except BackendError as exc:
        print(f"cloudano: backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
