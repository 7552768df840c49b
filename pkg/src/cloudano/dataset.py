"""Dataset directories: one JSON file per case plus a ``manifest.json``."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from .model import CaseFormatError, CaseRecord, parse_case, serialize_case

MANIFEST_NAME = "manifest.json"
CASES_DIR = "cases"


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    file: str
    is_anomaly: bool
    anomaly_type: Optional[str]
    difficulty: str


@dataclass(frozen=True)
class Manifest:
    entries: tuple[ManifestEntry, ...]
    seed: Optional[int] = None

    @property
    def counts(self) -> dict[str, int]:
        return split_counts(self.entries)

    def entry(self, case_id: str) -> ManifestEntry:
        for e in self.entries:
            if e.id == case_id:
                return e
        raise KeyError(case_id)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "counts": self.counts,
            "cases": [
                {"id": e.id, "file": e.file, "is_anomaly": e.is_anomaly,
                 "anomaly_type": e.anomaly_type, "difficulty": e.difficulty}
                for e in self.entries
            ],
        }

    @classmethod
    def from_cases(cls, cases: Iterable[CaseRecord], seed: Optional[int] = None) -> "Manifest":
        entries = tuple(
            ManifestEntry(
                id=c.id,
                file=f"{CASES_DIR}/{c.id}.json",
                is_anomaly=c.label.is_anomaly,
                anomaly_type=c.label.anomaly_type.value if c.label.anomaly_type else None,
                difficulty=c.label.difficulty.value,
            )
            for c in cases
        )
        return cls(entries, seed)


def split_counts(entries: Iterable[ManifestEntry]) -> dict[str, int]:
    entries = list(entries)
    return {
        "total": len(entries),
        "anomaly": sum(e.is_anomaly for e in entries),
        "normal": sum(not e.is_anomaly for e in entries),
        "easy": sum(e.difficulty == "easy" for e in entries),
        "difficult": sum(e.difficulty == "difficult" for e in entries),
    }


def parse_manifest(doc: dict) -> Manifest:
    try:
        entries = tuple(
            ManifestEntry(str(c["id"]), str(c["file"]), bool(c["is_anomaly"]),
                          c.get("anomaly_type"), str(c["difficulty"]))
            for c in doc["cases"]
        )
    except (KeyError, TypeError) as exc:
        raise CaseFormatError("manifest.cases", f"malformed entry ({exc})") from None
    ids = [e.id for e in entries]
    if len(set(ids)) != len(ids):
        raise CaseFormatError("manifest.cases", "duplicate case ids")
    manifest = Manifest(entries, doc.get("seed"))
    recorded = doc.get("counts")
    if recorded is not None and recorded != manifest.counts:
        raise CaseFormatError("manifest.counts", f"recorded {recorded} but entries give {manifest.counts}")
    return manifest


def write_dataset(out_dir: str | Path, cases: list[CaseRecord], seed: Optional[int] = None) -> Manifest:
    out = Path(out_dir)
    (out / CASES_DIR).mkdir(parents=True, exist_ok=True)
    manifest = Manifest.from_cases(cases, seed)
    for case, entry in zip(cases, manifest.entries):
        (out / entry.file).write_text(serialize_case(case), encoding="utf-8")
    (out / MANIFEST_NAME).write_text(json.dumps(manifest.to_dict(), indent=2) + "\n", encoding="utf-8")
    return manifest


def load_dataset(path: str | Path) -> tuple[Manifest, list[CaseRecord]]:
    """Load a dataset directory and cross-check every case against its manifest row."""
    root = Path(path)
    try:
        manifest = parse_manifest(json.loads((root / MANIFEST_NAME).read_text(encoding="utf-8")))
    except FileNotFoundError:
        raise CaseFormatError("manifest", f"no {MANIFEST_NAME} in {root}") from None
    except json.JSONDecodeError as exc:
        raise CaseFormatError("manifest", f"not valid JSON ({exc.msg})") from None
    cases = []
    for entry in manifest.entries:
        case = load_case(root / entry.file)
        if case.id != entry.id:
            raise CaseFormatError(entry.file, f"case id {case.id!r} does not match manifest id {entry.id!r}")
        if case.label.is_anomaly != entry.is_anomaly or case.label.difficulty.value != entry.difficulty:
            raise CaseFormatError(entry.file, "label disagrees with manifest")
        cases.append(case)
    return manifest, cases


def load_case(path: str | Path) -> CaseRecord:
    try:
        return parse_case(Path(path).read_text(encoding="utf-8"))
    except CaseFormatError as exc:
        raise CaseFormatError(f"{Path(path).name}:{exc.field}", str(exc).split(": ", 1)[-1]) from None
