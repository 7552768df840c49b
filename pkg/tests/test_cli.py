import csv
import io
import json

import pytest

from cloudano.cli import main


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds")
    assert main(["gen", "--seed", "3", "--out", str(out)]) == 0
    return out


def _tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_gen_is_byte_identical(tmp_path, dataset, capsys):
    assert main(["gen", "--seed", "3", "--out", str(tmp_path / "again")]) == 0
    assert "wrote 49 cases (19 anomaly, 30 normal, 30 easy, 19 difficult)" in capsys.readouterr().out
    assert _tree(tmp_path / "again") == _tree(dataset)


def test_gen_rejects_zero_cases(tmp_path):
    assert main(["gen", "--out", str(tmp_path), "--anomaly-cases", "0", "--normal-cases", "0"]) == 2


def test_detect_csv_and_determinism(dataset, capsys):
    assert main(["detect", str(dataset)]) == 0
    first = capsys.readouterr().out
    assert main(["detect", str(dataset)]) == 0
    assert capsys.readouterr().out == first
    rows = list(csv.DictReader(io.StringIO(first)))
    assert len(rows) == 49
    assert list(rows[0]) == ["case_id", "is_anomaly", "anomaly_type", "status", "retries_used"]
    manifest = json.loads((dataset / "manifest.json").read_text())
    truth = {c["id"]: c["anomaly_type"] or "" for c in manifest["cases"]}
    assert all(r["anomaly_type"] == truth[r["case_id"]] for r in rows)


def test_detect_single_case_json(dataset, capsys):
    case = sorted((dataset / "cases").iterdir())[0]
    assert main(["detect", str(case), "--format", "json", "--backend", "none"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert len(rows) == 1 and rows[0]["status"] == "accepted"


def test_detect_noisy_mock(dataset, capsys):
    assert main(["detect", str(dataset), "--mock-noise", "0.5", "--no-verifier"]) == 0
    assert capsys.readouterr().out.count("\n") == 50
    assert main(["detect", str(dataset), "--mock-noise", "2"]) == 2


def test_eval_csv_is_deterministic(tmp_path, capsys):
    args = ["eval", "--seed", "0", "--detector", "rule-ensemble", "--detector", "always-anomaly",
            "--format", "csv", "--repeats", "2"]
    assert main(args + ["--out", str(tmp_path / "a.csv")]) == 0
    assert main(args + ["--out", str(tmp_path / "b.csv")]) == 0
    a = (tmp_path / "a.csv").read_bytes()
    assert a == (tmp_path / "b.csv").read_bytes()
    rows = list(csv.DictReader(io.StringIO(a.decode())))
    re_anomaly = next(r for r in rows if r["detector_id"] == "rule-ensemble" and r["split"] == "anomaly")
    assert re_anomaly["value"] == "100.00"


def test_eval_table_and_figures(dataset, tmp_path, capsys):
    figs = tmp_path / "figs"
    assert main(["eval", "--dataset", str(dataset), "--detector", "agent", "--detector", "oov",
                 "--repeats", "1", "--figures", str(figs)]) == 0
    out = capsys.readouterr().out
    assert "agent" in out and "oov" in out and "ATCA" in out
    assert (figs / "aca.png").exists() and (figs / "atca.png").exists()


def test_verify_and_export(dataset, tmp_path, capsys):
    case = sorted((dataset / "cases").iterdir())[0]
    assert main(["verify", str(case)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert sum(ln.split("\t")[-1] == "pass" for ln in lines if "\t" in ln) <= 1
    out = tmp_path / "rules.json"
    assert main(["export-ruleset", "--out", str(out)]) == 0
    assert main(["verify", str(case), "--ruleset", str(out), "--type", "mine"]) == 0


def test_report_outputs(dataset, tmp_path, capsys):
    assert main(["report", str(dataset), "--format", "json", "--out", str(tmp_path / "r")]) == 0
    files = sorted((tmp_path / "r").iterdir())
    assert len(files) == 49
    doc = json.loads(files[0].read_text())
    assert {"summary", "reasoning_chain", "remediation", "verifier_trace"} <= set(doc)
    case = sorted((dataset / "cases").iterdir())[0]
    assert main(["report", str(case)]) == 0
    assert "Root cause:" in capsys.readouterr().out


def test_missing_api_key_exits_4(dataset, monkeypatch, capsys):
    monkeypatch.delenv("CLOUDANO_API_KEY", raising=False)
    assert main(["detect", str(dataset), "--backend", "real"]) == 4
    assert "API key environment variable CLOUDANO_API_KEY is not set" in capsys.readouterr().err


def test_unreachable_endpoint_exits_4(dataset, monkeypatch, capsys):
    monkeypatch.setenv("CLOUDANO_API_KEY", "k")
    case = sorted((dataset / "cases").iterdir())[0]
    code = main(["detect", str(case), "--backend", "real", "--endpoint", "http://127.0.0.1:9/v1",
                 "--max-attempts", "1", "--timeout", "1"])
    assert code == 4


@pytest.mark.parametrize("argv, code", [
    (["bogus"], 2),
    ([], 2),
    (["eval", "--repeats", "0"], 2),
    (["detect", "/nonexistent/case.json"], 3),
    (["verify", "/nonexistent"], 3),
    (["eval", "--dataset", "/nonexistent"], 3),
])
def test_exit_codes(argv, code, capsys):
    assert main(argv) == code


def test_bad_case_file_exits_3(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"id": 1}')
    assert main(["detect", str(bad)]) == 3
    assert "data error" in capsys.readouterr().err
