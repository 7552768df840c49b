import pytest

from cloudano.agents import DetectionPipeline, GarbageBackend, NoisyBackend, OracleBackend
from cloudano.evaluation import Detector, run_evaluation, summarize
from cloudano.model import VerdictStatus
from cloudano.verifier import verify_type


@pytest.fixture(scope="module")
def subset(sweep):
    return list(sweep.cases[:80]) + list(sweep.cases[200:280])


def test_oracle_pipeline_is_sound_and_exact(subset, ruleset):
    pipeline = DetectionPipeline(OracleBackend(ruleset), ruleset)
    for case in subset:
        fv = pipeline.detect(case)
        assert fv.status is VerdictStatus.ACCEPTED, case.id
        assert fv.is_anomaly == case.label.is_anomaly
        assert fv.anomaly_type == case.label.anomaly_type
        if fv.is_anomaly:
            m, lg = verify_type(case, fv.anomaly_type, ruleset)
            assert m.passed and lg.passed


def test_garbage_backend_matches_symbolic_path(subset, ruleset):
    symbolic = DetectionPipeline(None, ruleset)
    garbage = DetectionPipeline(GarbageBackend(), ruleset)
    for case in subset:
        a, b = symbolic.detect(case), garbage.detect(case)
        assert a.verdict.same_decision(b.verdict) and a.status == b.status, case.id


def test_trace_exposes_stages(make_case, ruleset):
    tr = DetectionPipeline(None, ruleset).trace(make_case("mine_xmrig_cron"))
    assert tr.hypothesis.anomaly_detected and tr.assessment is not None
    assert tr.initial.same_decision(tr.final.verdict)
    quiet = DetectionPipeline(None, ruleset).trace(make_case("routine_quiet"))
    assert quiet.assessment is None and not quiet.final.is_anomaly


def test_verifier_ablation_direction(sweep, ruleset):
    cases = list(sweep.cases[:60]) + list(sweep.cases[200:260])
    from cloudano.dataset import Manifest
    manifest = Manifest.from_cases(cases)

    def run(use_verifier):
        noisy = NoisyBackend(OracleBackend(ruleset), rate=0.3, seed=0)
        det = Detector("agent", DetectionPipeline(noisy, ruleset, use_verifier=use_verifier).detect)
        return summarize(run_evaluation(cases, det, repeats=1), manifest)

    without, with_ = run(False), run(True)
    assert with_.atca("total") > without.atca("total")
    assert with_.fpr_percent < without.fpr_percent


def test_noisy_backend_is_reproducible(make_case, ruleset):
    case = make_case("port_scan_syn_sweep", "difficult")
    a = NoisyBackend(OracleBackend(ruleset), rate=0.5, seed=3)
    b = NoisyBackend(OracleBackend(ruleset), rate=0.5, seed=3)
    assert DetectionPipeline(a, ruleset).detect(case) == DetectionPipeline(b, ruleset).detect(case)
    assert a.corrupted == b.corrupted


def test_noisy_rate_validation(ruleset):
    with pytest.raises(ValueError):
        NoisyBackend(OracleBackend(ruleset), rate=1.5)


def test_negative_retries_rejected():
    with pytest.raises(ValueError):
        DetectionPipeline(max_retries=-1)
