import io

import numpy as np
import pytest
from scipy import stats

from scopemon.distances import ALL_KINDS, DistanceKind
from scopemon.errors import DimensionMismatch, ScopeError
from scopemon.estimators import FitForm, Scue, calibrate
from scopemon.monitor import (
    AggregateRule,
    ConfusionSummary,
    Decision,
    KindReading,
    Monitor,
    MonitorConfig,
    UncertaintyReport,
    decide,
    dump_jsonl,
    load_jsonl,
    score_confusion,
    threshold_sweep,
    window_truth,
)
from scopemon.synthetic import gaussian, labelled_mix, ramp_stream

KS, ES = DistanceKind.KS, DistanceKind.ES


def _identity(kind=KS):
    return Scue(kind, FitForm.POLY2, (0.0, 1.0, 0.0), 0.0, 1.0, 0.0, 1.0)


def _report(wid, u, kind=KS, threshold=0.5):
    decision = Decision.REJECT if u > threshold else Decision.ACCEPT
    return UncertaintyReport(wid, {kind: KindReading(u, u)}, decision, (wid, wid), u, {kind: decision})


@pytest.fixture(scope="module")
def fitted():
    rng = np.random.default_rng(42)
    ref = gaussian(rng, 600, 3)
    _, _, scues = calibrate(labelled_mix(rng, 600, 600, 3), ref, ALL_KINDS, 50, 20, seed=1)
    return ref, scues


def test_config_defaults_and_validation():
    cfg = MonitorConfig(100)
    assert cfg.stride == 100
    assert cfg.threshold == 0.5
    assert cfg.aggregate_rule is AggregateRule.PER_KIND
    for bad in ({"window": 0}, {"window": 10, "stride": 11}, {"window": 10, "stride": 0},
                {"window": 10, "kinds": ()}, {"window": 10, "threshold": 1.5}):
        with pytest.raises(ScopeError):
            MonitorConfig(**bad)


@pytest.mark.parametrize("stride, expected", [
    (50, [(0, 99), (50, 149), (100, 199)]),
    (100, [(0, 99), (100, 199)]),
])
def test_emission_schedule(rng, stride, expected):
    mon = Monitor(rng.normal(size=(50, 2)), {KS: _identity()}, MonitorConfig(100, stride))
    reports = mon.run(rng.normal(size=(200, 2)))
    assert [r.samples_spanned for r in reports] == expected
    assert [r.window_id for r in reports] == list(range(len(expected)))


def test_stride_one_reports_every_sample_after_fill(rng):
    mon = Monitor(rng.normal(size=(50, 2)), {KS: _identity()}, MonitorConfig(10, 1))
    emitted = [mon.push(x) is not None for x in rng.normal(size=(25, 2))]
    assert emitted == [False] * 9 + [True] * 16


def test_short_stream_emits_nothing(rng):
    mon = Monitor(rng.normal(size=(50, 2)), {KS: _identity()}, MonitorConfig(10))
    assert mon.run(rng.normal(size=(9, 2))) == []
    assert mon.run([]) == []


def test_dimension_mismatch(rng):
    mon = Monitor(rng.normal(size=(50, 3)), {KS: _identity()}, MonitorConfig(10))
    with pytest.raises(DimensionMismatch):
        mon.push([1.0, 2.0])


def test_missing_estimator_rejected(rng):
    with pytest.raises(ScopeError):
        Monitor(rng.normal(size=(50, 2)), {KS: _identity()}, MonitorConfig(10, kinds=("KS", "AD")))


def test_transform_applied_before_buffering(rng):
    ref = rng.normal(size=(80, 1))
    mon = Monitor(ref, {KS: _identity()}, MonitorConfig(20), transform=lambda x: x[:, :1])
    report = mon.run(rng.normal(size=(20, 4)))[0]
    assert 0 <= report.per_kind[KS].sdd <= 1


def test_reference_window_is_low_uncertainty(fitted):
    ref, scues = fitted
    cfg = MonitorConfig(100, kinds=ALL_KINDS)
    reports = Monitor(ref, scues, cfg).run(ref[:100])
    for reading in reports[0].per_kind.values():
        assert reading.uncertainty <= 0.2


def test_ood_window_is_rejected(fitted):
    ref, scues = fitted
    rng = np.random.default_rng(5)
    cfg = MonitorConfig(50, kinds=ALL_KINDS)
    report = Monitor(ref, scues, cfg).run(gaussian(rng, 50, 3, shift=3.0))[0]
    assert report.decision is Decision.REJECT
    assert all(d is Decision.REJECT for d in report.kind_decisions.values())


def test_decide_rules():
    per_kind = {KS: KindReading(0.1, 0.7), ES: KindReading(0.2, 0.3)}
    report = UncertaintyReport(0, per_kind, Decision.ACCEPT, (0, 9), 0.0)
    assert decide(report, MonitorConfig(10, kinds=(KS, ES), aggregate_rule="max")) is Decision.REJECT
    assert decide(report, MonitorConfig(10, kinds=(KS, ES), aggregate_rule="per_kind")) is Decision.REJECT
    assert decide(report, MonitorConfig(10, kinds=(KS, ES), aggregate_rule="mean")) is Decision.ACCEPT
    flat = UncertaintyReport(0, {KS: KindReading(0, 0.5), ES: KindReading(0, 0.5)},
                             Decision.ACCEPT, (0, 9), 0.5)
    for rule in AggregateRule:
        assert decide(flat, MonitorConfig(10, kinds=(KS, ES), aggregate_rule=rule)) is Decision.ACCEPT
    with pytest.raises(ScopeError):
        decide(report, MonitorConfig(10, kinds=(KS,)))


def test_window_truth(rng):
    correct = np.array([1] * 10 + [0] * 10)
    mon = Monitor(rng.normal(size=(50, 1)), {KS: _identity()}, MonitorConfig(10, 5))
    reports = mon.run(rng.normal(size=(20, 1)))
    assert window_truth(correct, reports) == [0.0, 0.5, 1.0]


def test_score_confusion_examples():
    pairs = [(_report(0, 0.9), 0.2), (_report(1, 0.1), 0.8), (_report(2, 0.9), 0.9),
             (_report(3, 0.1), 0.1), (_report(4, 0.9), 0.5), (_report(5, 0.2), 0.5)]
    assert score_confusion(pairs) == ConfusionSummary(rejected=3, false_rejects=1, missed=1, total=6)


def test_confusion_partition(rng):
    pairs = [(_report(i, u), t) for i, (u, t) in enumerate(rng.random((200, 2)))]
    s = score_confusion(pairs)
    accepted = s.total - s.rejected
    assert s.false_rejects <= s.rejected and s.missed <= accepted
    truly_bad = sum(t > 0.5 for _, t in pairs)
    assert s.rejected - s.false_rejects + s.missed == truly_bad


def test_sweep_degenerate_thresholds():
    pairs = [(_report(i, u), 1 - acc) for i, (u, acc) in enumerate([(0.2, 0.9), (0.6, 0.3), (1.0, 0.1)])]
    zero, one = threshold_sweep(pairs, [0.0, 1.0])
    assert zero.cutoff is None and zero.rejected_count == 3
    assert one.cutoff == pytest.approx(0.1) and one.rejected_count == 0


def test_sweep_monotone_fixture():
    acc = np.linspace(0, 1, 11)
    pairs = [(_report(i, 1 - a), 1 - a) for i, a in enumerate(acc)]
    rows = threshold_sweep(pairs, np.linspace(0, 1, 11))
    cutoffs = [r.cutoff for r in rows]
    assert cutoffs[4] == pytest.approx(0.6)
    assert all(b <= a for a, b in zip(cutoffs, cutoffs[1:]))
    assert [r.rejected_count for r in rows] == list(range(10, -1, -1))
    with pytest.raises(ScopeError):
        threshold_sweep(pairs, [1.2])


def test_jsonl_round_trip(fitted):
    ref, scues = fitted
    rng = np.random.default_rng(1)
    reports = Monitor(ref, scues, MonitorConfig(40, 20, kinds=ALL_KINDS)).run(gaussian(rng, 120, 3, 1.0))
    buf = io.StringIO()
    dump_jsonl(reports, buf)
    lines = buf.getvalue().splitlines()
    assert len(lines) == len(reports) * len(ALL_KINDS)
    assert load_jsonl(lines) == reports


def test_jsonl_bad_line():
    with pytest.raises(ScopeError):
        load_jsonl(['{"window_id": 0}'])


def test_replay_is_deterministic(fitted):
    ref, scues = fitted
    stream = gaussian(np.random.default_rng(2), 150, 3, 0.5)
    cfg = MonitorConfig(50, 10, kinds=ALL_KINDS)
    assert Monitor(ref, scues, cfg).run(stream) == Monitor(ref, scues, cfg).run(stream)


def test_uncertainty_tracks_ramp(fitted):
    ref, scues = fitted
    stream = ramp_stream(np.random.default_rng(3), 21, 50, 3)
    reports = Monitor(ref, scues, MonitorConfig(50, kinds=ALL_KINDS)).run(stream.data)
    truth = window_truth(stream.correct, reports)
    assert truth[0] == 0.0 and truth[-1] == 1.0
    for kind in ALL_KINDS:
        u = [r.per_kind[kind].uncertainty for r in reports]
        assert stats.spearmanr(u, truth).statistic >= 0.9, kind


def test_mean_ramp_response_is_monotone(fitted):
    # single windows hold 50 fresh draws, so average five independent ramps per position
    ref, scues = fitted
    curves = {k: [] for k in ALL_KINDS}
    for seed in range(5):
        stream = ramp_stream(np.random.default_rng(100 + seed), 21, 50, 3)
        reports = Monitor(ref, scues, MonitorConfig(50, kinds=ALL_KINDS)).run(stream.data)
        for kind in ALL_KINDS:
            curves[kind].append([r.per_kind[kind].uncertainty for r in reports])
    for kind, rows in curves.items():
        mean = np.mean(rows, axis=0)
        assert np.all(np.diff(mean) >= -0.1), kind
        assert mean[-1] - mean[0] >= 0.8, kind
