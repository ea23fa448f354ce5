import json
import math

import numpy as np
import pytest

from repest.core import CHANNEL_NAMES, CycleAnnotation, ManifestError
from repest.evaluation import (
    CSV_HEADER,
    STUDY_CSV_HEADER,
    STUDY_SETTINGS,
    EvalReport,
    EvalRow,
    cycle_length_variation,
    format_percent,
    mae,
    oboa,
    run_channel_study,
    run_dataset,
)
from repest.io import load_manifest, write_flows, write_signal
from repest.synth import SynthSpec, chirp_annotation, gen_flow_sequence, gen_signal


# ----------------------------
# Metrics
# ----------------------------

def test_mae_hand_arithmetic():
    assert mae([10.0, 4.0], [10.0, 4.0]) == (0.0, 0.0)
    mean, std = mae([12.0], [10.0])
    assert mean == pytest.approx(0.2) and std == 0.0
    mean, std = mae([12.0, 10.0], [10.0, 10.0])
    assert mean == pytest.approx(0.1) and std == pytest.approx(0.1)


def test_mae_matches_direct_resummation(rng):
    gts = rng.integers(3, 40, size=20).astype(float)
    preds = gts + rng.normal(0.0, 2.0, size=20)
    errors = [abs(p - g) / g for p, g in zip(preds, gts)]
    expected_mean = sum(errors) / 20
    expected_std = math.sqrt(sum((e - expected_mean) ** 2 for e in errors) / 20)
    assert mae(list(preds), list(gts)) == (expected_mean, expected_std)
    np.testing.assert_allclose(mae(list(preds), list(gts)), (np.mean(errors), np.std(errors)))


def test_mae_errors():
    with pytest.raises(ValueError):
        mae([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        mae([], [])
    with pytest.raises(ValueError):
        mae([1.0], [0.0])


def test_oboa_boundaries():
    assert oboa([10.9], [10.0]) == 1.0
    assert oboa([12.1], [10.0]) == 0.0
    gts = [3.0, 9.6, 10.0, 27.3]
    assert oboa([g + 1.0 for g in gts], gts) == 1.0
    assert oboa([10.0, 20.0], [10.0, 10.0]) == 0.5


def test_cycle_length_variation():
    uniform = CycleAnnotation("u", 30.0, 3, cycle_bounds=(0, 10, 20, 30))
    assert cycle_length_variation(uniform) == 0.0
    uneven = CycleAnnotation("v", 30.0, 2, cycle_bounds=(0, 10, 30))
    assert cycle_length_variation(uneven) == pytest.approx(0.667, abs=1e-3)
    with pytest.raises(ValueError):
        cycle_length_variation(CycleAnnotation("w", 30.0, 0, cycle_bounds=(5,)))


def test_chirp_annotation_has_large_cycle_variation():
    spec = SynthSpec(kind="exp_chirp", base_freq=0.5, chirp_rate=math.log(2.0) / 20.0, duration=20.0)
    assert cycle_length_variation(chirp_annotation(spec)) > 0.3


def test_format_percent():
    assert format_percent(0.1234) == "12.3"
    assert format_percent(None) == "n/a"


# ----------------------------
# Reports
# ----------------------------

def sample_report():
    rows = [
        EvalRow.scored_row("a", 10.0, 10.0),
        EvalRow.scored_row("b", 5.0, 6.5),
        EvalRow(id="c", true_count=8.0, error="no frames found\n in  folder"),
    ]
    return EvalReport.from_rows(rows)


def test_perfect_predictions():
    rows = [EvalRow.scored_row(str(i), c, c) for i, c in enumerate((4.0, 10.0, 12.5))]
    agg = EvalReport.from_rows(rows).aggregate
    assert agg["mae_mean"] == 0.0 and agg["oboa"] == 1.0
    assert agg["scored"] == 3 and agg["failed"] == 0


def test_aggregates_cover_scored_rows_only():
    report = sample_report()
    agg = report.aggregate
    assert agg["scored"] == 2 and agg["failed"] == 1
    assert agg["mae_mean"] == pytest.approx(0.15)
    assert agg["oboa"] == 0.5
    assert report.rows[1].off_by_one is False
    assert not report.rows[2].scored


def test_nothing_scored():
    agg = EvalReport.from_rows([EvalRow(id="x", true_count=3.0, error="boom")]).aggregate
    assert agg["mae_mean"] is None and agg["oboa"] is None and agg["failed"] == 1


def test_csv_layout():
    text = sample_report().to_csv()
    lines = text.splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert lines[1] == "a,10,10,0,1"
    assert lines[2] == "b,5,6.5,0.3,0"
    assert lines[3] == "c,8,,,"
    assert lines[4] == "# error c: no frames found in folder"
    assert lines[5].startswith("# aggregate mae_mean=0.15,")
    assert lines[5].endswith("scored=2,failed=1")


def test_csv_and_json_read_back():
    report = sample_report()
    for restored in (EvalReport.from_csv(report.to_csv()), EvalReport.from_json(report.to_json())):
        assert [r.id for r in restored.rows] == ["a", "b", "c"]
        assert restored.rows[1].predicted_count == 6.5
        assert restored.rows[2].error
        assert restored.aggregate["scored"] == 2
        assert restored.aggregate["mae_mean"] == pytest.approx(0.15)
    assert json.loads(report.to_json())["aggregate"]["failed"] == 1


def test_from_csv_rejects_foreign_header():
    with pytest.raises(ValueError):
        EvalReport.from_csv("name,value\nx,1\n")


def test_reports_read_back_to_six_significant_digits(rng):
    for _ in range(20):
        truths = rng.uniform(1.0, 50.0, size=5)
        rows = [EvalRow.scored_row(f"v{i}", float(t), float(t * rng.uniform(0.5, 1.5)))
                for i, t in enumerate(truths)]
        report = EvalReport.from_rows(rows)
        for restored in (EvalReport.from_csv(report.to_csv()), EvalReport.from_json(report.to_json())):
            for a, b in zip(report.rows, restored.rows):
                assert b.id == a.id and b.off_by_one == a.off_by_one
                assert b.predicted_count == pytest.approx(a.predicted_count, rel=1e-6)
                assert b.abs_rel_error == pytest.approx(a.abs_rel_error, rel=1e-6, abs=1e-12)
            for key in ("mae_mean", "mae_std", "oboa"):
                assert restored.aggregate[key] == pytest.approx(report.aggregate[key], rel=1e-6)


# ----------------------------
# Dataset runs
# ----------------------------

def write_signal_manifest(tmp_path, entries):
    tmp_path.mkdir(parents=True, exist_ok=True)
    videos = []
    for video_id, spec in entries:
        h, truth = gen_signal(spec)
        (tmp_path / f"{video_id}.txt").write_text(write_signal(h), encoding="utf-8")
        videos.append({"id": video_id, "signal": f"{video_id}.txt", "fps": spec.fps, "count": truth})
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"videos": videos}), encoding="utf-8")
    return path


def test_run_dataset_on_signals(tmp_path):
    path = write_signal_manifest(tmp_path, [
        ("s1", SynthSpec(kind="sinusoid", base_freq=0.8, duration=12.0)),
        ("s2", SynthSpec(kind="sinusoid", base_freq=1.2, duration=10.0, fps=25.0)),
    ])
    report = run_dataset(load_manifest(path))
    assert report.aggregate["scored"] == 2
    assert report.aggregate["oboa"] == 1.0
    assert report.aggregate["mae_mean"] < 0.05


def test_run_dataset_isolates_failures(tmp_path):
    path = write_signal_manifest(tmp_path, [
        ("s1", SynthSpec(kind="sinusoid", base_freq=0.8, duration=12.0)),
        ("s2", SynthSpec(kind="sinusoid", base_freq=1.0, duration=10.0)),
        ("s3", SynthSpec(kind="sinusoid", base_freq=1.5, duration=10.0)),
    ])
    (tmp_path / "s2.txt").unlink()
    report = run_dataset(load_manifest(path))
    assert [r.scored for r in report.rows] == [True, False, True]
    assert report.aggregate["scored"] == 2 and report.aggregate["failed"] == 1


def test_fourier_baseline_only_handles_signals(tmp_path):
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"videos": [{"id": "v", "frames_dir": "v/", "fps": 30, "count": 4}]}))
    report = run_dataset(load_manifest(path), method="fourier")
    assert report.rows[0].error and report.aggregate["failed"] == 1


def test_run_dataset_argument_errors(tmp_path):
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"videos": []}))
    with pytest.raises(ManifestError):
        run_dataset(load_manifest(path))
    with pytest.raises(ValueError):
        run_dataset(load_manifest(path), method="autocorrelation")


def test_run_dataset_ignores_manifest_order(tmp_path):
    entries = [
        (f"s{i}", SynthSpec(kind="sinusoid", base_freq=0.6 + 0.25 * i, duration=10.0 + i))
        for i in range(4)
    ]
    forward = run_dataset(load_manifest(write_signal_manifest(tmp_path / "a", entries)))
    backward = run_dataset(load_manifest(write_signal_manifest(tmp_path / "b", entries[::-1])))
    by_id = {r.id: r for r in backward.rows}
    for row in forward.rows:
        assert by_id[row.id].predicted_count == row.predicted_count
    for key in ("mae_mean", "mae_std", "oboa"):
        assert backward.aggregate[key] == pytest.approx(forward.aggregate[key], rel=1e-12)


def test_wavelet_counts_chirps_within_one(tmp_path):
    entries = [
        (f"c{i}", SynthSpec(kind="exp_chirp", base_freq=0.5 + 0.02 * i, chirp_rate=math.log(2.5) / 20.0,
                            duration=20.0, fps=30.0))
        for i in range(10)
    ]
    manifest = load_manifest(write_signal_manifest(tmp_path, entries))
    wavelet = run_dataset(manifest)
    fourier = run_dataset(manifest, method="fourier")
    assert wavelet.aggregate["oboa"] >= 0.8
    assert fourier.aggregate["oboa"] <= 0.5
    assert wavelet.aggregate["mae_mean"] < fourier.aggregate["mae_mean"]


# ----------------------------
# Per-channel study
# ----------------------------

def write_flow_manifest(tmp_path, cases):
    videos = []
    for case_id in cases:
        spec = SynthSpec(kind="taxonomy_case", case_id=case_id, base_freq=1.0, duration=10.0,
                         amplitude=2.0, width=16, height=16)
        flows, truth = gen_flow_sequence(spec)
        write_flows(tmp_path / f"case{case_id}", flows)
        videos.append({"id": f"case{case_id}", "flow_dir": f"case{case_id}", "fps": spec.fps, "count": truth})
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"videos": videos}), encoding="utf-8")
    return path


def test_channel_study_oracle_is_best_per_video(tmp_path):
    study = run_channel_study(load_manifest(write_flow_manifest(tmp_path, (3, 12))))
    assert list(study.reports) == list(STUDY_SETTINGS)
    oracle = study.reports["oracle"]
    assert oracle.aggregate["scored"] == 2
    for i, row in enumerate(oracle.rows):
        singles = [study.reports[name].rows[i] for name in CHANNEL_NAMES]
        assert row.abs_rel_error == min(r.abs_rel_error for r in singles)
    for name in CHANNEL_NAMES:
        assert oracle.aggregate["mae_mean"] <= study.reports[name].aggregate["mae_mean"]
    assert study.reports["combined"].aggregate["oboa"] == 1.0


def test_channel_study_reports(tmp_path):
    study = run_channel_study(load_manifest(write_flow_manifest(tmp_path, (3,))))
    lines = study.to_csv().splitlines()
    assert lines[0] == ",".join(STUDY_CSV_HEADER)
    assert [line.split(",")[0] for line in lines[1:]] == list(STUDY_SETTINGS)
    doc = json.loads(study.to_json())
    assert [row["setting"] for row in doc["summary"]] == list(STUDY_SETTINGS)
    assert doc["settings"]["fy"]["videos"][0]["id"] == "case3"


def test_channel_study_rejects_signals_and_empty_manifests(tmp_path):
    path = write_signal_manifest(tmp_path, [("s1", SynthSpec(kind="sinusoid", base_freq=0.8, duration=12.0))])
    study = run_channel_study(load_manifest(path))
    assert all(study.reports[s].aggregate["failed"] == 1 for s in STUDY_SETTINGS)
    path.write_text(json.dumps({"videos": []}))
    with pytest.raises(ManifestError):
        run_channel_study(load_manifest(path))
