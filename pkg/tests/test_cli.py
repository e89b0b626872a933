import json

import numpy as np
import pytest

from sedpool.cli import build_parser, main
from sedpool.manifest import read_groundtruth_events
from sedpool.postprocess import write_detections


def _gt_files(tmp_path):
    (tmp_path / "gt.tsv").write_text(
        "clip_id\tonset\toffset\tclass_name\n"
        "a\t0.5\t2.0\tDog\n"
        "a\t3.0\t4.0\tSpeech\n"
        "b\t1.0\t6.0\tDog\n"
    )
    (tmp_path / "dur.tsv").write_text("clip_id\tduration_seconds\na\t10.0\nb\t10.0\n")
    return tmp_path / "gt.tsv", tmp_path / "dur.tsv"


def test_evaluate_perfect_detections(tmp_path, capsys):
    gt, dur = _gt_files(tmp_path)
    events = read_groundtruth_events(gt)
    write_detections(tmp_path / "det", {0.5: events})
    report = tmp_path / "report.tsv"
    code = main(["evaluate", "--detections-dir", str(tmp_path / "det"), "--groundtruth", str(gt),
                 "--durations", str(dur), "--preset", "scenario1", "--report", str(report)])
    assert code == 0
    assert "PSDS: 1.0000" in capsys.readouterr().out
    assert report.read_text().strip().endswith("1.0000000000")


def test_evaluate_empty_detections(tmp_path, capsys):
    gt, dur = _gt_files(tmp_path)
    write_detections(tmp_path / "det", {0.5: []})
    main(["evaluate", "--detections-dir", str(tmp_path / "det"), "--groundtruth", str(gt),
          "--durations", str(dur), "--preset", "scenario2"])
    assert "PSDS: 0.0000" in capsys.readouterr().out


def test_unknown_preset_is_usage_error(capsys):
    with pytest.raises(SystemExit) as err:
        build_parser().parse_args(["evaluate", "--detections-dir", "d", "--groundtruth", "g",
                                   "--durations", "x", "--preset", "scenario3"])
    assert err.value.code == 2
    assert "invalid preset" in capsys.readouterr().err


def test_missing_groundtruth_exits_1(tmp_path, capsys):
    code = main(["evaluate", "--detections-dir", str(tmp_path), "--groundtruth",
                 str(tmp_path / "nope.tsv"), "--durations", str(tmp_path / "nope2.tsv"),
                 "--preset", "scenario1"])
    assert code == 1
    assert "error" in capsys.readouterr().err


@pytest.mark.slow
def test_pipeline_round_trip(tmp_path, capsys):
    corpus, feats, ck, det = (tmp_path / n for n in ("corpus", "feats", "ck", "det"))
    assert main(["synth", "--out", str(corpus), "--seed", "3", "--n-weak", "2", "--n-strong", "2",
                 "--n-unlabeled", "2", "--n-classes", "2", "--clip-length", "3",
                 "--event-length", "0.5", "1.5"]) == 0
    assert main(["extract", "--manifest", str(corpus), "--out", str(feats)]) == 0
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("epochs: 2\nbatches_per_epoch: 2\nbatch_split: [1, 1, 1]\nramp_steps: 2\n"
                   "arch: {channels: [2, 2, 2, 2, 2, 2, 2], hidden: 2, n_classes: 2}\n")
    assert main(["train", "--preset", "scenario2", "--config", str(cfg), "--features", str(feats),
                 "--out", str(ck)]) == 0
    out = capsys.readouterr().out
    assert "time pooling x32" in out and "0.5268 s" in out
    meta = json.loads((ck / "model.json").read_text())
    assert meta["classes"] == (corpus / "classes.txt").read_text().split()
    assert len((ck / "metrics.jsonl").read_text().splitlines()) == 2

    assert main(["predict", "--checkpoint", str(ck / "student.ckpt"), "--features", str(feats),
                 "--preset", "scenario2", "--out", str(det)]) == 0
    files = sorted(det.glob("detections_th*.tsv"))
    assert len(files) == 50
    first = [f.read_bytes() for f in files]
    assert main(["predict", "--checkpoint", str(ck / "student.ckpt"), "--features", str(feats),
                 "--preset", "scenario2", "--out", str(det)]) == 0
    assert [f.read_bytes() for f in files] == first

    assert main(["evaluate", "--detections-dir", str(det), "--groundtruth",
                 str(corpus / "groundtruth.tsv"), "--durations", str(corpus / "durations.tsv"),
                 "--preset", "scenario2"]) == 0
    psds = float(capsys.readouterr().out.split("PSDS: ")[1].split()[0])
    assert 0.0 <= psds <= 1.0 and np.isfinite(psds)
