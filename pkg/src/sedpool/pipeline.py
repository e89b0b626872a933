"""File-level steps behind the command line: extract, train, predict, evaluate.

A feature directory produced by :func:`extract` contains::

    features/<clip_id>.npz   standardized log-mel map (see audio.save_feature)
    stats.npz                per-bin mean/std fitted on every clip of the manifest
    durations.tsv            clip_id -> seconds, all clips
    classes.txt, weak.tsv, strong.tsv, unlabeled.tsv   copy of the manifest

A training output directory contains ``student.ckpt``, ``teacher.ckpt``,
``model.json`` (architecture, preset, vocabulary, input frames) and
``metrics.jsonl``.
"""
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import audio
from .errors import ConfigError, DataError
from .manifest import (
    DatasetManifest,
    clip_id_of,
    parse_manifests,
    read_durations,
    write_durations,
    write_manifests,
)
from .model import EVAL, Architecture, CrnnModel
from .nn import load_checkpoint, save_checkpoint
from .postprocess import PredictionMatrix, decode, read_detections, write_detections
from .presets import load_preset, output_resolution, save_preset
from .psds import evaluate as psds_evaluate
from .training import TrainingData, train

log = logging.getLogger(__name__)


def _raw_features(path):
    wave = audio.read_wav(path)
    return audio.extract_features(wave, clip_id=clip_id_of(path)), wave.duration


def extract(manifest_dir, out_dir, jobs=1):
    m = parse_manifests(manifest_dir)
    out_dir = Path(out_dir)
    (out_dir / "features").mkdir(parents=True, exist_ok=True)
    paths = [m.resolve(c) for c in m.all_clips()]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_raw_features, paths))
    else:
        results = [_raw_features(p) for p in paths]
    stats = audio.fit_stats([r for r, _ in results])
    stats.save(out_dir / "stats.npz")
    durations = {}
    for raw, duration in results:
        audio.save_feature(out_dir / "features" / f"{raw.clip_id}.npz", audio.apply_stats(raw, stats))
        durations[raw.clip_id] = duration
    write_durations(out_dir / "durations.tsv", durations)
    write_manifests(out_dir, m)
    log.info("extracted %d clips into %s", len(results), out_dir)
    return out_dir


def _feature(features_dir, clip):
    return audio.load_feature(Path(features_dir) / "features" / f"{clip_id_of(clip)}.npz").values


def load_training_data(features_dir):
    features_dir = Path(features_dir)
    m = parse_manifests(features_dir, check_paths=False)
    index = {c: i for i, c in enumerate(m.classes)}
    weak = []
    for clip, labels in m.weak:
        y = np.zeros(len(m.classes))
        y[[index[c] for c in labels]] = 1.0
        weak.append((_feature(features_dir, clip), y))
    strong = [
        (_feature(features_dir, clip), [(r.onset, r.offset, index[r.label]) for r in rows])
        for clip, rows in m.strong_clips().items()
    ]
    unlabeled = [_feature(features_dir, clip) for clip in m.unlabeled]
    return TrainingData(weak, strong, unlabeled, len(m.classes)), m


def run_training(preset, config, features_dir, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data, m = load_training_data(features_dir)
    if config.arch.n_classes != len(m.classes):
        config.arch = Architecture(config.arch.channels, config.arch.hidden, len(m.classes), config.arch.dropout)
    result = train(config, data, preset, metrics_path=out_dir / "metrics.jsonl")
    save_checkpoint(out_dir / "student.ckpt", result.student.params)
    save_checkpoint(out_dir / "teacher.ckpt", result.teacher.params)
    save_preset(out_dir / "preset.yaml", preset)
    meta = {
        "arch": config.arch.to_dict(),
        "preset": preset.to_dict(),
        "classes": m.classes,
        "n_frames": result.n_frames,
        "config": config.to_dict(),
    }
    (out_dir / "model.json").write_text(json.dumps(meta, indent=2))
    return result


def load_model(checkpoint, preset):
    checkpoint = Path(checkpoint)
    meta_path = checkpoint.parent / "model.json"
    if not meta_path.is_file():
        raise ConfigError(f"missing {meta_path} next to the checkpoint")
    meta = json.loads(meta_path.read_text())
    model = CrnnModel(preset, seed=0, arch=Architecture.from_dict(meta["arch"]))
    model.params.load_state(load_checkpoint(checkpoint))
    return model, meta


def predict_probs(model, spec_values, batch_size=16):
    """Eval-mode frame probabilities for a list of equal-length ``[T, F]`` maps."""
    out = []
    for i in range(0, len(spec_values), batch_size):
        x = np.stack(spec_values[i:i + batch_size])[:, None]
        frame_probs, _ = model.forward(x, EVAL)
        out.extend(frame_probs)
    return out


def run_predict(checkpoint, features_dir, preset, out_dir, clips=None):
    """Decode every clip (or the given clip ids) and write one detection TSV per threshold."""
    model, meta = load_model(checkpoint, preset)
    classes = meta["classes"]
    durations = read_durations(Path(features_dir) / "durations.tsv")
    clip_ids = list(durations) if clips is None else list(clips)
    _, frame_duration = output_resolution(preset)
    by_threshold = {tau: [] for tau in preset.thresholds}
    by_length = {}
    for clip in clip_ids:
        values = _feature(features_dir, clip)
        by_length.setdefault(values.shape[0], []).append((clip, values))
    for _, group in sorted(by_length.items()):
        probs = predict_probs(model, [v for _, v in group])
        for (clip, _), p in zip(group, probs):
            pred = PredictionMatrix(p, frame_duration, clip, durations[clip])
            for tau, events in decode(pred, preset).items():
                by_threshold[tau].extend(events.as_events(classes))
    write_detections(out_dir, by_threshold)
    return by_threshold


def run_evaluate(detections_dir, gt, preset_or_params, report_path=None):
    params = getattr(preset_or_params, "psds_params", preset_or_params)
    detections = read_detections(detections_dir)
    dropped = 0
    for tau, events in detections.items():
        kept = [e for e in events if e.clip_id in gt.durations]
        dropped += len(events) - len(kept)
        detections[tau] = kept
    if dropped:
        log.warning("ignored %d detections on clips absent from the durations table", dropped)
    report = psds_evaluate(detections, gt, params)
    if report_path is not None:
        write_report(report_path, report)
    return report


def write_report(path, report):
    with open(path, "w") as fh:
        fh.write("threshold\tclass\ttp\tfp\tct_row\ttpr\tefpr\n")
        for row in report.table_rows():
            tau, c, tp, fp, ct_row, tpr, efpr = row
            fh.write(f"{tau:.4f}\t{c}\t{tp}\t{fp}\t{ct_row}\t{tpr:.6f}\t{efpr:.6f}\n")
        fh.write(f"# psds\t{report.psds:.10f}\n")
