"""Seeded synthetic corpora of band-limited tones and noise bursts over a noise floor."""
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal

from .audio import SAMPLE_RATE, Waveform, hz_to_mel, mel_to_hz, write_wav
from .errors import ConfigError
from .manifest import (
    DCASE_CLASSES,
    DatasetManifest,
    StrongRow,
    write_durations,
    write_groundtruth,
    write_manifests,
)
from .psds import Event

FADE = 0.01  # seconds of raised-cosine fade at event edges
BAND_LOW_HZ = 250.0
BAND_HIGH_HZ = 8000.0


@dataclass
class SynthSpec:
    seed: int = 0
    n_weak: int = 20
    n_strong: int = 20
    n_unlabeled: int = 40
    n_classes: int = 10
    clip_length: float = 10.0
    events_per_clip: tuple = (1, 2)
    event_length: tuple = (2.5, 5.0)
    snr_db: tuple = (6.0, 20.0)
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        if not 1 <= self.n_classes <= len(DCASE_CLASSES):
            raise ConfigError(f"n_classes must be in 1..{len(DCASE_CLASSES)}")
        if self.event_length[0] <= 0 or self.event_length[1] > self.clip_length:
            raise ConfigError("event lengths must be positive and fit in a clip")
        if self.events_per_clip[0] < 0 or self.events_per_clip[1] < self.events_per_clip[0]:
            raise ConfigError("events_per_clip must be a non-decreasing non-negative range")

    @property
    def classes(self):
        return DCASE_CLASSES[: self.n_classes]


def class_bands(n_classes):
    """Center and half-width (Hz) per class: equal slices of the mel axis, inner half occupied."""
    edges = mel_to_hz(np.linspace(hz_to_mel(BAND_LOW_HZ), hz_to_mel(BAND_HIGH_HZ), n_classes + 1))
    mel_edges = hz_to_mel(edges)
    out = []
    for k in range(n_classes):
        lo_m, hi_m = mel_edges[k], mel_edges[k + 1]
        quarter = (hi_m - lo_m) / 4
        lo, hi = mel_to_hz(lo_m + quarter), mel_to_hz(hi_m - quarter)
        out.append(((lo + hi) / 2, (hi - lo) / 2))
    return out


def _archetype(k, n, sample_rate, band, rng):
    """Even classes: amplitude-modulated tone; odd classes: band-passed noise."""
    center, half = band
    t = np.arange(n) / sample_rate
    if k % 2 == 0:
        x = np.sin(2 * np.pi * center * t + rng.uniform(0, 2 * np.pi))
        x *= 1.0 + 0.3 * np.sin(2 * np.pi * rng.uniform(2.0, 6.0) * t)
    else:
        sos = signal.butter(4, [center - half, center + half], btype="bandpass",
                            fs=sample_rate, output="sos")
        x = signal.sosfilt(sos, rng.standard_normal(n))
    fade = min(int(FADE * sample_rate), n // 2)
    if fade:
        ramp = 0.5 - 0.5 * np.cos(np.linspace(0, np.pi, fade))
        x[:fade] *= ramp
        x[-fade:] *= ramp[::-1]
    return x / (np.sqrt(np.mean(x ** 2)) + 1e-12)


def _place_events(spec, rng):
    """Random events; same-class events never overlap."""
    n_events = int(rng.integers(spec.events_per_clip[0], spec.events_per_clip[1] + 1))
    events = []
    for _ in range(n_events):
        for _attempt in range(20):
            k = int(rng.integers(spec.n_classes))
            length = float(rng.uniform(*spec.event_length))
            onset = float(rng.uniform(0.0, spec.clip_length - length))
            onset, offset = round(onset, 3), round(onset + length, 3)
            offset = min(offset, spec.clip_length)
            if all(e[2] != k or offset <= e[0] or onset >= e[1] for e in events):
                events.append((onset, offset, k))
                break
    return sorted(events, key=lambda e: (e[2], e[0]))


def render_clip(spec, events, rng):
    n = int(round(spec.clip_length * spec.sample_rate))
    bands = class_bands(spec.n_classes)
    noise_rms = 10 ** (-30 / 20)
    x = noise_rms * rng.standard_normal(n)
    for onset, offset, k in events:
        a, b = int(round(onset * spec.sample_rate)), int(round(offset * spec.sample_rate))
        snr = rng.uniform(*spec.snr_db)
        x[a:b] += noise_rms * 10 ** (snr / 20) * _archetype(k, b - a, spec.sample_rate, bands[k], rng)
    peak = np.max(np.abs(x))
    return Waveform(0.9 * x / peak, spec.sample_rate)


@dataclass
class SynthCorpus:
    manifest: DatasetManifest
    groundtruth: list  # Event for every weak and strong clip
    durations: dict    # clip_id -> seconds, weak and strong clips


def synth_dataset(spec, out_dir):
    """Write WAVE files plus manifests, ``groundtruth.tsv`` and ``durations.tsv`` under ``out_dir``."""
    out_dir = Path(out_dir)
    audio_dir = out_dir / "audio"
    audio_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    classes = spec.classes
    manifest = DatasetManifest(classes=list(classes), root=out_dir)
    gt, durations = [], {}
    for pool, count in (("weak", spec.n_weak), ("strong", spec.n_strong), ("unlabeled", spec.n_unlabeled)):
        for i in range(count):
            clip_id = f"{pool}_{i:04d}"
            rel = f"audio/{clip_id}.wav"
            events = _place_events(spec, rng)
            write_wav(out_dir / rel, render_clip(spec, events, rng))
            if pool == "unlabeled":
                manifest.unlabeled.append(rel)
                continue
            durations[clip_id] = spec.clip_length
            gt.extend(Event(clip_id, on, off, classes[k]) for on, off, k in events)
            if pool == "weak":
                labels = tuple(classes[k] for k in sorted({k for _, _, k in events}))
                manifest.weak.append((rel, labels))
            else:
                manifest.strong.extend(StrongRow(rel, on, off, classes[k]) for on, off, k in events)
    write_manifests(out_dir, manifest)
    write_groundtruth(out_dir / "groundtruth.tsv", gt)
    write_durations(out_dir / "durations.tsv", durations)
    return SynthCorpus(manifest, gt, durations)
