"""Frame probabilities to event lists: threshold, median filter, merge short gaps."""
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, InvalidInput, ParseError
from .kernels import binary_runs, median_filter_binary
from .psds import Event

TSV_HEADER = ("clip_id", "onset", "offset", "class_name")


@dataclass
class PredictionMatrix:
    probs: np.ndarray  # [T', C]
    frame_duration: float
    clip_id: str
    clip_length: float

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.ndim != 2:
            raise InvalidInput(f"probabilities must be T x C, got {self.probs.shape}")
        if not np.all(np.isfinite(self.probs)) or self.probs.min(initial=0) < 0 or self.probs.max(initial=0) > 1:
            raise InvalidInput(f"{self.clip_id}: probabilities must be finite and in [0, 1]")
        if self.frame_duration <= 0:
            raise InvalidInput("frame_duration must be positive")


@dataclass
class EventList:
    clip_id: str
    events: list = field(default_factory=list)  # (class_id, onset, offset), sorted

    def as_events(self, class_names):
        return [Event(self.clip_id, on, off, class_names[k]) for k, on, off in self.events]


def binarize(probs, threshold):
    if not 0.0 < threshold < 1.0:
        raise InvalidInput(f"threshold must be in (0, 1), got {threshold}")
    return (np.asarray(probs) >= threshold).astype(np.uint8)


def median_filter(column, window=7):
    """Centered median over an odd window, treating frames beyond the clip as zeros."""
    if window < 1 or window % 2 == 0:
        raise ConfigError(f"median window must be odd, got {window}")
    return median_filter_binary(np.asarray(column, dtype=np.uint8), window)


def frames_to_events(column, frame_duration, gap_tolerance=0.2, clip_length=None):
    """Runs of ones to ``(onset, offset)`` pairs; gaps strictly below the tolerance are merged."""
    starts, ends = binary_runs(np.asarray(column, dtype=np.uint8))
    events = []
    for s, e in zip(starts, ends):
        onset = s * frame_duration
        offset = (e + 1) * frame_duration
        if clip_length is not None:
            offset = min(offset, clip_length)
            if onset >= clip_length:
                continue
        if events and onset - events[-1][1] < gap_tolerance:
            events[-1] = (events[-1][0], offset)
        else:
            events.append((onset, offset))
    return events


def decode(pred, preset):
    """``threshold -> EventList`` for every threshold in the preset."""
    if not preset.thresholds:
        raise ConfigError("preset has no thresholds")
    out = {}
    for tau in preset.thresholds:
        binary = binarize(pred.probs, tau)
        events = []
        for k in range(binary.shape[1]):
            smoothed = median_filter(binary[:, k], preset.median_window)
            for onset, offset in frames_to_events(smoothed, pred.frame_duration,
                                                  preset.gap_tolerance, pred.clip_length):
                events.append((k, onset, offset))
        out[tau] = EventList(pred.clip_id, events)
    return out


def threshold_filename(tau):
    return f"detections_th{tau:.4f}.tsv"


def write_event_tsv(path, events):
    """Rows ``clip_id  onset  offset  class_name`` with a header line."""
    with open(path, "w") as fh:
        fh.write("\t".join(TSV_HEADER) + "\n")
        for e in events:
            fh.write(f"{e.clip_id}\t{e.onset:.6f}\t{e.offset:.6f}\t{e.label}\n")


def read_event_tsv(path):
    events = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            cols = line.split("\t")
            if lineno == 1 and tuple(cols) == TSV_HEADER:
                continue
            if len(cols) != 4:
                raise ParseError(f"expected 4 tab-separated columns, got {len(cols)}", path, lineno)
            try:
                onset, offset = float(cols[1]), float(cols[2])
            except ValueError:
                raise ParseError("onset/offset must be numbers", path, lineno) from None
            if not onset < offset:
                raise ParseError(f"onset {onset} must be before offset {offset}", path, lineno)
            events.append(Event(cols[0], onset, offset, cols[3]))
    return events


def write_detections(out_dir, detections_by_threshold):
    """One TSV per threshold, ``detections_th<tau>.tsv``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for tau, events in detections_by_threshold.items():
        write_event_tsv(out_dir / threshold_filename(tau), events)


def read_detections(directory):
    out = {}
    for path in sorted(Path(directory).glob("detections_th*.tsv")):
        tau = float(path.stem[len("detections_th"):])
        out[tau] = read_event_tsv(path)
    if not out:
        raise ParseError("no detections_th*.tsv files found", path=directory)
    return out
