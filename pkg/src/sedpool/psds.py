"""Intersection-based polyphonic sound detection score (PSDS).

Each operating point (one detection set per threshold) is matched against
the ground truth with three intersection criteria:

* detection tolerance (DTC): a detection is valid when at least ``dtc`` of
  its duration overlaps same-class ground truth; invalid ones are false
  positives;
* ground-truth intersection (GTC): a ground-truth event is a true positive
  when DTC-valid detections cover at least ``gtc`` of it;
* cross-trigger tolerance (CTTC): an invalid detection of class ``c`` is a
  cross-trigger on class ``k`` when at least ``cttc`` of it overlaps ground
  truth of ``k``.

Per-class TPR and effective FPR (false positives plus ``alpha_ct`` times the
mean cross-trigger rate, both per hour) give one PSD-ROC per class.  The
score is the area under ``max(0, mean_c S_c(e) - alpha_st * std_c S_c(e))``
for ``e`` in ``[0, e_max]``, divided by ``e_max``, where ``S_c`` is the
best TPR class ``c`` reaches with eFPR at most ``e``.
"""
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .kernels import intersection_matrix

SECONDS_PER_HOUR = 3600.0


@dataclass(frozen=True)
class PsdsParams:
    dtc: float
    gtc: float
    cttc: float | None = None
    alpha_st: float = 1.0
    alpha_ct: float = 0.0
    e_max: float = 100.0

    def __post_init__(self):
        for name in ("dtc", "gtc"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ConfigError(f"{name} must be in (0, 1], got {value}")
        if self.cttc is not None and not 0.0 < self.cttc <= 1.0:
            raise ConfigError(f"cttc must be in (0, 1], got {self.cttc}")
        if self.alpha_st < 0 or self.alpha_ct < 0:
            raise ConfigError("alpha_st and alpha_ct must be non-negative")
        if self.e_max <= 0:
            raise ConfigError(f"e_max must be positive, got {self.e_max}")
        if (self.cttc is not None) != (self.alpha_ct > 0):
            raise ConfigError("cttc must be given exactly when alpha_ct > 0")

    @classmethod
    def from_dict(cls, d):
        return cls(
            dtc=float(d["dtc"]),
            gtc=float(d["gtc"]),
            cttc=None if d.get("cttc") is None else float(d["cttc"]),
            alpha_st=float(d.get("alpha_st", 1.0)),
            alpha_ct=float(d.get("alpha_ct", 0.0)),
            e_max=float(d.get("e_max", 100.0)),
        )

    def to_dict(self):
        return {
            "dtc": self.dtc, "gtc": self.gtc, "cttc": self.cttc,
            "alpha_st": self.alpha_st, "alpha_ct": self.alpha_ct, "e_max": self.e_max,
        }


SCENARIO1 = PsdsParams(dtc=0.7, gtc=0.7, cttc=None, alpha_st=1.0, alpha_ct=0.0, e_max=100.0)
SCENARIO2 = PsdsParams(dtc=0.1, gtc=0.1, cttc=0.3, alpha_st=1.0, alpha_ct=0.5, e_max=100.0)


@dataclass(frozen=True)
class Event:
    clip_id: str
    onset: float
    offset: float
    label: str


@dataclass
class GroundTruth:
    """Reference events, clip durations and the class vocabulary being scored."""

    events: list
    durations: dict
    classes: list = None

    def __post_init__(self):
        self.events = list(self.events)
        if self.classes is None:
            self.classes = sorted({e.label for e in self.events})
        self.classes = list(self.classes)
        known = set(self.classes)
        for e in self.events:
            if e.label not in known:
                raise DataError(f"ground truth class {e.label!r} not in vocabulary")
            if e.clip_id not in self.durations:
                raise DataError(f"ground truth clip {e.clip_id!r} has no duration")
            if not 0.0 <= e.onset < e.offset:
                raise DataError(f"invalid ground truth event {e}")
        if self.dataset_duration <= 0:
            raise DataError("dataset duration must be positive")

    @property
    def dataset_duration(self):
        return float(sum(self.durations.values()))

    def class_durations(self):
        out = {c: 0.0 for c in self.classes}
        for e in self.events:
            out[e.label] += e.offset - e.onset
        return out

    def class_counts(self):
        out = {c: 0 for c in self.classes}
        for e in self.events:
            out[e.label] += 1
        return out


@dataclass
class OperatingPointCounts:
    threshold: float
    classes: list
    tp: np.ndarray
    fp: np.ndarray
    ct: np.ndarray  # [detecting class, cross-triggered class]


@dataclass
class OperatingPoint:
    threshold: float
    tpr: np.ndarray
    efpr: np.ndarray
    counts: OperatingPointCounts = None


@dataclass
class PsdsReport:
    psds: float
    params: PsdsParams
    classes: list
    curves: dict  # class -> list of (efpr, tpr) Pareto support points
    operating_points: list = field(default_factory=list)

    def summary(self):
        lines = [f"PSDS: {self.psds:.4f}"]
        lines.append(
            "params: " + ", ".join(f"{k}={v}" for k, v in self.params.to_dict().items())
        )
        for c in self.classes:
            pts = self.curves[c]
            best = max((t for _, t in pts), default=0.0)
            lines.append(f"  {c}: {len(pts)} ROC points, max TPR {best:.3f}")
        return "\n".join(lines)

    def table_rows(self):
        """``(threshold, class, tp, fp, ct-row, tpr, efpr)`` for every operating point and class."""
        rows = []
        for op in self.operating_points:
            counts = op.counts
            for i, c in enumerate(self.classes):
                ct_row = ",".join(str(int(v)) for v in counts.ct[i])
                rows.append((op.threshold, c, int(counts.tp[i]), int(counts.fp[i]),
                             ct_row, float(op.tpr[i]), float(op.efpr[i])))
        return rows


def _group(events, class_index):
    """clip -> (onsets, offsets, class indices) arrays."""
    by_clip = defaultdict(list)
    for e in events:
        try:
            k = class_index[e.label]
        except KeyError:
            raise DataError(f"unknown class name {e.label!r}") from None
        by_clip[e.clip_id].append((e.onset, e.offset, k))
    out = {}
    for clip, rows in by_clip.items():
        arr = np.array(rows, dtype=np.float64)
        out[clip] = (arr[:, 0], arr[:, 1], arr[:, 2].astype(np.int64))
    return out


def match_operating_point(detections, gt, params, threshold=float("nan")):
    """Count true positives, false positives and cross-triggers for one detection set."""
    classes = gt.classes
    index = {c: i for i, c in enumerate(classes)}
    n_cls = len(classes)
    tp = np.zeros(n_cls, dtype=np.int64)
    fp = np.zeros(n_cls, dtype=np.int64)
    ct = np.zeros((n_cls, n_cls), dtype=np.int64)

    det_by_clip = _group(detections, index)
    gt_by_clip = _group(gt.events, index)
    for clip, (d_on, d_off, d_cls) in det_by_clip.items():
        if clip not in gt.durations:
            raise DataError(f"detections refer to unknown clip {clip!r}")
        if np.any(d_off <= d_on):
            raise DataError(f"zero or negative length detection in clip {clip!r}")
        if clip in gt_by_clip:
            g_on, g_off, g_cls = gt_by_clip[clip]
        else:
            g_on = g_off = np.zeros(0)
            g_cls = np.zeros(0, dtype=np.int64)
        inter = intersection_matrix(d_on, d_off, g_on, g_off)  # [n_det, n_gt]
        d_len = d_off - d_on
        g_len = g_off - g_on

        # overlap of each detection with every class's ground truth in this clip
        onehot = np.zeros((len(g_cls), n_cls))
        onehot[np.arange(len(g_cls)), g_cls] = 1.0
        per_class = (inter @ onehot) / d_len[:, None]  # [n_det, n_cls]

        same_class = per_class[np.arange(len(d_cls)), d_cls]
        valid = same_class >= params.dtc
        np.add.at(fp, d_cls[~valid], 1)

        if len(g_cls):
            same = (d_cls[:, None] == g_cls[None, :]) & valid[:, None]
            covered = (inter * same).sum(axis=0) / g_len
            np.add.at(tp, g_cls[covered >= params.gtc], 1)

        if params.cttc is not None:
            invalid = np.flatnonzero(~valid)
            hits = per_class[invalid] >= params.cttc
            hits[np.arange(len(invalid)), d_cls[invalid]] = False
            for row, k in zip(hits, d_cls[invalid]):
                ct[k] += row
    return OperatingPointCounts(threshold, list(classes), tp, fp, ct)


def rates(counts, gt, params):
    """Per-class ``(tpr, efpr)`` with eFPR in events per hour."""
    n_gt = gt.class_counts()
    class_hours = gt.class_durations()
    classes = counts.classes
    n_cls = len(classes)
    tpr = counts.tp / np.array([max(1, n_gt[c]) for c in classes], dtype=np.float64)
    hours = gt.dataset_duration / SECONDS_PER_HOUR
    fpr = counts.fp / hours
    efpr = fpr.astype(np.float64)
    if params.alpha_ct > 0 and n_cls > 1:
        ctr = np.zeros((n_cls, n_cls))
        for j, c in enumerate(classes):
            dur = class_hours[c] / SECONDS_PER_HOUR
            col = counts.ct[:, j]
            if dur == 0:
                if np.any(col):
                    raise DataError(f"cross-triggers counted on class {c!r} which has no ground truth")
                continue
            ctr[:, j] = col / dur
        off_diag = ~np.eye(n_cls, dtype=bool)
        mean_ctr = (ctr * off_diag).sum(axis=1) / (n_cls - 1)
        efpr = efpr + params.alpha_ct * mean_ctr
    return tpr, efpr


def _pareto(points):
    """Keep points whose TPR strictly exceeds every point with smaller or equal eFPR."""
    out = []
    best = -1.0
    for e, t in sorted(points, key=lambda p: (p[0], -p[1])):
        if t > best:
            out.append((float(e), float(t)))
            best = t
    return out


def psd_roc(operating_points, params, classes):
    """Integrate the effective TPR curve exactly over ``[0, e_max]``."""
    n_cls = len(classes)
    curves = {}
    for i, c in enumerate(classes):
        curves[c] = _pareto([(op.efpr[i], op.tpr[i]) for op in operating_points])

    cuts = {0.0, params.e_max}
    for pts in curves.values():
        cuts.update(e for e, _ in pts if e < params.e_max)
    cuts = np.array(sorted(cuts))

    support = np.zeros((n_cls, len(cuts)))
    for i, c in enumerate(classes):
        pts = curves[c]
        if not pts:
            continue
        es = np.array([e for e, _ in pts])
        ts = np.array([t for _, t in pts])
        # last support point with eFPR <= cut (ts is increasing along es)
        idx = np.searchsorted(es, cuts, side="right") - 1
        support[i] = np.where(idx >= 0, ts[np.maximum(idx, 0)], 0.0)

    mu = np.maximum(0.0, support.mean(axis=0) - params.alpha_st * support.std(axis=0))
    area = float(np.sum(mu[:-1] * np.diff(cuts)))
    psds = area / params.e_max
    return PsdsReport(psds=psds, params=params, classes=list(classes), curves=curves,
                      operating_points=list(operating_points))


def evaluate(detections_by_threshold, gt, params):
    """Score a ``threshold -> list[Event]`` mapping against ``gt``."""
    if not detections_by_threshold:
        raise DataError("at least one operating point is required")
    points = []
    for threshold in sorted(detections_by_threshold):
        counts = match_operating_point(detections_by_threshold[threshold], gt, params, threshold)
        tpr, efpr = rates(counts, gt, params)
        points.append(OperatingPoint(threshold, tpr, efpr, counts))
    return psd_roc(points, params, gt.classes)
