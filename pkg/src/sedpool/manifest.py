"""Dataset manifests and the tab-separated annotation tables.

A manifest directory holds::

    classes.txt      one class name per line (the vocabulary, in model order)
    weak.tsv         clip_path<TAB>Label1,Label2
    strong.tsv       clip_path<TAB>onset<TAB>offset<TAB>class_name
    unlabeled.tsv    clip_path

Clip paths are relative to the manifest directory; a clip's id is its file
stem.  Any of the three pool tables may be missing (empty pool).
"""
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError, ParseError
from .psds import Event, GroundTruth

DCASE_CLASSES = [
    "Alarm_bell_ringing", "Blender", "Cat", "Dishes", "Dog",
    "Electric_shaver_toothbrush", "Frying", "Running_water", "Speech", "Vacuum_cleaner",
]

WEAK_HEADER = ("clip", "labels")
STRONG_HEADER = ("clip", "onset", "offset", "class_name")
GT_HEADER = ("clip_id", "onset", "offset", "class_name")
DURATION_HEADER = ("clip_id", "duration_seconds")


def clip_id_of(path):
    return Path(path).stem


@dataclass
class StrongRow:
    clip: str
    onset: float
    offset: float
    label: str


@dataclass
class DatasetManifest:
    classes: list
    weak: list = field(default_factory=list)       # (clip path, tuple of labels)
    strong: list = field(default_factory=list)     # StrongRow
    unlabeled: list = field(default_factory=list)  # clip path
    root: Path = None

    def counts(self):
        return {
            "weak": len(self.weak),
            "strong": len({r.clip for r in self.strong}),
            "strong_events": len(self.strong),
            "unlabeled": len(self.unlabeled),
        }

    def strong_clips(self):
        out = {}
        for row in self.strong:
            out.setdefault(row.clip, []).append(row)
        return out

    def all_clips(self):
        seen = {}
        for clip, _ in self.weak:
            seen.setdefault(clip, None)
        for row in self.strong:
            seen.setdefault(row.clip, None)
        for clip in self.unlabeled:
            seen.setdefault(clip, None)
        return list(seen)

    def resolve(self, clip):
        return (self.root / clip) if self.root is not None else Path(clip)


def _rows(path):
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if line.strip():
                yield lineno, line.split("\t")


def read_classes(path):
    names = [line.strip() for line in Path(path).read_text().splitlines() if line.strip()]
    if not names:
        raise ParseError("class vocabulary is empty", path=path)
    if len(set(names)) != len(names):
        raise ParseError("duplicate class names in vocabulary", path=path)
    return names


def _check_label(label, vocab, path, lineno):
    if label not in vocab:
        raise DataError(f"{path}:{lineno}: unknown class {label!r}")


def parse_weak(path, vocab):
    order = {c: i for i, c in enumerate(vocab)}
    out = []
    for lineno, cols in _rows(path):
        if lineno == 1 and tuple(cols) == WEAK_HEADER:
            continue
        if len(cols) != 2:
            raise ParseError(f"expected clip<TAB>labels, got {len(cols)} columns", path, lineno)
        labels = [s.strip() for s in cols[1].split(",") if s.strip()]
        for label in labels:
            _check_label(label, order, path, lineno)
        out.append((cols[0], tuple(sorted(set(labels), key=order.__getitem__))))
    return out


def parse_strong(path, vocab=None):
    """Strong labels; class names are validated only when ``vocab`` is given."""
    known = None if vocab is None else set(vocab)
    out = []
    for lineno, cols in _rows(path):
        if lineno == 1 and tuple(cols) in (STRONG_HEADER, GT_HEADER):
            continue
        if len(cols) != 4:
            raise ParseError(f"expected 4 tab-separated columns, got {len(cols)}", path, lineno)
        try:
            onset, offset = float(cols[1]), float(cols[2])
        except ValueError:
            raise ParseError("onset/offset must be numbers", path, lineno) from None
        if not 0.0 <= onset < offset:
            raise ParseError(f"need 0 <= onset < offset, got {onset}, {offset}", path, lineno)
        if known is not None:
            _check_label(cols[3], known, path, lineno)
        out.append(StrongRow(cols[0], onset, offset, cols[3]))
    return out


def parse_unlabeled(path):
    out = []
    for lineno, cols in _rows(path):
        if lineno == 1 and tuple(cols) == ("clip",):
            continue
        if len(cols) != 1:
            raise ParseError(f"expected a single clip path, got {len(cols)} columns", path, lineno)
        out.append(cols[0])
    return out


def parse_manifests(directory, check_paths=True):
    directory = Path(directory)
    classes_path = directory / "classes.txt"
    if not classes_path.is_file():
        raise ParseError("missing classes.txt", path=directory)
    vocab = read_classes(classes_path)
    m = DatasetManifest(classes=vocab, root=directory)
    if (directory / "weak.tsv").is_file():
        m.weak = parse_weak(directory / "weak.tsv", vocab)
    if (directory / "strong.tsv").is_file():
        m.strong = parse_strong(directory / "strong.tsv", vocab)
    if (directory / "unlabeled.tsv").is_file():
        m.unlabeled = parse_unlabeled(directory / "unlabeled.tsv")
    if check_paths:
        missing = [c for c in m.all_clips() if not m.resolve(c).is_file()]
        if missing:
            raise DataError(f"{len(missing)} clips listed in {directory} do not exist, e.g. {missing[0]}")
    return m


def _fmt(x):
    return repr(float(x))


def write_manifests(directory, m):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "classes.txt").write_text("".join(c + "\n" for c in m.classes))
    with open(directory / "weak.tsv", "w") as fh:
        fh.write("\t".join(WEAK_HEADER) + "\n")
        for clip, labels in m.weak:
            fh.write(f"{clip}\t{','.join(labels)}\n")
    with open(directory / "strong.tsv", "w") as fh:
        fh.write("\t".join(STRONG_HEADER) + "\n")
        for r in m.strong:
            fh.write(f"{r.clip}\t{_fmt(r.onset)}\t{_fmt(r.offset)}\t{r.label}\n")
    with open(directory / "unlabeled.tsv", "w") as fh:
        fh.write("clip\n")
        for clip in m.unlabeled:
            fh.write(clip + "\n")


# -- ground truth tables -------------------------------------------------------------

def write_groundtruth(path, events):
    with open(path, "w") as fh:
        fh.write("\t".join(GT_HEADER) + "\n")
        for e in events:
            fh.write(f"{e.clip_id}\t{_fmt(e.onset)}\t{_fmt(e.offset)}\t{e.label}\n")


def read_groundtruth_events(path):
    return [Event(r.clip, r.onset, r.offset, r.label)
            for r in parse_strong(path)]


def write_durations(path, durations):
    with open(path, "w") as fh:
        fh.write("\t".join(DURATION_HEADER) + "\n")
        for clip, dur in durations.items():
            fh.write(f"{clip}\t{_fmt(dur)}\n")


def read_durations(path):
    out = {}
    for lineno, cols in _rows(path):
        if lineno == 1 and tuple(cols) == DURATION_HEADER:
            continue
        if len(cols) != 2:
            raise ParseError(f"expected clip_id<TAB>duration, got {len(cols)} columns", path, lineno)
        try:
            dur = float(cols[1])
        except ValueError:
            raise ParseError("duration must be a number", path, lineno) from None
        if dur <= 0:
            raise ParseError(f"duration must be positive, got {dur}", path, lineno)
        out[cols[0]] = dur
    return out


def load_groundtruth(gt_path, durations_path, classes=None):
    events = read_groundtruth_events(gt_path)
    return GroundTruth(events, read_durations(durations_path), classes)
