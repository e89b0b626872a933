import numpy as np
import pytest

from sedpool.audio import read_wav
from sedpool.errors import ConfigError, DataError, ParseError
from sedpool.manifest import (
    DCASE_CLASSES,
    load_groundtruth,
    parse_manifests,
    parse_strong,
    parse_weak,
    read_durations,
    write_manifests,
)
from sedpool.synth import SynthSpec, class_bands, synth_dataset


def _write(path, text):
    path.write_text(text)
    return path


class TestParse:
    def test_weak_row(self, tmp_path):
        rows = parse_weak(_write(tmp_path / "w.tsv", "a.wav\tSpeech,Dog\n"), DCASE_CLASSES)
        assert len(rows) == 1 and rows[0][0] == "a.wav" and set(rows[0][1]) == {"Speech", "Dog"}

    def test_onset_after_offset(self, tmp_path):
        with pytest.raises(ParseError) as err:
            parse_strong(_write(tmp_path / "s.tsv", "a.wav\t0.0\t0.5\tDog\na.wav\t1.0\t0.5\tDog\n"))
        assert err.value.line == 2

    def test_unknown_class(self, tmp_path):
        with pytest.raises(DataError):
            parse_weak(_write(tmp_path / "w.tsv", "a.wav\tUnicorn\n"), DCASE_CLASSES)
        with pytest.raises(DataError):
            parse_strong(_write(tmp_path / "s.tsv", "a.wav\t0\t1\tUnicorn\n"), DCASE_CLASSES)

    @pytest.mark.parametrize("text", ["a.wav\t0.0\tDog\n", "a.wav\tx\t1.0\tDog\n"])
    def test_malformed(self, tmp_path, text):
        with pytest.raises(ParseError):
            parse_strong(_write(tmp_path / "s.tsv", text))

    def test_missing_audio(self, tmp_path):
        (tmp_path / "classes.txt").write_text("Dog\n")
        _write(tmp_path / "unlabeled.tsv", "clip\naudio/nothing.wav\n")
        with pytest.raises(DataError):
            parse_manifests(tmp_path)
        assert parse_manifests(tmp_path, check_paths=False).unlabeled == ["audio/nothing.wav"]

    def test_durations(self, tmp_path):
        assert read_durations(_write(tmp_path / "d.tsv", "clip_id\tduration_seconds\na\t10.0\n")) == {"a": 10.0}
        with pytest.raises(ParseError):
            read_durations(_write(tmp_path / "e.tsv", "a\t-1\n"))


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    spec = SynthSpec(seed=3, n_weak=3, n_strong=3, n_unlabeled=2, n_classes=2, clip_length=3.0,
                     event_length=(0.5, 1.5))
    return spec, out, synth_dataset(spec, out)


class TestSynth:
    def test_counts(self, corpus):
        _, out, c = corpus
        m = parse_manifests(out)
        assert m.counts()["weak"] == 3 and m.counts()["strong"] == 3 and m.counts()["unlabeled"] == 2
        assert m.classes == DCASE_CLASSES[:2]

    def test_byte_identical(self, corpus, tmp_path):
        spec, out, _ = corpus
        synth_dataset(spec, tmp_path)
        for wav in sorted((out / "audio").glob("*.wav")):
            assert (tmp_path / "audio" / wav.name).read_bytes() == wav.read_bytes()
        for name in ("weak.tsv", "strong.tsv", "groundtruth.tsv", "durations.tsv"):
            assert (tmp_path / name).read_bytes() == (out / name).read_bytes()

    def test_ground_truth_invariants(self, corpus):
        spec, out, c = corpus
        gt = load_groundtruth(out / "groundtruth.tsv", out / "durations.tsv")
        assert len(gt.events) == len(c.groundtruth)
        for e in gt.events:
            assert 0 <= e.onset < e.offset <= spec.clip_length
        by_key = {}
        for e in gt.events:
            by_key.setdefault((e.clip_id, e.label), []).append((e.onset, e.offset))
        for spans in by_key.values():
            spans.sort()
            assert all(a[1] <= b[0] for a, b in zip(spans[:-1], spans[1:]))

    def test_weak_labels_follow_events(self, corpus):
        _, out, c = corpus
        m = parse_manifests(out)
        for clip, labels in m.weak:
            cid = clip.split("/")[-1][:-4]
            assert set(labels) == {e.label for e in c.groundtruth if e.clip_id == cid}

    def test_audio(self, corpus):
        spec, out, _ = corpus
        w = read_wav(out / "audio" / "weak_0000.wav")
        assert w.sample_rate == 22050 and len(w.samples) == int(spec.clip_length * 22050)
        assert 0.85 < np.max(np.abs(w.samples)) <= 0.91

    def test_bands_disjoint(self):
        bands = class_bands(10)
        for (c1, h1), (c2, h2) in zip(bands[:-1], bands[1:]):
            assert c1 + h1 < c2 - h2

    def test_manifest_round_trip(self, corpus, tmp_path):
        _, out, _ = corpus
        m = parse_manifests(out)
        write_manifests(tmp_path, m)
        for name in ("classes.txt", "weak.tsv", "strong.tsv", "unlabeled.tsv"):
            assert (tmp_path / name).read_text() == (out / name).read_text()

    def test_invalid_spec(self):
        with pytest.raises(ConfigError):
            SynthSpec(clip_length=2.0)
        with pytest.raises(ConfigError):
            SynthSpec(n_classes=11)
