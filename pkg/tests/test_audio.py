import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sedpool.audio import (
    HOP,
    SAMPLE_RATE,
    FeatureStats,
    SpectralMap,
    Waveform,
    apply_stats,
    extract_features,
    fit_stats,
    load_feature,
    log_mel,
    mel_filterbank,
    peak_normalize,
    read_wav,
    resample,
    save_feature,
    write_wav,
)
from sedpool.errors import InvalidInput, ShapeError


def tone(freq, seconds, rate, amp=0.5):
    t = np.arange(int(round(seconds * rate))) / rate
    return Waveform(amp * np.sin(2 * np.pi * freq * t), rate)


def peak_hz(w):
    spec = np.abs(np.fft.rfft(w.samples * np.hanning(len(w.samples))))
    return np.argmax(spec) * w.sample_rate / len(w.samples), w.sample_rate / len(w.samples)


class TestWaveform:
    def test_invalid(self):
        with pytest.raises(InvalidInput):
            Waveform([0.0, np.nan], 100)
        with pytest.raises(InvalidInput):
            Waveform([0.0], 0)
        with pytest.raises(ShapeError):
            Waveform(np.zeros((2, 2)), 100)


class TestResample:
    def test_halving(self):
        out = resample(tone(440, 1.0, 44100), 22050)
        assert out.sample_rate == 22050 and len(out.samples) == 22050

    def test_identity(self):
        w = tone(440, 0.1, 22050)
        assert resample(w, 22050) is w

    def test_tone_peak_from_16k(self):
        out = resample(tone(440, 1.0, 16000), 22050)
        assert len(out.samples) == 22050
        hz, bin_width = peak_hz(out)
        assert abs(hz - 440) <= bin_width

    def test_duration_preserved(self):
        w = tone(300, 0.77, 48000)
        out = resample(w, 22050)
        assert abs(out.duration - w.duration) <= 1 / 22050

    def test_composition(self):
        w = tone(500, 0.5, 16000)
        twice = resample(resample(w, 22050), 22050)
        once = resample(w, 22050)
        assert np.sqrt(np.mean((twice.samples - once.samples) ** 2)) < 1e-6

    def test_empty(self):
        with pytest.raises(InvalidInput):
            resample(Waveform(np.zeros(0), 16000), 22050)


class TestPeakNormalize:
    def test_examples(self):
        assert peak_normalize(Waveform([0.5, -0.25], 10)).samples.tolist() == [1.0, -0.5]
        assert peak_normalize(Waveform([-2.0, 1.0], 10)).samples.tolist() == [-1.0, 0.5]
        assert peak_normalize(Waveform([0.0, 0.0], 10)).samples.tolist() == [0.0, 0.0]

    @given(arrays(np.float64, st.integers(1, 50), elements=st.floats(-10, 10)))
    def test_idempotent(self, x):
        once = peak_normalize(Waveform(x, 100))
        twice = peak_normalize(once)
        np.testing.assert_allclose(twice.samples, once.samples, rtol=1e-15, atol=0)
        if np.any(x != 0):
            assert np.max(np.abs(once.samples)) == pytest.approx(1.0)


class TestLogMel:
    def test_ten_second_clip(self):
        m = log_mel(Waveform(np.zeros(220500), SAMPLE_RATE))
        assert m.values.shape == (608, 128)
        assert m.hop_seconds == pytest.approx(0.016463, abs=1e-6)
        assert np.all(m.values == pytest.approx(np.log(1e-10)))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(HOP, 20000))
    def test_frame_count(self, n):
        assert log_mel(Waveform(np.zeros(n), SAMPLE_RATE)).n_frames == n // HOP + 1

    def test_stationary_tone(self):
        m = log_mel(tone(1000, 1.0, SAMPLE_RATE))
        peaks = np.argmax(m.values, axis=1)
        assert np.all(peaks == peaks[0])

    def test_too_short(self):
        with pytest.raises(InvalidInput):
            log_mel(Waveform(np.zeros(HOP - 1), SAMPLE_RATE))

    def test_wrong_rate(self):
        with pytest.raises(InvalidInput):
            log_mel(Waveform(np.zeros(4000), 16000))

    def test_filterbank(self):
        fb = mel_filterbank()
        assert fb.shape == (128, 1025)
        assert np.all(fb >= 0) and np.all(fb.sum(axis=1) > 0)
        # area normalization: each triangle integrates to ~1 over Hz
        areas = fb.sum(axis=1) * (SAMPLE_RATE / 2048)
        np.testing.assert_allclose(areas[20:], 1.0, rtol=0.05)

    def test_extract_resamples(self):
        m = extract_features(tone(440, 1.0, 44100))
        assert m.n_frames == 22050 // HOP + 1


class TestStats:
    def test_two_point(self):
        m = SpectralMap(np.array([[1.0] * 128, [3.0] * 128]), 0.01)
        stats = fit_stats([m])
        assert np.all(stats.mean == 2.0) and np.all(stats.std == 1.0)
        assert apply_stats(m, stats).values[:, 0].tolist() == [-1.0, 1.0]

    def test_constant_bin(self):
        values = np.random.default_rng(0).normal(size=(10, 128))
        values[:, 5] = 7.0
        stats = fit_stats([SpectralMap(values, 0.01)])
        assert stats.std[5] == 1.0
        assert np.all(apply_stats(SpectralMap(values, 0.01), stats).values[:, 5] == 0.0)

    def test_standardizes_corpus(self):
        rng = np.random.default_rng(1)
        maps = [SpectralMap(rng.normal(3, 2, size=(int(rng.integers(5, 40)), 128)), 0.01) for _ in range(5)]
        stats = fit_stats(maps)
        z = np.concatenate([apply_stats(m, stats).values for m in maps])
        assert np.abs(z.mean(axis=0)).max() < 1e-6
        assert np.abs(z.std(axis=0) - 1).max() < 1e-6
        again = fit_stats([SpectralMap(z, 0.01)])
        np.testing.assert_allclose(apply_stats(SpectralMap(z, 0.01), again).values, z, atol=1e-9)

    def test_empty(self):
        with pytest.raises(InvalidInput):
            fit_stats([])

    def test_bin_mismatch(self):
        stats = FeatureStats(np.zeros(128), np.ones(128))
        with pytest.raises(ShapeError):
            apply_stats(SpectralMap(np.zeros((2, 64)), 0.01), stats)


class TestFiles:
    @pytest.mark.parametrize("subtype", ["PCM_16", "FLOAT"])
    def test_wav_round_trip(self, tmp_path, subtype):
        w = tone(440, 0.1, 22050, amp=0.7)
        write_wav(tmp_path / "a.wav", w, subtype)
        back = read_wav(tmp_path / "a.wav")
        assert back.sample_rate == 22050
        np.testing.assert_allclose(back.samples, w.samples, atol=1 / 32768 if subtype == "PCM_16" else 1e-7)

    def test_stereo_is_averaged(self, tmp_path):
        from scipy.io import wavfile

        data = np.stack([np.full(100, 0.5), np.full(100, -0.25)], axis=1).astype(np.float32)
        wavfile.write(tmp_path / "s.wav", 8000, data)
        assert np.allclose(read_wav(tmp_path / "s.wav").samples, 0.125)

    def test_feature_round_trip(self, tmp_path):
        m = SpectralMap(np.random.default_rng(2).normal(size=(7, 128)), HOP / SAMPLE_RATE, "clip_7")
        save_feature(tmp_path / "c.npz", m)
        back = load_feature(tmp_path / "c.npz")
        assert np.array_equal(back.values, m.values)
        assert back.hop_seconds == m.hop_seconds and back.clip_id == "clip_7"

    def test_stats_round_trip(self, tmp_path):
        stats = FeatureStats(np.arange(128.0), np.ones(128) * 2)
        stats.save(tmp_path / "s.npz")
        back = FeatureStats.load(tmp_path / "s.npz")
        assert np.array_equal(back.mean, stats.mean) and np.array_equal(back.std, stats.std)
