"""Waveform loading and standardized log-mel feature extraction.

Features are computed at 22050 Hz with a 2048-sample Hann window, a hop of
363 samples, 128 area-normalized triangular mel filters spanning 0 Hz to
Nyquist, natural log with a 1e-10 floor and per-bin z-scoring.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import signal
from scipy.io import wavfile

from .errors import InvalidInput, ShapeError

SAMPLE_RATE = 22050
N_FFT = 2048
HOP = 363
N_MELS = 128
LOG_FLOOR = 1e-10
STD_FLOOR = 1e-8


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ShapeError(f"waveform must be mono, got shape {self.samples.shape}")
        if int(self.sample_rate) <= 0:
            raise InvalidInput(f"sample_rate must be positive, got {self.sample_rate}")
        self.sample_rate = int(self.sample_rate)
        if not np.all(np.isfinite(self.samples)):
            raise InvalidInput("waveform contains non-finite samples")

    @property
    def duration(self):
        return len(self.samples) / self.sample_rate


@dataclass
class SpectralMap:
    """A ``T x n_mels`` feature matrix plus frame timing."""

    values: np.ndarray
    hop_seconds: float
    clip_id: str = ""
    n_mels: int = field(init=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] < 1:
            raise ShapeError(f"spectral map must be T x F with T >= 1, got {self.values.shape}")
        self.n_mels = self.values.shape[1]
        if not np.all(np.isfinite(self.values)):
            raise InvalidInput(f"spectral map {self.clip_id!r} contains non-finite values")

    @property
    def n_frames(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class FeatureStats:
    mean: np.ndarray
    std: np.ndarray

    def save(self, path):
        np.savez(path, mean=self.mean, std=self.std)

    @classmethod
    def load(cls, path):
        with np.load(path) as data:
            return cls(mean=data["mean"].copy(), std=data["std"].copy())


def read_wav(path):
    """Read a 16-bit PCM or 32-bit float WAVE file, averaging channels to mono."""
    rate, data = wavfile.read(path)
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise InvalidInput(f"{path}: unsupported sample format {data.dtype}")
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    return Waveform(samples, rate)


def write_wav(path, wave, subtype="PCM_16"):
    if subtype == "PCM_16":
        data = np.round(np.clip(wave.samples, -1.0, 32767 / 32768) * 32768.0).astype(np.int16)
    elif subtype == "FLOAT":
        data = wave.samples.astype(np.float32)
    else:
        raise InvalidInput(f"unknown WAVE subtype {subtype!r}")
    wavfile.write(path, wave.sample_rate, data)


def resample(w, target_rate=SAMPLE_RATE):
    """Polyphase windowed-sinc resampling to ``target_rate``."""
    if len(w.samples) == 0:
        raise InvalidInput("cannot resample an empty waveform")
    if target_rate <= 0:
        raise InvalidInput(f"target_rate must be positive, got {target_rate}")
    if w.sample_rate == target_rate:
        return w
    ratio = Fraction(int(target_rate), w.sample_rate)
    out = signal.resample_poly(w.samples, ratio.numerator, ratio.denominator)
    return Waveform(out, int(target_rate))


def peak_normalize(w):
    peak = np.max(np.abs(w.samples)) if len(w.samples) else 0.0
    if peak == 0.0:
        return w
    return Waveform(w.samples / peak, w.sample_rate)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(sample_rate=SAMPLE_RATE, n_fft=N_FFT, n_mels=N_MELS, fmin=0.0, fmax=None):
    """Triangular filters on the HTK mel scale, each with unit area in Hz.

    Returns an ``(n_mels, n_fft // 2 + 1)`` matrix.
    """
    if fmax is None:
        fmax = sample_rate / 2.0
    fft_freqs = np.linspace(0.0, sample_rate / 2.0, n_fft // 2 + 1)
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (fft_freqs[None, :] - lower) / (center - lower)
    falling = (upper - fft_freqs[None, :]) / (upper - center)
    weights = np.maximum(0.0, np.minimum(rising, falling))
    weights *= (2.0 / (upper - lower))
    return weights


_FILTERBANK_CACHE = {}


def _cached_filterbank(sample_rate, n_fft, n_mels):
    key = (sample_rate, n_fft, n_mels)
    if key not in _FILTERBANK_CACHE:
        _FILTERBANK_CACHE[key] = mel_filterbank(sample_rate, n_fft, n_mels)
    return _FILTERBANK_CACHE[key]


def stft_power(samples, n_fft=N_FFT, hop=HOP):
    """Power spectrogram with centered, reflection-padded Hann frames, shape ``(T, n_fft//2+1)``."""
    pad = n_fft // 2
    padded = np.pad(samples, pad, mode="reflect")
    n_frames = 1 + (len(padded) - n_fft) // hop
    frames = np.lib.stride_tricks.sliding_window_view(padded, n_fft)[::hop][:n_frames]
    window = signal.get_window("hann", n_fft, fftbins=True)
    spec = np.fft.rfft(frames * window, axis=1)
    return spec.real ** 2 + spec.imag ** 2


def log_mel(w, n_fft=N_FFT, hop=HOP, n_mels=N_MELS, clip_id=""):
    """Unstandardized log-mel energies; ``T == len(samples) // hop + 1``."""
    if w.sample_rate != SAMPLE_RATE:
        raise InvalidInput(f"log_mel expects {SAMPLE_RATE} Hz input, got {w.sample_rate} Hz")
    if len(w.samples) < hop:
        raise InvalidInput(f"clip of {len(w.samples)} samples is shorter than one hop ({hop})")
    power = stft_power(w.samples, n_fft, hop)
    mel = power @ _cached_filterbank(w.sample_rate, n_fft, n_mels).T
    return SpectralMap(np.log(mel + LOG_FLOOR), hop / w.sample_rate, clip_id)


def fit_stats(maps):
    maps = list(maps)
    if not maps:
        raise InvalidInput("cannot fit feature statistics on an empty collection")
    stacked = np.concatenate([m.values for m in maps], axis=0)
    mean = stacked.mean(axis=0)
    std = stacked.std(axis=0)
    std = np.where(std < STD_FLOOR, 1.0, std)
    return FeatureStats(mean=mean, std=std)


def apply_stats(spectral_map, stats):
    if spectral_map.values.shape[1] != stats.mean.shape[0]:
        raise ShapeError(
            f"map has {spectral_map.values.shape[1]} bins, stats have {stats.mean.shape[0]}"
        )
    values = (spectral_map.values - stats.mean) / stats.std
    return SpectralMap(values, spectral_map.hop_seconds, spectral_map.clip_id)


def extract_features(w, clip_id=""):
    """Resample to 22050 Hz, peak-normalize and compute the raw log-mel map."""
    return log_mel(peak_normalize(resample(w, SAMPLE_RATE)), clip_id=clip_id)


def save_feature(path, spectral_map):
    """Write one clip's features as ``.npz``: float64 ``values``, ``hop_seconds`` and ``clip_id``."""
    np.savez(
        path,
        values=spectral_map.values,
        hop_seconds=np.float64(spectral_map.hop_seconds),
        clip_id=np.str_(spectral_map.clip_id),
    )


def load_feature(path):
    with np.load(Path(path)) as data:
        return SpectralMap(
            data["values"].copy(), float(data["hop_seconds"]), str(data["clip_id"])
        )
