"""Scenario presets: every hyperparameter that differs between the two evaluation setups."""
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .audio import HOP, N_MELS, SAMPLE_RATE
from .errors import ConfigError
from .psds import PsdsParams

SHIPPED = ("scenario1", "scenario2")


def default_thresholds():
    return [round(0.01 + 0.02 * k, 10) for k in range(50)]


@dataclass(frozen=True)
class ScenarioPreset:
    name: str
    scenario_id: int
    pool_specs: tuple
    time_mask_max: int
    freq_mask_max: int
    psds_params: PsdsParams
    median_window: int = 7
    gap_tolerance: float = 0.2
    thresholds: tuple = field(default_factory=lambda: tuple(default_thresholds()))

    def __post_init__(self):
        specs = tuple(tuple(int(v) for v in s) for s in self.pool_specs)
        object.__setattr__(self, "pool_specs", specs)
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))
        if len(specs) != 7 or any(len(s) != 2 or min(s) < 1 for s in specs):
            raise ConfigError(f"{self.name}: pool_specs must be 7 positive (time, freq) pairs")
        if int(np.prod([kf for _, kf in specs])) != N_MELS:
            raise ConfigError(f"{self.name}: frequency pooling must reduce {N_MELS} bins to 1")
        if self.median_window < 1 or self.median_window % 2 == 0:
            raise ConfigError(f"{self.name}: median_window must be odd, got {self.median_window}")
        if self.gap_tolerance < 0:
            raise ConfigError(f"{self.name}: gap_tolerance must be non-negative")
        th = np.array(self.thresholds)
        if th.size == 0 or np.any(th <= 0) or np.any(th >= 1) or np.any(np.diff(th) <= 0):
            raise ConfigError(f"{self.name}: thresholds must be strictly increasing in (0, 1)")
        if self.time_mask_max < 0 or self.freq_mask_max < 0:
            raise ConfigError(f"{self.name}: mask maxima must be non-negative")

    @property
    def time_factor(self):
        return int(np.prod([kt for kt, _ in self.pool_specs]))

    def to_dict(self):
        return {
            "name": self.name,
            "scenario_id": self.scenario_id,
            "pool_specs": [list(s) for s in self.pool_specs],
            "time_mask_max": self.time_mask_max,
            "freq_mask_max": self.freq_mask_max,
            "median_window": self.median_window,
            "gap_tolerance": self.gap_tolerance,
            "thresholds": list(self.thresholds),
            "psds": self.psds_params.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        try:
            thresholds = d.get("thresholds")
            if thresholds is None:
                thresholds = default_thresholds()
            elif isinstance(thresholds, dict):
                start, step, count = thresholds["start"], thresholds["step"], int(thresholds["count"])
                thresholds = [round(start + step * k, 10) for k in range(count)]
            return cls(
                name=str(d["name"]),
                scenario_id=int(d["scenario_id"]),
                pool_specs=d["pool_specs"],
                time_mask_max=int(d["time_mask_max"]),
                freq_mask_max=int(d["freq_mask_max"]),
                median_window=int(d.get("median_window", 7)),
                gap_tolerance=float(d.get("gap_tolerance", 0.2)),
                thresholds=thresholds,
                psds_params=PsdsParams.from_dict(d["psds"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed preset: {exc}") from exc


def load_preset(name_or_path):
    """Load a shipped preset by name (``scenario1``/``scenario2``) or any YAML file."""
    if str(name_or_path) in SHIPPED:
        text = resources.files("sedpool").joinpath("data").joinpath(f"{name_or_path}.yaml").read_text()
    else:
        path = Path(name_or_path)
        if not path.is_file():
            raise ConfigError(f"unknown preset {name_or_path!r}; shipped presets are {', '.join(SHIPPED)}")
        text = path.read_text()
    return ScenarioPreset.from_dict(yaml.safe_load(text))


def save_preset(path, preset):
    Path(path).write_text(yaml.safe_dump(preset.to_dict(), sort_keys=False))


def output_resolution(preset, hop=HOP, sample_rate=SAMPLE_RATE):
    """``(time_factor, frame_duration_seconds)`` of the model output grid."""
    factor = preset.time_factor
    return factor, factor * hop / sample_rate


def time_chain(preset, n_frames):
    """Output frame count after the floor-division chain of time pools."""
    t = n_frames
    for kt, _ in preset.pool_specs:
        t //= kt
    return t
