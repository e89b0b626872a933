"""Mean-teacher training: batch composition, augmentation, loss, Adam and the EMA teacher."""
import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, NumericalError, ShapeError
from .model import CONSISTENCY, TRAIN, Architecture, CrnnModel
from .presets import output_resolution

log = logging.getLogger(__name__)

PROB_CLAMP = 1e-7


@dataclass
class TrainConfig:
    epochs: int = 200
    batches_per_epoch: int = 250
    batch_split: tuple = (12, 12, 24)  # weak, strong, unlabeled
    lr_max: float = 0.001
    ramp_steps: int = 12500
    decay: float = 0.99995
    ema_decay: float = 0.999
    consistency_weight: float = 2.0
    mixup_prob: float = 0.5
    mixup_alpha: float = 0.2
    augment: bool = True
    seed: int = 0
    arch: Architecture = field(default_factory=Architecture)

    def __post_init__(self):
        self.batch_split = tuple(int(v) for v in self.batch_split)
        if len(self.batch_split) != 3 or min(self.batch_split) < 0 or sum(self.batch_split) == 0:
            raise ConfigError(f"batch_split must be three non-negative counts, got {self.batch_split}")
        if self.epochs < 1 or self.batches_per_epoch < 1 or self.ramp_steps < 0:
            raise ConfigError("epochs and batches_per_epoch must be positive, ramp_steps non-negative")
        if not 0.0 < self.decay <= 1.0 or not 0.0 <= self.ema_decay <= 1.0:
            raise ConfigError("decay must be in (0, 1] and ema_decay in [0, 1]")
        if self.lr_max <= 0 or self.consistency_weight < 0:
            raise ConfigError("lr_max must be positive and consistency_weight non-negative")
        if not 0.0 <= self.mixup_prob <= 1.0 or self.mixup_alpha <= 0:
            raise ConfigError("mixup_prob must be in [0, 1] and mixup_alpha positive")

    @property
    def batch_size(self):
        return sum(self.batch_split)

    def to_dict(self):
        d = asdict(self)
        d["batch_split"] = list(self.batch_split)
        d["arch"] = self.arch.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown training config keys: {sorted(unknown)}")
        d = dict(d)
        if "arch" in d:
            d["arch"] = Architecture.from_dict(d["arch"] or {})
        return cls(**d)

    @classmethod
    def load(cls, path):
        return cls.from_dict(yaml.safe_load(Path(path).read_text()) or {})


# -- schedules -----------------------------------------------------------------

def lr_schedule(step, lr_max=0.001, ramp_steps=12500, decay=0.99995):
    """Exponential ramp-up ``lr_max * exp(-5 (1 - step/ramp)^2)`` then multiplicative decay."""
    if step <= ramp_steps:
        if ramp_steps == 0:
            return lr_max
        x = step / ramp_steps
        return lr_max * float(np.exp(-5.0 * (1.0 - x) ** 2))
    return lr_max * decay ** (step - ramp_steps)


def ema_update(teacher, student, decay=0.999):
    """In place: ``t <- decay * t + (1 - decay) * s`` for every tensor, buffers included."""
    teacher.assert_compatible(student)
    for name, t in teacher.items():
        t.data *= decay
        t.data += (1.0 - decay) * student[name].data
    return teacher


# -- loss ----------------------------------------------------------------------

@dataclass
class Batch:
    """Features ``[B, 1, T, F]`` ordered weak, strong, unlabeled."""

    features: np.ndarray
    weak_labels: np.ndarray    # [n_weak, C]
    strong_labels: np.ndarray  # [n_strong, T', C]

    @property
    def n_weak(self):
        return self.weak_labels.shape[0]

    @property
    def n_strong(self):
        return self.strong_labels.shape[0]

    @property
    def weak_idx(self):
        return np.arange(self.n_weak)

    @property
    def strong_idx(self):
        return np.arange(self.n_weak, self.n_weak + self.n_strong)

    @property
    def unlabeled_idx(self):
        return np.arange(self.n_weak + self.n_strong, self.features.shape[0])

    def copy(self):
        return Batch(self.features.copy(), self.weak_labels.copy(), self.strong_labels.copy())


def _bce(p, y):
    """Mean binary cross entropy and its gradient with respect to ``p``."""
    if p.size == 0:
        return 0.0, np.zeros_like(p)
    pc = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    loss = -np.mean(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))
    inside = (p > PROB_CLAMP) & (p < 1.0 - PROB_CLAMP)
    grad = inside * (pc - y) / (pc * (1.0 - pc)) / p.size
    return float(loss), grad


def _mse(a, b):
    if a.size == 0:
        return 0.0, np.zeros_like(a)
    diff = a - b
    return float(np.mean(diff * diff)), 2.0 * diff / a.size


def compute_loss_and_grads(student_out, teacher_out, batch, consistency_weight=2.0):
    """Total loss, its parts and gradients with respect to the student's frame and clip outputs."""
    s_frame, s_clip = student_out
    t_frame, t_clip = teacher_out
    if s_frame.shape[1] != batch.strong_labels.shape[1] and batch.n_strong:
        raise ShapeError(
            f"strong labels have {batch.strong_labels.shape[1]} frames, model emits {s_frame.shape[1]}"
        )
    d_frame = np.zeros_like(s_frame)
    d_clip = np.zeros_like(s_clip)

    weak_bce, g = _bce(s_clip[batch.weak_idx], batch.weak_labels)
    d_clip[batch.weak_idx] += g
    strong_bce, g = _bce(s_frame[batch.strong_idx], batch.strong_labels)
    d_frame[batch.strong_idx] += g
    clip_mse, g = _mse(s_clip, t_clip)
    d_clip += consistency_weight * g
    frame_mse, g = _mse(s_frame, t_frame)
    d_frame += consistency_weight * g

    parts = {
        "weak_bce": weak_bce,
        "strong_bce": strong_bce,
        "clip_consistency": clip_mse,
        "frame_consistency": frame_mse,
    }
    total = weak_bce + strong_bce + consistency_weight * (clip_mse + frame_mse)
    return total, parts, d_frame, d_clip


def compute_loss(student_out, teacher_out, batch, consistency_weight=2.0):
    total, parts, _, _ = compute_loss_and_grads(student_out, teacher_out, batch, consistency_weight)
    return total, parts


# -- augmentation ----------------------------------------------------------------

def apply_masks(spec, t0, t_len, f0, f_len):
    """Zero ``spec[t0:t0+t_len, :]`` and ``spec[:, f0:f0+f_len]`` of a ``[T, F]`` map (copy)."""
    out = np.array(spec, dtype=np.float64, copy=True)
    out[t0:t0 + t_len, :] = 0.0
    out[:, f0:f0 + f_len] = 0.0
    return out


def time_freq_mask(spec, time_max, freq_max, rng):
    """One time mask and one frequency mask with lengths drawn uniformly from ``0..max``."""
    n_t, n_f = spec.shape
    t_len = int(rng.integers(0, min(time_max, n_t) + 1))
    f_len = int(rng.integers(0, min(freq_max, n_f) + 1))
    t0 = int(rng.integers(0, n_t - t_len + 1))
    f0 = int(rng.integers(0, n_f - f_len + 1))
    return apply_masks(spec, t0, t_len, f0, f_len)


def mix_batch(batch, lam, perms):
    """Convex combination ``lam * a + (1 - lam) * a[perm]`` within each subset.

    ``perms`` holds one permutation per subset (weak, strong, unlabeled),
    indexing positions inside that subset.  Unlabeled clips mix features only.
    """
    out = batch.copy()
    for idx, perm in zip((batch.weak_idx, batch.strong_idx, batch.unlabeled_idx), perms):
        out.features[idx] = lam * batch.features[idx] + (1.0 - lam) * batch.features[idx[perm]]
    w_perm, s_perm, _ = perms
    out.weak_labels = lam * batch.weak_labels + (1.0 - lam) * batch.weak_labels[w_perm]
    out.strong_labels = lam * batch.strong_labels + (1.0 - lam) * batch.strong_labels[s_perm]
    return out


def mixup(batch, rng, prob=0.5, alpha=0.2):
    """With probability ``prob`` mix the batch using ``lam ~ Beta(alpha, alpha)``.

    Returns ``(batch, lam)`` where ``lam`` is None when no mixing happened.
    """
    if rng.random() >= prob:
        return batch, None
    lam = float(rng.beta(alpha, alpha))
    perms = [rng.permutation(len(idx)) for idx in (batch.weak_idx, batch.strong_idx, batch.unlabeled_idx)]
    return mix_batch(batch, lam, perms), lam


# -- optimizer -------------------------------------------------------------------

class Adam:
    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {name: np.zeros_like(t.data) for name, t in params.trainable()}
        self.v = {name: np.zeros_like(t.data) for name, t in params.trainable()}

    def step(self, lr):
        bad = [name for name, t in self.params.trainable() if not np.all(np.isfinite(t.grad))]
        if bad:
            raise NumericalError(f"non-finite gradients in {', '.join(bad)} at step {self.t + 1}")
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, t in self.params.trainable():
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * t.grad
            v *= self.beta2
            v += (1.0 - self.beta2) * t.grad * t.grad
            t.data -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def adam_step(params, optimizer, lr):
    optimizer.step(lr)
    return params


# -- data --------------------------------------------------------------------------

@dataclass
class TrainingData:
    """In-memory pools of standardized ``[T, F]`` feature maps.

    ``weak``: list of ``(features, label_vector)``; ``strong``: list of
    ``(features, [(onset, offset, class_index), ...])``; ``unlabeled``: list of
    features.
    """

    weak: list
    strong: list
    unlabeled: list
    n_classes: int


def rasterize(events, n_frames, frame_duration, n_classes):
    """Frame ``j`` covers ``[j*d, (j+1)*d)`` and is positive iff it overlaps an event."""
    out = np.zeros((n_frames, n_classes))
    starts = np.arange(n_frames) * frame_duration
    ends = starts + frame_duration
    for onset, offset, k in events:
        out[(starts < offset) & (ends > onset), int(k)] = 1.0
    return out


def _fit_length(spec, n_frames):
    if spec.shape[0] >= n_frames:
        return spec[:n_frames]
    return np.pad(spec, ((0, n_frames - spec.shape[0]), (0, 0)))


class BatchSampler:
    def __init__(self, data, split, n_frames, frame_duration, out_frames, rng):
        for name, pool, k in zip(("weak", "strong", "unlabeled"),
                                 (data.weak, data.strong, data.unlabeled), split):
            if k and not pool:
                raise ConfigError(f"{name} pool is empty but the batch needs {k} clips from it")
        self.rng = rng
        self.split = split
        self.weak_x = np.stack([_fit_length(f, n_frames) for f, _ in data.weak]) if data.weak else None
        self.weak_y = np.stack([np.asarray(y, dtype=np.float64) for _, y in data.weak]) if data.weak else None
        self.strong_x = np.stack([_fit_length(f, n_frames) for f, _ in data.strong]) if data.strong else None
        self.strong_y = (
            np.stack([rasterize(ev, out_frames, frame_duration, data.n_classes) for _, ev in data.strong])
            if data.strong else None
        )
        self.unl_x = np.stack([_fit_length(f, n_frames) for f in data.unlabeled]) if data.unlabeled else None
        self.n_classes = data.n_classes
        self.out_frames = out_frames

    def _pick(self, n_pool, k):
        return self.rng.choice(n_pool, size=k, replace=n_pool < k)

    def sample(self):
        n_w, n_s, n_u = self.split
        xs = []
        weak_y = np.zeros((0, self.n_classes))
        strong_y = np.zeros((0, self.out_frames, self.n_classes))
        if n_w:
            i = self._pick(len(self.weak_x), n_w)
            xs.append(self.weak_x[i])
            weak_y = self.weak_y[i]
        if n_s:
            i = self._pick(len(self.strong_x), n_s)
            xs.append(self.strong_x[i])
            strong_y = self.strong_y[i]
        if n_u:
            xs.append(self.unl_x[self._pick(len(self.unl_x), n_u)])
        features = np.concatenate(xs)[:, None]
        return Batch(features, weak_y, strong_y)


# -- loop ----------------------------------------------------------------------------

@dataclass
class TrainResult:
    student: CrnnModel
    teacher: CrnnModel
    history: list  # one dict per epoch
    n_frames: int


def augment(batch, preset, config, rng):
    if not config.augment:
        return batch
    out = batch.copy()
    for b in range(out.features.shape[0]):
        out.features[b, 0] = time_freq_mask(out.features[b, 0], preset.time_mask_max,
                                            preset.freq_mask_max, rng)
    out, _ = mixup(out, rng, config.mixup_prob, config.mixup_alpha)
    return out


def train(config, data, preset, n_frames=None, on_step=None, metrics_path=None):
    """Train a student/teacher pair; the student is the model to use for prediction.

    ``on_step(step, student, teacher, parts)`` is called after every EMA update.
    """
    if not (data.weak or data.strong or data.unlabeled):
        raise ConfigError("all training pools are empty")
    if config.arch.n_classes != data.n_classes:
        raise ConfigError(f"model has {config.arch.n_classes} classes, data has {data.n_classes}")
    if n_frames is None:
        n_frames = max(f.shape[0] for f in
                       [f for f, _ in data.weak] + [f for f, _ in data.strong] + list(data.unlabeled))
    student = CrnnModel(preset, seed=config.seed, arch=config.arch)
    teacher = CrnnModel(preset, seed=config.seed, arch=config.arch)
    teacher.params.load_state(student.params.state())
    out_frames = student.output_frames(n_frames)
    _, frame_duration = output_resolution(preset)
    log.info("preset %s: output frame duration %.4f s, %d -> %d frames",
             preset.name, frame_duration, n_frames, out_frames)

    rng = np.random.default_rng(config.seed)
    sampler = BatchSampler(data, config.batch_split, n_frames, frame_duration, out_frames, rng)
    optimizer = Adam(student.params)
    history = []
    metrics_fh = open(metrics_path, "w") if metrics_path else None
    step = 0
    try:
        for epoch in range(config.epochs):
            sums = {}
            for _ in range(config.batches_per_epoch):
                batch = augment(sampler.sample(), preset, config, rng)
                s_out = student.forward(batch.features, TRAIN)
                t_out = teacher.forward(batch.features, CONSISTENCY)
                total, parts, d_frame, d_clip = compute_loss_and_grads(
                    s_out, t_out, batch, config.consistency_weight)
                student.params.zero_grad()
                student.backward(d_frame, d_clip)
                lr = lr_schedule(step, config.lr_max, config.ramp_steps, config.decay)
                optimizer.step(lr)
                ema_update(teacher.params, student.params, config.ema_decay)
                step += 1
                parts = dict(parts, total=total)
                for k, v in parts.items():
                    sums[k] = sums.get(k, 0.0) + v
                if on_step is not None:
                    on_step(step, student, teacher, parts)
            record = {"epoch": epoch, "step": step, "lr": lr}
            record.update({k: v / config.batches_per_epoch for k, v in sums.items()})
            history.append(record)
            log.info("epoch %d: loss %.4f lr %.3g", epoch, record["total"], lr)
            if metrics_fh:
                metrics_fh.write(json.dumps(record) + "\n")
                metrics_fh.flush()
    finally:
        if metrics_fh:
            metrics_fh.close()
    return TrainResult(student, teacher, history, n_frames)
