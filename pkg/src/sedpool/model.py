"""Seven-block CNN + two-layer BiGRU + sigmoid classifier with linear-softmax clip pooling."""
from dataclasses import dataclass

import numpy as np

from .audio import N_MELS
from .errors import ConfigError, ShapeError
from .nn import AvgPool2d, BatchNorm2d, BiGRU, Conv2d, Dense, Dropout, ParamSet, ReLU
from .nn.functional import sigmoid_backward, sigmoid_forward

CHANNELS = (16, 32, 64, 128, 128, 128, 128)
GRU_HIDDEN = 128
N_CLASSES = 10
DROPOUT = 0.33
POOL_EPS = 1e-7

# forward modes
TRAIN = "train"          # batch statistics (updating running stats), dropout active
EVAL = "eval"            # running statistics, no dropout
CONSISTENCY = "consistency"  # batch statistics without updating running stats, no dropout
MODES = (TRAIN, EVAL, CONSISTENCY)


def linear_softmax_pool(frame_probs):
    """Clip probability ``sum_t p^2 / (sum_t p + eps)`` over axis 1 of ``[B, T, C]``."""
    s = frame_probs.sum(axis=1)
    return (frame_probs ** 2).sum(axis=1) / (s + POOL_EPS)


def linear_softmax_pool_backward(d_clip, frame_probs):
    s = frame_probs.sum(axis=1, keepdims=True) + POOL_EPS
    q = (frame_probs ** 2).sum(axis=1, keepdims=True)
    return d_clip[:, None, :] * (2.0 * frame_probs * s - q) / (s * s)


@dataclass
class Architecture:
    """Everything besides the preset needed to rebuild a model from a checkpoint."""

    channels: tuple = CHANNELS
    hidden: int = GRU_HIDDEN
    n_classes: int = N_CLASSES
    dropout: float = DROPOUT

    def to_dict(self):
        return {"channels": list(self.channels), "hidden": self.hidden,
                "n_classes": self.n_classes, "dropout": self.dropout}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d.get("channels", CHANNELS)), int(d.get("hidden", GRU_HIDDEN)),
                   int(d.get("n_classes", N_CLASSES)), float(d.get("dropout", DROPOUT)))


class CrnnModel:
    def __init__(self, preset, seed=0, arch=None):
        arch = arch or Architecture()
        if len(arch.channels) != 7:
            raise ConfigError(f"channel plan needs 7 entries, got {len(arch.channels)}")
        self.preset = preset
        self.arch = arch
        self.params = ParamSet()
        rng = np.random.default_rng(seed)
        self.blocks = []
        c_in = 1
        for i, (c_out, pool) in enumerate(zip(arch.channels, preset.pool_specs)):
            block = [
                Conv2d(c_in, c_out, rng, need_input_grad=i > 0),
                BatchNorm2d(c_out),
                ReLU(),
                Dropout(arch.dropout, seed=(seed, i)),
                AvgPool2d(pool),
            ]
            for name, layer in zip(("conv", "bn"), block[:2]):
                self._register(f"cnn.{i}.{name}", layer)
            self.blocks.append(block)
            c_in = c_out
        self.rnn = BiGRU(c_in, arch.hidden, rng, n_layers=2)
        self._register("rnn", self.rnn)
        self.dense = Dense(2 * arch.hidden, arch.n_classes, rng)
        self._register("dense", self.dense)
        self._cache = None

    def _register(self, prefix, layer):
        for name, tensor in layer.params.items():
            self.params.add(f"{prefix}.{name}", tensor)

    @property
    def batch_norms(self):
        return [block[1] for block in self.blocks]

    @property
    def dropouts(self):
        return [block[3] for block in self.blocks]

    def output_frames(self, n_frames):
        t = n_frames
        for kt, _ in self.preset.pool_specs:
            if t < kt:
                raise ShapeError(
                    f"{n_frames} input frames are too few for time pooling {self.preset.pool_specs}"
                )
            t //= kt
        return t

    def forward(self, x, mode=EVAL):
        """``x [B, 1, T, 128]`` -> ``(frame_probs [B, T', C], clip_probs [B, C])``."""
        if mode not in MODES:
            raise ConfigError(f"unknown forward mode {mode!r}")
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 4 or x.shape[1] != 1 or x.shape[3] != N_MELS:
            raise ShapeError(f"expected input [B, 1, T, {N_MELS}], got {x.shape}")
        self.output_frames(x.shape[2])
        training = mode != EVAL
        for bn in self.batch_norms:
            bn.update_stats = mode == TRAIN
        h = x
        for conv, bn, relu, drop, pool in self.blocks:
            h = conv.forward(h, training)
            h = bn.forward(h, training)
            h = relu.forward(h, training)
            h = drop.forward(h, mode == TRAIN)
            h = pool.forward(h, training)
        if h.shape[3] != 1:
            raise ShapeError(f"frequency axis has extent {h.shape[3]} after the last block")
        seq = h[:, :, :, 0].transpose(0, 2, 1)  # [B, T', C]
        seq = self.rnn.forward(seq, training)
        logits = self.dense.forward(seq, training)
        frame_probs, sig_cache = sigmoid_forward(logits)
        clip_probs = linear_softmax_pool(frame_probs)
        self._cache = (frame_probs, sig_cache, h.shape)
        return frame_probs, clip_probs

    def backward(self, d_frame, d_clip):
        """Accumulate parameter gradients for upstream gradients on both outputs."""
        frame_probs, sig_cache, pooled_shape = self._cache
        d_probs = d_frame + linear_softmax_pool_backward(d_clip, frame_probs)
        d = sigmoid_backward(d_probs, sig_cache)
        d = self.dense.backward(d)
        d = self.rnn.backward(d)
        d = d.transpose(0, 2, 1)[:, :, :, None]
        for conv, bn, relu, drop, pool in reversed(self.blocks):
            d = pool.backward(d)
            d = drop.backward(d)
            d = relu.backward(d)
            d = bn.backward(d)
            d = conv.backward(d)
        return d


def build(preset, seed=0, arch=None):
    return CrnnModel(preset, seed=seed, arch=arch)
