"""Parameter containers."""
import numpy as np

from ..errors import ConfigError, NumericalError


class Tensor:
    """A float64 array with an optional gradient buffer.

    ``trainable=False`` marks buffers such as batch-norm running statistics:
    they are saved, copied and averaged like weights but never optimized.
    """

    __slots__ = ("data", "grad", "trainable")

    def __init__(self, data, trainable=True):
        self.data = np.array(data, dtype=np.float64)
        self.grad = np.zeros_like(self.data) if trainable else None
        self.trainable = trainable

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        if self.grad is not None:
            self.grad.fill(0.0)

    def check_finite(self, name="tensor"):
        if not np.all(np.isfinite(self.data)):
            raise NumericalError(f"{name} contains non-finite values")

    def __repr__(self):
        kind = "param" if self.trainable else "buffer"
        return f"Tensor({kind}, shape={self.data.shape})"


class ParamSet:
    """Named tensors in insertion order."""

    def __init__(self):
        self._tensors = {}

    def add(self, name, tensor):
        if name in self._tensors:
            raise ConfigError(f"duplicate parameter name {name!r}")
        self._tensors[name] = tensor
        return tensor

    def __getitem__(self, name):
        return self._tensors[name]

    def __contains__(self, name):
        return name in self._tensors

    def __iter__(self):
        return iter(self._tensors)

    def __len__(self):
        return len(self._tensors)

    def items(self):
        return self._tensors.items()

    def names(self):
        return list(self._tensors)

    def trainable(self):
        return [(k, t) for k, t in self._tensors.items() if t.trainable]

    def zero_grad(self):
        for t in self._tensors.values():
            t.zero_grad()

    def copy(self):
        out = ParamSet()
        for name, t in self._tensors.items():
            out.add(name, Tensor(t.data.copy(), trainable=t.trainable))
        return out

    def load_state(self, state):
        """Copy arrays from a ``name -> ndarray`` mapping; names and shapes must match."""
        if set(state) != set(self._tensors):
            missing = set(self._tensors) - set(state)
            extra = set(state) - set(self._tensors)
            raise ConfigError(f"parameter names differ: missing {sorted(missing)}, extra {sorted(extra)}")
        for name, t in self._tensors.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != t.data.shape:
                raise ConfigError(f"{name}: shape {arr.shape} != {t.data.shape}")
            t.data[...] = arr

    def state(self):
        return {name: t.data for name, t in self._tensors.items()}

    def assert_compatible(self, other):
        if self.names() != other.names():
            raise ConfigError("parameter sets have different names or order")
        for name in self._tensors:
            if self[name].shape != other[name].shape:
                raise ConfigError(f"{name}: shape {self[name].shape} != {other[name].shape}")
