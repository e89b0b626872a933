"""Stateful layers wrapping the functional primitives.

A layer owns its tensors in ``self.params`` (short local names), caches what
its backward pass needs during ``forward`` and accumulates parameter
gradients into ``Tensor.grad`` during ``backward``.
"""
import numpy as np

from ..errors import InvalidInput
from . import functional as F
from .tensor import ParamSet, Tensor


def he_uniform(rng, shape, fan_in):
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Layer:
    def __init__(self):
        self.params = ParamSet()
        self._cache = None

    def forward(self, x, training=False):
        raise NotImplementedError

    def backward(self, dout):
        raise NotImplementedError

    def _accumulate(self, **grads):
        for name, g in grads.items():
            t = self.params[name]
            if t.grad is not None:
                t.grad += g


class Conv2d(Layer):
    def __init__(self, c_in, c_out, rng, need_input_grad=True):
        super().__init__()
        self.need_input_grad = need_input_grad
        self.w = self.params.add("weight", Tensor(he_uniform(rng, (c_out, c_in, 3, 3), c_in * 9)))
        self.b = self.params.add("bias", Tensor(np.zeros(c_out)))

    def forward(self, x, training=False):
        out, self._cache = F.conv2d_forward(x, self.w.data, self.b.data)
        return out

    def backward(self, dout):
        dx, dw, db = F.conv2d_backward(dout, self._cache, self.need_input_grad)
        self._accumulate(weight=dw, bias=db)
        return dx


class BatchNorm2d(Layer):
    def __init__(self, channels):
        super().__init__()
        self.gamma = self.params.add("gamma", Tensor(np.ones(channels)))
        self.beta = self.params.add("beta", Tensor(np.zeros(channels)))
        self.running_mean = self.params.add("running_mean", Tensor(np.zeros(channels), trainable=False))
        self.running_var = self.params.add("running_var", Tensor(np.ones(channels), trainable=False))
        # the teacher normalizes with batch statistics without touching its running stats
        self.update_stats = True

    def forward(self, x, training=False):
        out, self._cache = F.batch_norm_forward(
            x, self.gamma.data, self.beta.data,
            self.running_mean.data, self.running_var.data,
            training, update_stats=self.update_stats,
        )
        return out

    def backward(self, dout):
        dx, dgamma, dbeta = F.batch_norm_backward(dout, self._cache)
        self._accumulate(gamma=dgamma, beta=dbeta)
        return dx


class AvgPool2d(Layer):
    def __init__(self, kernel):
        super().__init__()
        self.kernel = tuple(kernel)

    def forward(self, x, training=False):
        out, self._cache = F.avg_pool_forward(x, self.kernel)
        return out

    def backward(self, dout):
        return F.avg_pool_backward(dout, self._cache)


class Dropout(Layer):
    def __init__(self, p, seed=0):
        super().__init__()
        if not 0.0 <= p < 1.0:
            raise InvalidInput(f"dropout rate must be in [0, 1), got {p}")
        self.p = p
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    def reseed(self, seed=None):
        self.rng = np.random.default_rng(self.seed if seed is None else seed)

    def forward(self, x, training=False):
        out, self._cache = F.dropout_forward(x, self.p, training, self.rng)
        return out

    def backward(self, dout):
        return F.dropout_backward(dout, self._cache)


class ReLU(Layer):
    def forward(self, x, training=False):
        out, self._cache = F.relu_forward(x)
        return out

    def backward(self, dout):
        return F.relu_backward(dout, self._cache)


class Sigmoid(Layer):
    def forward(self, x, training=False):
        out, self._cache = F.sigmoid_forward(x)
        return out

    def backward(self, dout):
        return F.sigmoid_backward(dout, self._cache)


class Dense(Layer):
    def __init__(self, d_in, d_out, rng):
        super().__init__()
        self.w = self.params.add("weight", Tensor(he_uniform(rng, (d_in, d_out), d_in)))
        self.b = self.params.add("bias", Tensor(np.zeros(d_out)))

    def forward(self, x, training=False):
        out, self._cache = F.dense_forward(x, self.w.data, self.b.data)
        return out

    def backward(self, dout):
        dx, dw, db = F.dense_backward(dout, self._cache)
        self._accumulate(weight=dw, bias=db)
        return dx


class BiGRU(Layer):
    """Stacked bidirectional GRU; each layer outputs ``[forward | backward]`` of width ``2H``.

    Parameters are named ``l{k}.{fwd|bwd}.{w_ih,w_hh,bias}``.
    """

    def __init__(self, d_in, hidden, rng, n_layers=2):
        super().__init__()
        self.hidden = hidden
        self.n_layers = n_layers
        bound = 1.0 / np.sqrt(hidden)
        width = d_in
        for k in range(n_layers):
            for direction in ("fwd", "bwd"):
                prefix = f"l{k}.{direction}"
                self.params.add(f"{prefix}.w_ih", Tensor(rng.uniform(-bound, bound, (3 * hidden, width))))
                self.params.add(f"{prefix}.w_hh", Tensor(rng.uniform(-bound, bound, (3 * hidden, hidden))))
                self.params.add(f"{prefix}.bias", Tensor(rng.uniform(-bound, bound, 3 * hidden)))
            width = 2 * hidden

    def _weights(self, k, direction):
        p = f"l{k}.{direction}"
        return self.params[f"{p}.w_ih"], self.params[f"{p}.w_hh"], self.params[f"{p}.bias"]

    def forward(self, x, training=False):
        caches = []
        h = x
        for k in range(self.n_layers):
            w_ih, w_hh, b = self._weights(k, "fwd")
            out_f, cache_f = F.gru_forward(h, w_ih.data, w_hh.data, b.data)
            w_ih, w_hh, b = self._weights(k, "bwd")
            out_b, cache_b = F.gru_forward(h[:, ::-1], w_ih.data, w_hh.data, b.data)
            h = np.concatenate([out_f, out_b[:, ::-1]], axis=2)
            caches.append((cache_f, cache_b))
        self._cache = caches
        return h

    def backward(self, dout):
        hid = self.hidden
        for k in reversed(range(self.n_layers)):
            cache_f, cache_b = self._cache[k]
            dx_f, dw_ih, dw_hh, db = F.gru_backward(dout[:, :, :hid], cache_f)
            self._accumulate_dir(k, "fwd", dw_ih, dw_hh, db)
            dx_b, dw_ih, dw_hh, db = F.gru_backward(np.ascontiguousarray(dout[:, ::-1, hid:]), cache_b)
            self._accumulate_dir(k, "bwd", dw_ih, dw_hh, db)
            dout = dx_f + dx_b[:, ::-1]
        return dout

    def _accumulate_dir(self, k, direction, dw_ih, dw_hh, db):
        for t, g in zip(self._weights(k, direction), (dw_ih, dw_hh, db)):
            if t.grad is not None:
                t.grad += g
