"""Central finite-difference gradient checking for layers."""
import numpy as np

from ..errors import NumericalError


def _loss(layer, x, training):
    if hasattr(layer, "reseed"):
        layer.reseed()
    return float(np.sum(layer.forward(x, training=training)))


def check_gradients(layer, x, h=1e-5, training=True):
    """Compare analytic gradients of ``sum(layer(x))`` against central differences.

    Returns the maximum over every input element and trainable parameter
    element of ``|analytic - numeric| / max(1, |analytic|)``.
    """
    x = np.array(x, dtype=np.float64)
    layer.params.zero_grad()
    if hasattr(layer, "reseed"):
        layer.reseed()
    out = layer.forward(x, training=training)
    if not np.all(np.isfinite(out)):
        raise NumericalError("layer output is not finite")
    dx = layer.backward(np.ones_like(out))

    targets = [(x, dx)]
    targets += [(t.data, t.grad.copy()) for _, t in layer.params.trainable()]

    worst = 0.0
    for values, analytic in targets:
        flat = values.reshape(-1)
        flat_grad = analytic.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            plus = _loss(layer, x, training)
            flat[i] = orig - h
            minus = _loss(layer, x, training)
            flat[i] = orig
            numeric = (plus - minus) / (2.0 * h)
            if not (np.isfinite(numeric) and np.isfinite(flat_grad[i])):
                raise NumericalError("non-finite gradient encountered during check")
            err = abs(flat_grad[i] - numeric) / max(1.0, abs(flat_grad[i]))
            worst = max(worst, err)
    return worst
