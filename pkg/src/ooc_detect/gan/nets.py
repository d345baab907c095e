"""Small fully connected networks with hand-written backprop (numpy only)."""

import numpy as np

from ..exceptions import ValidationError

_OUTPUTS = ("identity", "sigmoid")


def _sigmoid(a):
    # split by sign so exp never overflows
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    e = np.exp(a[~pos])
    out[~pos] = e / (1.0 + e)
    return out


class DenseNet:
    """tanh hidden layers followed by an identity or sigmoid output.

    Parameters are plain float64 arrays; instances are treated as values,
    and the training code always builds new nets instead of mutating.
    """

    def __init__(self, weights, biases, output="identity"):
        if output not in _OUTPUTS:
            raise ValidationError(f"output must be one of {_OUTPUTS}, got {output!r}")
        if len(weights) != len(biases) or not weights:
            raise ValidationError("need one bias vector per weight matrix")
        weights = [np.array(w, dtype=float) for w in weights]
        biases = [np.array(b, dtype=float).reshape(-1) for b in biases]
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.ndim != 2 or w.shape[1] != b.shape[0]:
                raise ValidationError(f"layer {i}: weight {w.shape} and bias {b.shape} disagree")
            if i and weights[i - 1].shape[1] != w.shape[0]:
                raise ValidationError(f"layer {i}: input size {w.shape[0]} != {weights[i - 1].shape[1]}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValidationError(f"layer {i}: non-finite parameters")
        self.weights = weights
        self.biases = biases
        self.output = output

    @classmethod
    def init(cls, sizes, rng, output="identity", scale=0.05):
        """Uniform(-scale, scale) initialization for layer ``sizes``."""
        sizes = [int(s) for s in sizes]
        if len(sizes) < 2 or min(sizes) < 1:
            raise ValidationError(f"bad layer sizes {sizes}")
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes, sizes[1:]):
            weights.append(rng.uniform(-scale, scale, size=(fan_in, fan_out)))
            biases.append(rng.uniform(-scale, scale, size=fan_out))
        return cls(weights, biases, output)

    @property
    def sizes(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def n_params(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def forward(self, X, return_cache=False):
        h = np.asarray(X, dtype=float)
        if h.ndim == 1:
            h = h.reshape(-1, 1)
        inputs = []
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            a = h @ w + b
            if i < last:
                h = np.tanh(a)
            else:
                h = _sigmoid(a) if self.output == "sigmoid" else a
        return (h, (inputs, h)) if return_cache else h

    __call__ = forward

    def backward(self, cache, grad_out):
        """Backprop ``dL/d(output)`` through the net.

        Returns ``(weight_grads, bias_grads, input_grad)``.
        """
        inputs, out = cache
        g = np.asarray(grad_out, dtype=float).reshape(out.shape)
        if self.output == "sigmoid":
            g = g * out * (1.0 - out)
        gw = [None] * len(self.weights)
        gb = [None] * len(self.weights)
        for i in range(len(self.weights) - 1, -1, -1):
            h_in = inputs[i]
            gw[i] = h_in.T @ g
            gb[i] = g.sum(axis=0)
            g = g @ self.weights[i].T
            if i > 0:
                # h_in = tanh(previous pre-activation)
                g = g * (1.0 - h_in * h_in)
        return gw, gb, g

    def flat_params(self):
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(self.weights, self.biases)])

    def with_flat_params(self, flat):
        flat = np.asarray(flat, dtype=float)
        if flat.size != self.n_params:
            raise ValidationError(f"expected {self.n_params} parameters, got {flat.size}")
        weights, biases, pos = [], [], 0
        for w, b in zip(self.weights, self.biases):
            weights.append(flat[pos:pos + w.size].reshape(w.shape))
            pos += w.size
            biases.append(flat[pos:pos + b.size].copy())
            pos += b.size
        return DenseNet(weights, biases, self.output)

    @staticmethod
    def flatten_grads(gw, gb):
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(gw, gb)])

    def stepped(self, gw, gb, lr):
        """New net with ``params + lr * grad``; pass a negative ``lr`` to descend."""
        return DenseNet(
            [w + lr * g for w, g in zip(self.weights, gw)],
            [b + lr * g for b, g in zip(self.biases, gb)],
            self.output,
        )

    def to_dict(self):
        return {
            "output": self.output,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(doc["weights"], doc["biases"], doc.get("output", "identity"))

    def __eq__(self, other):
        if not isinstance(other, DenseNet) or self.output != other.output:
            return NotImplemented if not isinstance(other, DenseNet) else False
        return (len(self.weights) == len(other.weights)
                and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
                and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases)))

    __hash__ = None

    def __repr__(self):
        return f"DenseNet(sizes={self.sizes}, output={self.output!r})"
