"""Neural building blocks: named parameter sets and the small set of layers
used by the encoders and policy heads (linear, MLP, GRU, LSTM, embedding)."""

from __future__ import annotations

import zlib

import numpy as np

from .core import Tensor, concat, embed_lookup, matmul, relu, sigmoid, slice_, tanh


class ParamSet:
    """Named parameter store.

    Each parameter is initialized from its own RNG stream derived from
    (seed, crc32(name)), so values do not depend on creation order. Names are
    slash-scoped, e.g. "policy/out/W".
    """

    def __init__(self, seed=0):
        self.seed = int(seed)
        self._params = {}

    def get_or_init(self, name, shape, init="glorot"):
        p = self._params.get(name)
        if p is not None:
            if p.data.shape != tuple(shape):
                raise ValueError(
                    f"parameter {name!r} exists with shape {p.data.shape}, requested {tuple(shape)}"
                )
            return p
        rng = np.random.default_rng(
            np.random.SeedSequence([self.seed, zlib.crc32(name.encode())])
        )
        if init == "glorot":
            fan_in = shape[0] if len(shape) > 1 else shape[0]
            fan_out = shape[-1]
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            data = rng.uniform(-limit, limit, size=shape)
        elif init == "zeros":
            data = np.zeros(shape)
        elif init == "ones":
            data = np.ones(shape)
        elif init == "normal":
            data = rng.normal(0.0, 0.1, size=shape)
        else:
            raise ValueError(f"unknown init {init!r}")
        p = Tensor(data, requires_grad=True)
        self._params[name] = p
        return p

    def __contains__(self, name):
        return name in self._params

    def __getitem__(self, name):
        return self._params[name]

    def named(self):
        """dict name -> Tensor, insertion-ordered."""
        return dict(self._params)

    def tensors(self):
        return list(self._params.values())

    def name_of(self, tensor):
        for name, p in self._params.items():
            if p is tensor:
                return name
        return None

    def gradients(self, tape, loss):
        """Backward pass returning name-keyed grads; params the loss never
        touched get zeros."""
        by_tensor = tape.gradients(loss, params=self._params.values())
        return {name: by_tensor[p] for name, p in self._params.items()}

    def load_values(self, arrays):
        """Overwrite parameter values from a name -> ndarray map. Unknown or
        missing names are errors; shapes must match."""
        missing = set(self._params) - set(arrays)
        extra = set(arrays) - set(self._params)
        if missing or extra:
            raise ValueError(f"parameter name mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for name, arr in arrays.items():
            p = self._params[name]
            if p.data.shape != arr.shape:
                raise ValueError(f"parameter {name!r}: shape {arr.shape} != {p.data.shape}")
            p.data = np.asarray(arr, dtype=np.float64).copy()

    def snapshot(self):
        return {name: p.data.copy() for name, p in self._params.items()}


class Linear:
    def __init__(self, params, name, n_in, n_out, bias=True):
        self.W = params.get_or_init(f"{name}/W", (n_in, n_out))
        self.b = params.get_or_init(f"{name}/b", (n_out,), init="zeros") if bias else None

    def __call__(self, x):
        out = matmul(x, self.W)
        if self.b is not None:
            out = out + self.b
        return out


class MLP:
    """Stack of linear layers with relu between them; final layer is linear
    unless final_activation is given."""

    def __init__(self, params, name, sizes, final_activation=None):
        self.layers = [
            Linear(params, f"{name}/l{i}", sizes[i], sizes[i + 1]) for i in range(len(sizes) - 1)
        ]
        self.final_activation = final_activation

    def __call__(self, x):
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = relu(x)
        if self.final_activation is not None:
            x = self.final_activation(x)
        return x


class GRUCell:
    """Gated recurrent unit. Update/reset gates share one matmul pair."""

    def __init__(self, params, name, n_in, n_hidden):
        self.n_hidden = n_hidden
        self.Wx_zr = params.get_or_init(f"{name}/Wx_zr", (n_in, 2 * n_hidden))
        self.Wh_zr = params.get_or_init(f"{name}/Wh_zr", (n_hidden, 2 * n_hidden))
        self.b_zr = params.get_or_init(f"{name}/b_zr", (2 * n_hidden,), init="zeros")
        self.Wx_n = params.get_or_init(f"{name}/Wx_n", (n_in, n_hidden))
        self.Wh_n = params.get_or_init(f"{name}/Wh_n", (n_hidden, n_hidden))
        self.b_n = params.get_or_init(f"{name}/b_n", (n_hidden,), init="zeros")

    def __call__(self, x, h):
        H = self.n_hidden
        axis = 0 if h.data.ndim == 1 else 1
        zr = sigmoid(matmul(x, self.Wx_zr) + matmul(h, self.Wh_zr) + self.b_zr)
        z = slice_(zr, 0, H, axis=axis)
        r = slice_(zr, H, 2 * H, axis=axis)
        n = tanh(matmul(x, self.Wx_n) + matmul(r * h, self.Wh_n) + self.b_n)
        return (1.0 - z) * n + z * h


class LSTMCell:
    """LSTM with combined gate matmul; forget-gate bias starts at 1."""

    def __init__(self, params, name, n_in, n_hidden):
        self.n_hidden = n_hidden
        self.Wx = params.get_or_init(f"{name}/Wx", (n_in, 4 * n_hidden))
        self.Wh = params.get_or_init(f"{name}/Wh", (n_hidden, 4 * n_hidden))
        fresh = f"{name}/b" not in params
        self.b = params.get_or_init(f"{name}/b", (4 * n_hidden,), init="zeros")
        if fresh:
            self.b.data[n_hidden : 2 * n_hidden] = 1.0

    def __call__(self, x, state):
        h, c = state
        H = self.n_hidden
        axis = 0 if h.data.ndim == 1 else 1
        gates = matmul(x, self.Wx) + matmul(h, self.Wh) + self.b
        i = sigmoid(slice_(gates, 0, H, axis=axis))
        f = sigmoid(slice_(gates, H, 2 * H, axis=axis))
        g = tanh(slice_(gates, 2 * H, 3 * H, axis=axis))
        o = sigmoid(slice_(gates, 3 * H, 4 * H, axis=axis))
        c_new = f * c + i * g
        h_new = o * tanh(c_new)
        return h_new, c_new

    def zero_state(self):
        return (
            Tensor(np.zeros(self.n_hidden)),
            Tensor(np.zeros(self.n_hidden)),
        )


class Embedding:
    def __init__(self, params, name, n, d):
        self.table = params.get_or_init(f"{name}/table", (n, d), init="normal")

    def __call__(self, ids):
        return embed_lookup(self.table, ids)


def concat_features(parts, axis=-1):
    """Concatenate a list of tensors along the feature axis."""
    if len(parts) == 1:
        return parts[0]
    return concat(parts, axis=axis)
