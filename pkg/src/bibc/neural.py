"""Minimal dense-network engine on numpy float64: two-hidden-layer MLPs with
optional side input, manual backprop through to inputs, bias-corrected Adam
with stepwise learning-rate decay, target-network utilities, and a flat
binary checkpoint format.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, StateError


def next_pow2(x):
    """Smallest power of two >= x."""
    if x < 1:
        raise ParameterError(f"need a positive size, got {x}")
    p = 1
    while p < x:
        p *= 2
    return p


def hidden_for(dim):
    """Hidden widths used throughout: two layers at the next power of two."""
    w = next_pow2(dim)
    return (w, w)


@dataclass(frozen=True)
class Head:
    """Output head: a linear map, optionally squashed by tanh.

    init_scale overrides the fan-in weight bound (small heads keep the first
    policy outputs near zero). bias_init, when set, pins the initial bias to
    a constant instead of a random draw (used to start a stochastic policy
    at a chosen spread).
    """

    dim: int
    kind: str = "linear"
    init_scale: float = None
    bias_init: float = None

    def __post_init__(self):
        if self.dim < 1:
            raise ParameterError(f"head dim must be positive, got {self.dim}")
        if self.kind not in ("linear", "tanh"):
            raise ParameterError(f"head kind must be 'linear' or 'tanh', got {self.kind!r}")


@dataclass
class Gradients:
    """Backprop result: gradients aligned with Mlp.params, plus gradients with
    respect to the main input and the side input (None when absent)."""

    params: list
    x_grad: np.ndarray
    side_grad: np.ndarray


class Mlp:
    """Fully connected net: in_dim -> hidden[0] -> hidden[1] -> heads.

    side_dim > 0 concatenates an extra input after the first hidden layer
    (used by action-value critics that inject the action mid-network).
    activation is 'relu' or 'tanh' and applies to hidden layers only.
    """

    def __init__(self, in_dim, hidden, heads, activation, rng, side_dim=0):
        if activation not in ("relu", "tanh"):
            raise ParameterError(f"activation must be 'relu' or 'tanh', got {activation!r}")
        if len(hidden) < 1:
            raise ParameterError("need at least one hidden layer")
        if not heads:
            raise ParameterError("need at least one head")
        self.in_dim = int(in_dim)
        self.hidden = tuple(int(h) for h in hidden)
        self.heads = tuple(heads)
        self.activation = activation
        self.side_dim = int(side_dim)
        self._w = []
        self._b = []
        fan = self.in_dim
        for i, width in enumerate(self.hidden):
            if i == 1:
                fan += self.side_dim
            bound = 1.0 / np.sqrt(fan)
            self._w.append(rng.uniform(-bound, bound, size=(fan, width)))
            self._b.append(rng.uniform(-bound, bound, size=width))
            fan = width
        self._hw = []
        self._hb = []
        for head in self.heads:
            bound = head.init_scale if head.init_scale is not None else 1.0 / np.sqrt(fan)
            self._hw.append(rng.uniform(-bound, bound, size=(fan, head.dim)))
            if head.bias_init is not None:
                self._hb.append(np.full(head.dim, float(head.bias_init)))
            else:
                self._hb.append(rng.uniform(-bound, bound, size=head.dim))
        self._cache = None

    # ---------------------------------------------------------------- params

    @property
    def params(self):
        """Flat parameter list: layer weights and biases, then head pairs."""
        out = []
        for w, b in zip(self._w, self._b):
            out.extend((w, b))
        for w, b in zip(self._hw, self._hb):
            out.extend((w, b))
        return out

    def set_params(self, values):
        current = self.params
        if len(values) != len(current):
            raise ParameterError(
                f"expected {len(current)} parameter arrays, got {len(values)}")
        for dst, src in zip(current, values):
            if dst.shape != src.shape:
                raise ParameterError(
                    f"parameter shape mismatch: {dst.shape} vs {src.shape}")
            dst[...] = src

    def clone(self):
        other = object.__new__(Mlp)
        other.in_dim = self.in_dim
        other.hidden = self.hidden
        other.heads = self.heads
        other.activation = self.activation
        other.side_dim = self.side_dim
        other._w = [w.copy() for w in self._w]
        other._b = [b.copy() for b in self._b]
        other._hw = [w.copy() for w in self._hw]
        other._hb = [b.copy() for b in self._hb]
        other._cache = None
        return other

    # --------------------------------------------------------------- forward

    def _act(self, z):
        if self.activation == "relu":
            return np.maximum(z, 0.0)
        return np.tanh(z)

    def _act_grad(self, z, a):
        if self.activation == "relu":
            return (z > 0.0).astype(float)
        return 1.0 - a * a

    def forward(self, x, side=None, remember=False):
        """Run the net; returns one output array per head (batched if x is).

        remember=True caches activations for a following backward call.
        """
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.shape[1] != self.in_dim:
            raise ParameterError(
                f"input width {x.shape[1]} does not match in_dim {self.in_dim}")
        if self.side_dim:
            if side is None:
                raise ParameterError("net was built with side_dim but no side given")
            side = np.asarray(side, dtype=float)
            if side.ndim == 1:
                side = side[None, :]
            if side.shape != (x.shape[0], self.side_dim):
                raise ParameterError(
                    f"side must have shape ({x.shape[0]}, {self.side_dim}), got {side.shape}")
        elif side is not None:
            raise ParameterError("net was built without side_dim")
        inputs, pres, acts = [], [], []
        a = x
        for i, (w, b) in enumerate(zip(self._w, self._b)):
            if i == 1 and self.side_dim:
                a = np.concatenate([a, side], axis=1)
            inputs.append(a)
            z = a @ w + b
            a = self._act(z)
            pres.append(z)
            acts.append(a)
        outs = []
        for head, w, b in zip(self.heads, self._hw, self._hb):
            z = a @ w + b
            outs.append(np.tanh(z) if head.kind == "tanh" else z)
        if remember:
            self._cache = (single, inputs, pres, acts, outs)
        if single:
            return [o[0] for o in outs]
        return outs

    # -------------------------------------------------------------- backward

    def backward(self, head_grads):
        """Backprop gradients of a scalar loss through the cached forward.

        head_grads holds one array per head (d loss / d head output); pass
        None for heads that do not contribute.
        """
        if self._cache is None:
            raise StateError("call forward(..., remember=True) before backward")
        single, inputs, pres, acts, outs = self._cache
        self._cache = None
        batch = inputs[0].shape[0]
        if len(head_grads) != len(self.heads):
            raise ParameterError(
                f"expected {len(self.heads)} head gradients, got {len(head_grads)}")
        top = acts[-1]
        ga = np.zeros_like(top)
        hw_g, hb_g = [], []
        for head, w, out, g in zip(self.heads, self._hw, outs, head_grads):
            if g is None:
                hw_g.append(np.zeros_like(w))
                hb_g.append(np.zeros(head.dim))
                continue
            g = np.asarray(g, dtype=float)
            if g.ndim == 1 and single:
                g = g[None, :]
            if g.shape != (batch, head.dim):
                raise ParameterError(
                    f"head gradient must have shape ({batch}, {head.dim}), got {g.shape}")
            gz = g * (1.0 - out * out) if head.kind == "tanh" else g
            hw_g.append(top.T @ gz)
            hb_g.append(gz.sum(axis=0))
            ga = ga + gz @ w.T
        w_g = [None] * len(self._w)
        b_g = [None] * len(self._b)
        side_grad = None
        for i in range(len(self._w) - 1, -1, -1):
            gz = ga * self._act_grad(pres[i], acts[i])
            w_g[i] = inputs[i].T @ gz
            b_g[i] = gz.sum(axis=0)
            ga = gz @ self._w[i].T
            if i == 1 and self.side_dim:
                side_grad = ga[:, -self.side_dim:]
                ga = ga[:, :-self.side_dim]
        params = []
        for w, b in zip(w_g, b_g):
            params.extend((w, b))
        for w, b in zip(hw_g, hb_g):
            params.extend((w, b))
        x_grad = ga
        if single:
            x_grad = x_grad[0]
            if side_grad is not None:
                side_grad = side_grad[0]
        return Gradients(params=params, x_grad=x_grad, side_grad=side_grad)


class Adam(object):
    """Bias-corrected Adam over a parameter list, with a per-step learning
    rate decay applied after each update.

    decay_mode 'complement' multiplies the rate by (1 - decay) each step;
    'literal' multiplies by the decay constant itself.
    """

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8,
                 decay=1e-5, decay_mode="complement"):
        if decay_mode not in ("complement", "literal"):
            raise ParameterError(
                f"decay_mode must be 'complement' or 'literal', got {decay_mode!r}")
        self.params = list(params)
        self.lr = float(lr)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.decay = decay
        self.decay_mode = decay_mode
        self.t = 0
        self._m = [np.zeros_like(p) for p in self.params]
        self._v = [np.zeros_like(p) for p in self.params]

    def step(self, grads):
        if len(grads) != len(self.params):
            raise ParameterError(
                f"expected {len(self.params)} gradients, got {len(grads)}")
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self._m, self._v):
            if g.shape != p.shape:
                raise ParameterError(
                    f"gradient shape {g.shape} does not match parameter {p.shape}")
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        if self.decay_mode == "complement":
            self.lr *= 1.0 - self.decay
        else:
            self.lr *= self.decay


def soft_update(target, online, tau):
    """Polyak averaging in place: target <- tau * online + (1 - tau) * target."""
    if not 0.0 < tau <= 1.0:
        raise ParameterError(f"tau must lie in (0, 1], got {tau}")
    for t, o in zip(target, online):
        t *= 1.0 - tau
        t += tau * o


class NetPair:
    """An online net with its target twin (clone at creation)."""

    def __init__(self, online):
        self.online = online
        self.target = online.clone()

    def soft(self, tau):
        soft_update(self.target.params, self.online.params, tau)

    def hard_sync(self):
        self.target.set_params(self.online.params)


def save_params(path, arrays):
    """Write float64 arrays to a flat little-endian file.

    Layout: uint64 array count; per array, uint64 ndim then uint64 dims;
    then every array's float64 data back to back in C order.
    """
    arrays = [np.ascontiguousarray(a, dtype=float) for a in arrays]
    header = [len(arrays)]
    for a in arrays:
        header.append(a.ndim)
        header.extend(a.shape)
    with open(path, "wb") as fh:
        fh.write(np.asarray(header, dtype="<u8").tobytes())
        for a in arrays:
            fh.write(a.astype("<f8").tobytes())


def load_params(path):
    """Read arrays written by save_params."""
    with open(path, "rb") as fh:
        raw = fh.read()
    count = int(np.frombuffer(raw, dtype="<u8", count=1, offset=0)[0])
    offset = 8
    shapes = []
    for _ in range(count):
        ndim = int(np.frombuffer(raw, dtype="<u8", count=1, offset=offset)[0])
        offset += 8
        dims = np.frombuffer(raw, dtype="<u8", count=ndim, offset=offset)
        offset += 8 * ndim
        shapes.append(tuple(int(d) for d in dims))
    arrays = []
    for shape in shapes:
        size = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(raw, dtype="<f8", count=size, offset=offset)
        offset += 8 * size
        arrays.append(data.reshape(shape).copy())
    if offset != len(raw):
        raise ParameterError(
            f"checkpoint has {len(raw) - offset} trailing bytes")
    return arrays
