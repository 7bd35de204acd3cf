"""Reverse-mode differentiation over numpy arrays, plus the layers used to
build evidential regressors: MLPs, constrained output heads and Adam.

A :class:`Tensor` wraps a float64 array. Arithmetic on tensors records a
graph, and :meth:`Tensor.backward` walks it in reverse topological order,
accumulating gradients into every reachable :class:`Parameter`. Inside
``with no_grad():`` nothing is recorded, which is what inference uses.
"""

from __future__ import annotations

import contextlib
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, GraphConsumed, ShapeMismatch
from .nig import NIGParams
from .special import digamma, lgamma

CHECKPOINT_FORMAT_VERSION = 1
PARAM_FLOOR = 1e-6

_state = threading.local()


def _recording() -> bool:
    return getattr(_state, "enabled", True)


@contextlib.contextmanager
def no_grad():
    previous = _recording()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = previous


def _unbroadcast(grad, shape):
    # sum out axes that numpy broadcasting added or stretched
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _as_array(x):
    return np.asarray(x, dtype=np.float64)


def softplus_np(x):
    return np.logaddexp(0.0, x)


def sigmoid_np(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class Tensor:
    """A node in the computation graph."""

    __array_ufunc__ = None  # make ndarray <op> Tensor defer to Tensor

    def __init__(self, value, parents=(), backward=None):
        self.value = _as_array(value)
        self._parents = parents
        self._backward = backward
        self._consumed = False

    requires_grad = False

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Tensor(shape={self.value.shape})"

    def __len__(self):
        return len(self.value)

    @staticmethod
    def _make(value, parents, backward):
        if not _recording() or not any(
            isinstance(p, Tensor) and (p.requires_grad or p._parents) for p in parents
        ):
            return Tensor(value)
        return Tensor(value, parents, backward)

    def detach(self) -> "Tensor":
        return Tensor(self.value)

    # arithmetic ------------------------------------------------------------

    def __add__(self, other):
        other = _lift(other)
        return Tensor._make(
            self.value + other.value,
            (self, other),
            lambda g: (_unbroadcast(g, self.shape), _unbroadcast(g, other.shape)),
        )

    __radd__ = __add__

    def __neg__(self):
        return Tensor._make(-self.value, (self,), lambda g: (-g,))

    def __sub__(self, other):
        other = _lift(other)
        return Tensor._make(
            self.value - other.value,
            (self, other),
            lambda g: (_unbroadcast(g, self.shape), _unbroadcast(-g, other.shape)),
        )

    def __rsub__(self, other):
        return _lift(other) - self

    def __mul__(self, other):
        other = _lift(other)
        a, b = self.value, other.value
        return Tensor._make(
            a * b,
            (self, other),
            lambda g: (_unbroadcast(g * b, self.shape), _unbroadcast(g * a, other.shape)),
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _lift(other)
        a, b = self.value, other.value
        return Tensor._make(
            a / b,
            (self, other),
            lambda g: (
                _unbroadcast(g / b, self.shape),
                _unbroadcast(-g * a / (b * b), other.shape),
            ),
        )

    def __rtruediv__(self, other):
        return _lift(other) / self

    def __pow__(self, exponent):
        if isinstance(exponent, Tensor):
            raise TypeError("only constant exponents are supported")
        a = self.value
        return Tensor._make(
            a**exponent, (self,), lambda g: (g * exponent * a ** (exponent - 1),)
        )

    def __matmul__(self, other):
        other = _lift(other)
        a, b = self.value, other.value
        if a.ndim == 0 or b.ndim == 0 or a.shape[-1] != b.shape[0]:
            raise ShapeMismatch(f"cannot multiply shapes {a.shape} and {b.shape}")

        def backward(g):
            if a.ndim == 1:
                ga = g @ b.T
                gb = np.outer(a, g)
            else:
                ga = g @ b.T
                gb = a.T @ g
            return ga, gb

        return Tensor._make(a @ b, (self, other), backward)

    def __getitem__(self, index):
        shape = self.shape

        def backward(g):
            out = np.zeros(shape)
            np.add.at(out, index, g)
            return (out,)

        return Tensor._make(self.value[index], (self,), backward)

    # reductions and elementwise functions -------------------------------------

    def sum(self, axis=None):
        shape = self.shape

        def backward(g):
            if axis is not None:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return Tensor._make(self.value.sum(axis=axis), (self,), backward)

    def mean(self, axis=None):
        n = self.value.size if axis is None else self.value.shape[axis]
        return self.sum(axis=axis) * (1.0 / n)

    def log(self):
        a = self.value
        return Tensor._make(np.log(a), (self,), lambda g: (g / a,))

    def exp(self):
        out = np.exp(self.value)
        return Tensor._make(out, (self,), lambda g: (g * out,))

    def abs(self):
        a = self.value
        # sign(0) = 0 is the subgradient at the kink
        return Tensor._make(np.abs(a), (self,), lambda g: (g * np.sign(a),))

    def relu(self):
        a = self.value
        return Tensor._make(np.maximum(a, 0.0), (self,), lambda g: (g * (a > 0),))

    def tanh(self):
        out = np.tanh(self.value)
        return Tensor._make(out, (self,), lambda g: (g * (1.0 - out * out),))

    def softplus(self):
        a = self.value
        return Tensor._make(softplus_np(a), (self,), lambda g: (g * sigmoid_np(a),))

    def lgamma(self):
        a = self.value
        return Tensor._make(lgamma(a), (self,), lambda g: (g * digamma(a),))

    # graph traversal ----------------------------------------------------------

    def backward(self, grad=None, *, retain_graph: bool = False) -> None:
        """Accumulate d(self)/d(param) into ``.grad`` of every reachable parameter.

        Without ``retain_graph`` the recording is released afterwards and a
        second call raises :class:`GraphConsumed`.
        """
        if self._consumed:
            raise GraphConsumed("graph already released; run the forward pass again")
        if grad is None:
            if self.value.size != 1:
                raise ShapeMismatch("backward() without a seed needs a scalar output")
            grad = np.ones_like(self.value)

        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))

        grads = {id(self): _as_array(grad)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad:
                node.grad += g
            if node._backward is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if not (parent.requires_grad or parent._parents):
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + pg
                else:
                    grads[id(parent)] = pg

        if not retain_graph:
            for node in order:
                if node._parents:
                    node._parents = ()
                    node._backward = None
                    node._consumed = True


class Parameter(Tensor):
    """A trainable leaf tensor with a gradient buffer of the same shape."""

    requires_grad = True

    def __init__(self, value, name: str = ""):
        super().__init__(np.array(value, dtype=np.float64))
        self.grad = np.zeros_like(self.value)
        self.name = name

    def zero_grad(self):
        self.grad[...] = 0.0


def _lift(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def concat(tensors, axis=-1) -> Tensor:
    tensors = [_lift(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor._make(
        np.concatenate([t.value for t in tensors], axis=axis), tuple(tensors), backward
    )


# layers -------------------------------------------------------------------------

_ACTIVATIONS = {
    "relu": Tensor.relu,
    "tanh": Tensor.tanh,
    "identity": lambda t: t,
}


@dataclass(frozen=True)
class MLPSpec:
    input_dim: int
    hidden_dims: tuple = (100, 100, 100, 100)
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(d) for d in self.hidden_dims))
        if self.input_dim < 1 or any(d < 1 for d in self.hidden_dims):
            raise ConfigError("all layer sizes must be at least 1")
        if self.activation not in _ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")

    @property
    def output_dim(self) -> int:
        return self.hidden_dims[-1] if self.hidden_dims else self.input_dim


class Linear:
    def __init__(self, in_dim, out_dim, rng=None, name="linear", scale=None):
        if rng is None:
            w = np.zeros((in_dim, out_dim))
        else:
            # He initialisation
            std = np.sqrt(2.0 / in_dim) if scale is None else scale
            w = rng.normal(0.0, std, size=(in_dim, out_dim))
        self.weight = Parameter(w, f"{name}.weight")
        self.bias = Parameter(np.zeros(out_dim), f"{name}.bias")

    def __call__(self, x):
        return x @ self.weight + self.bias

    def parameters(self):
        return [self.weight, self.bias]


class MLP:
    """Stack of ``Linear -> activation`` layers; returns the last hidden layer."""

    def __init__(self, spec: MLPSpec, rng=None, name="mlp"):
        self.spec = spec
        dims = (spec.input_dim,) + spec.hidden_dims
        self.layers = [
            Linear(dims[i], dims[i + 1], rng, name=f"{name}.{i}") for i in range(len(dims) - 1)
        ]
        self._act = _ACTIVATIONS[spec.activation]

    def __call__(self, x):
        x = _lift(x)
        if x.value.ndim not in (1, 2) or x.shape[-1] != self.spec.input_dim:
            raise ShapeMismatch(
                f"expected input with {self.spec.input_dim} features, got shape {x.shape}"
            )
        for layer in self.layers:
            x = self._act(layer(x))
        return x

    def parameters(self):
        return [p for layer in self.layers for p in layer.parameters()]


def mlp_forward(net: MLP, x) -> Tensor:
    return net(x)


class EvidentialHead:
    """Four affine outputs mapped onto a valid NIG.

    delta is unconstrained; gamma, alpha - 1 and beta pass through softplus
    and a small floor so they stay strictly inside the domain.
    """

    def __init__(self, in_dim, rng=None, name="head"):
        self.linear = Linear(in_dim, 4, rng, name=name)

    def __call__(self, h) -> NIGParams:
        raw = self.linear(_lift(h))
        return evidential_transform(raw)

    def parameters(self):
        return self.linear.parameters()


def evidential_transform(raw) -> NIGParams:
    """Map raw outputs ``(..., 4)`` to constrained NIG fields."""
    raw = _lift(raw)
    delta = raw[..., 0]
    gamma = raw[..., 1].softplus() + PARAM_FLOOR
    alpha = raw[..., 2].softplus() + (1.0 + PARAM_FLOOR)
    beta = raw[..., 3].softplus() + PARAM_FLOOR
    return NIGParams(delta, gamma, alpha, beta)


class GaussianHead:
    """Mean and variance outputs for the Gaussian-likelihood baseline."""

    def __init__(self, in_dim, rng=None, name="gauss_head"):
        self.linear = Linear(in_dim, 2, rng, name=name)

    def __call__(self, h):
        raw = self.linear(_lift(h))
        return gaussian_transform(raw)

    def parameters(self):
        return self.linear.parameters()


def gaussian_transform(raw):
    raw = _lift(raw)
    return raw[..., 0], raw[..., 1].softplus() + PARAM_FLOOR


# optimisation -----------------------------------------------------------------


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("Adam betas must lie in [0, 1)")
        if self.eps <= 0:
            raise ConfigError("Adam epsilon must be positive")


def adam_step(state: AdamState, params) -> AdamState:
    """One bias-corrected Adam update in place; gradients are zeroed afterwards."""
    if not state.m:
        state.m = [np.zeros_like(p.value) for p in params]
        state.v = [np.zeros_like(p.value) for p in params]
    state.step += 1
    c1 = 1.0 - state.beta1**state.step
    c2 = 1.0 - state.beta2**state.step
    for p, m, v in zip(params, state.m, state.v):
        g = p.grad
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p.value -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p.zero_grad()
    return state


# checkpoints ------------------------------------------------------------------


def params_to_dict(params) -> dict:
    out = {}
    for p in params:
        if p.name in out:
            raise ConfigError(f"duplicate parameter name {p.name!r}")
        out[p.name] = {"shape": list(p.value.shape), "values": p.value.ravel().tolist()}
    return out


def load_params_from_dict(params, tensors: dict) -> None:
    for p in params:
        try:
            entry = tensors[p.name]
        except KeyError:
            raise ConfigError(f"checkpoint has no tensor {p.name!r}") from None
        if tuple(entry["shape"]) != p.value.shape:
            raise ShapeMismatch(f"{p.name}: checkpoint shape {entry['shape']} != {p.value.shape}")
        p.value[...] = np.asarray(entry["values"], dtype=np.float64).reshape(p.value.shape)


def write_json(path, document: dict) -> None:
    Path(path).write_text(json.dumps(document, indent=1, sort_keys=True) + "\n")


def read_checkpoint(path) -> dict:
    doc = json.loads(Path(path).read_text())
    if doc.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise ConfigError(f"unsupported checkpoint format {doc.get('format_version')!r}")
    return doc
