"""
Primitive operations of the computation graph.

Each primitive provides a numpy forward and the vector-Jacobian product
for its differentiable inputs. Non-differentiable operands (masks, index
arrays, scalar constants) are passed as keyword attributes, never as
graph inputs.
"""
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

import os
import sys
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from core.exceptions import DomainError, ShapeError

MASK_FILL = -1e9
LOG_2PI = math.log(2.0 * math.pi)
_GELU_C = math.sqrt(2.0 / math.pi)


class Primitive:
    """Base class: subclasses implement forward and backward."""

    kind: str = ""
    arity: Optional[int] = None

    def check(self, inputs: Sequence[np.ndarray], **attrs) -> None:
        if self.arity is not None and len(inputs) != self.arity:
            raise ShapeError(f"{self.kind} expects {self.arity} inputs, got {len(inputs)}")

    def forward(self, inputs: Sequence[np.ndarray], **attrs) -> np.ndarray:
        raise NotImplementedError

    def backward(
        self,
        grad: np.ndarray,
        inputs: Sequence[np.ndarray],
        output: np.ndarray,
        **attrs,
    ) -> List[Optional[np.ndarray]]:
        raise NotImplementedError


PRIMITIVES: Dict[str, Primitive] = {}


def register(cls):
    PRIMITIVES[cls.kind] = cls()
    return cls


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_bias_compatible(kind: str, a: np.ndarray, b: np.ndarray) -> None:
    """Same shape, or b's shape is a trailing suffix of a's (bias broadcast)."""
    if a.shape == b.shape:
        return
    if b.ndim <= a.ndim and a.shape[a.ndim - b.ndim:] == b.shape:
        return
    raise ShapeError(f"{kind}: shapes {a.shape} and {b.shape} are not bias-compatible")


def _check_mask(kind: str, x: np.ndarray, mask: Optional[np.ndarray]) -> None:
    if mask is None:
        return
    try:
        np.broadcast_shapes(mask.shape, x.shape)
    except ValueError as e:
        raise ShapeError(f"{kind}: mask shape {mask.shape} does not broadcast to {x.shape}") from e


# Linear algebra

@register
class MatMul(Primitive):
    kind = "matmul"
    arity = 2

    def check(self, inputs, **attrs):
        super().check(inputs)
        a, b = inputs
        if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
            raise ShapeError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")
        try:
            np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
        except ValueError as e:
            raise ShapeError(f"matmul: batch dims {a.shape[:-2]} vs {b.shape[:-2]}") from e

    def forward(self, inputs, **attrs):
        return np.matmul(inputs[0], inputs[1])

    def backward(self, grad, inputs, output, **attrs):
        a, b = inputs
        ga = np.matmul(grad, np.swapaxes(b, -1, -2))
        gb = np.matmul(np.swapaxes(a, -1, -2), grad)
        return [unbroadcast(ga, a.shape), unbroadcast(gb, b.shape)]


@register
class Add(Primitive):
    kind = "add"
    arity = 2

    def check(self, inputs, **attrs):
        super().check(inputs)
        _check_bias_compatible(self.kind, *inputs)

    def forward(self, inputs, **attrs):
        return inputs[0] + inputs[1]

    def backward(self, grad, inputs, output, **attrs):
        return [grad, unbroadcast(grad, inputs[1].shape)]


@register
class Mul(Primitive):
    kind = "elementwise-mul"
    arity = 2

    def check(self, inputs, **attrs):
        super().check(inputs)
        _check_bias_compatible(self.kind, *inputs)

    def forward(self, inputs, **attrs):
        return inputs[0] * inputs[1]

    def backward(self, grad, inputs, output, **attrs):
        a, b = inputs
        return [grad * b, unbroadcast(grad * a, b.shape)]


@register
class ScalarAffine(Primitive):
    """y = scale * x + shift with python-float scale and shift."""

    kind = "scalar-affine"
    arity = 1

    def forward(self, inputs, scale: float = 1.0, shift: float = 0.0):
        return scale * inputs[0] + shift

    def backward(self, grad, inputs, output, scale: float = 1.0, shift: float = 0.0):
        return [scale * grad]


# Normalisation and activations

@register
class MaskedSoftmax(Primitive):
    """Softmax over the last axis; masked positions are exactly 0."""

    kind = "masked-softmax"
    arity = 1

    def check(self, inputs, mask=None, **attrs):
        super().check(inputs)
        _check_mask(self.kind, inputs[0], mask)

    def forward(self, inputs, mask=None):
        x = inputs[0]
        if mask is not None:
            x = np.where(mask, x, MASK_FILL)
        z = x - x.max(axis=-1, keepdims=True)
        e = np.exp(z)
        if mask is not None:
            e = np.where(mask, e, 0.0)
        return e / e.sum(axis=-1, keepdims=True)

    def backward(self, grad, inputs, output, mask=None):
        inner = (grad * output).sum(axis=-1, keepdims=True)
        return [output * (grad - inner)]


@register
class LayerNorm(Primitive):
    """Normalise the last axis, then scale by gamma and shift by beta."""

    kind = "layer-norm"
    arity = 3

    def check(self, inputs, **attrs):
        super().check(inputs)
        x, gamma, beta = inputs
        d = x.shape[-1]
        if gamma.shape != (d,) or beta.shape != (d,):
            raise ShapeError(f"layer-norm: gamma/beta must be ({d},), got {gamma.shape}, {beta.shape}")

    def forward(self, inputs, eps: float = 1e-5):
        x, gamma, beta = inputs
        mean = x.mean(axis=-1, keepdims=True)
        var = x.var(axis=-1, keepdims=True)
        xhat = (x - mean) / np.sqrt(var + eps)
        return xhat * gamma + beta

    def backward(self, grad, inputs, output, eps: float = 1e-5):
        x, gamma, beta = inputs
        d = x.shape[-1]
        mean = x.mean(axis=-1, keepdims=True)
        var = x.var(axis=-1, keepdims=True)
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = (x - mean) * inv_std
        g_xhat = grad * gamma
        gx = inv_std / d * (
            d * g_xhat
            - g_xhat.sum(axis=-1, keepdims=True)
            - xhat * (g_xhat * xhat).sum(axis=-1, keepdims=True)
        )
        reduce_axes = tuple(range(x.ndim - 1))
        g_gamma = (grad * xhat).sum(axis=reduce_axes)
        g_beta = grad.sum(axis=reduce_axes)
        return [gx, g_gamma, g_beta]


@register
class Gelu(Primitive):
    """Tanh-approximated GELU."""

    kind = "gelu"
    arity = 1

    def forward(self, inputs, **attrs):
        x = inputs[0]
        return 0.5 * x * (1.0 + np.tanh(_GELU_C * (x + 0.044715 * x ** 3)))

    def backward(self, grad, inputs, output, **attrs):
        x = inputs[0]
        u = _GELU_C * (x + 0.044715 * x ** 3)
        th = np.tanh(u)
        du = _GELU_C * (1.0 + 3 * 0.044715 * x ** 2)
        return [grad * (0.5 * (1.0 + th) + 0.5 * x * (1.0 - th ** 2) * du)]


@register
class Relu(Primitive):
    kind = "relu"
    arity = 1

    def forward(self, inputs, **attrs):
        return np.maximum(inputs[0], 0.0)

    def backward(self, grad, inputs, output, **attrs):
        return [grad * (inputs[0] > 0)]


@register
class Exp(Primitive):
    kind = "exp"
    arity = 1

    def forward(self, inputs, **attrs):
        return np.exp(inputs[0])

    def backward(self, grad, inputs, output, **attrs):
        return [grad * output]


@register
class Clip(Primitive):
    """Clamp to [low, high]; zero gradient outside the interval."""

    kind = "clip"
    arity = 1

    def forward(self, inputs, low: float = -np.inf, high: float = np.inf):
        return np.clip(inputs[0], low, high)

    def backward(self, grad, inputs, output, low: float = -np.inf, high: float = np.inf):
        x = inputs[0]
        return [grad * ((x >= low) & (x <= high))]


# Indexing and layout

@register
class EmbeddingGather(Primitive):
    """Rows of a 2-D table: out[...] = table[indices[...]]."""

    kind = "embedding-gather"
    arity = 1

    def check(self, inputs, indices=None, **attrs):
        super().check(inputs)
        table = inputs[0]
        if table.ndim != 2:
            raise ShapeError(f"embedding-gather: table must be 2-D, got {table.shape}")
        if indices is None:
            raise ShapeError("embedding-gather: indices are required")
        if indices.size and (indices.min() < 0 or indices.max() >= table.shape[0]):
            raise IndexError(
                f"embedding-gather: index out of range [0, {table.shape[0]})"
            )

    def forward(self, inputs, indices=None):
        return inputs[0][indices]

    def backward(self, grad, inputs, output, indices=None):
        table = inputs[0]
        g = np.zeros_like(table)
        np.add.at(g, indices.reshape(-1), grad.reshape(-1, table.shape[1]))
        return [g]


@register
class Concat(Primitive):
    """Concatenate along the last axis."""

    kind = "concat"

    def check(self, inputs, **attrs):
        if not inputs:
            raise ShapeError("concat: no inputs")
        lead = inputs[0].shape[:-1]
        for x in inputs[1:]:
            if x.shape[:-1] != lead:
                raise ShapeError(f"concat: leading dims {x.shape[:-1]} != {lead}")

    def forward(self, inputs, **attrs):
        return np.concatenate(inputs, axis=-1)

    def backward(self, grad, inputs, output, **attrs):
        splits = np.cumsum([x.shape[-1] for x in inputs])[:-1]
        return list(np.split(grad, splits, axis=-1))


@register
class Reshape(Primitive):
    kind = "reshape"
    arity = 1

    def check(self, inputs, shape=None, **attrs):
        super().check(inputs)
        if int(np.prod(shape)) != inputs[0].size:
            raise ShapeError(f"reshape: cannot view {inputs[0].shape} as {shape}")

    def forward(self, inputs, shape=None):
        return inputs[0].reshape(shape)

    def backward(self, grad, inputs, output, shape=None):
        return [grad.reshape(inputs[0].shape)]


@register
class Transpose(Primitive):
    kind = "transpose"
    arity = 1

    def check(self, inputs, axes=None, **attrs):
        super().check(inputs)
        if axes is not None and sorted(axes) != list(range(inputs[0].ndim)):
            raise ShapeError(f"transpose: axes {axes} invalid for rank {inputs[0].ndim}")

    def forward(self, inputs, axes=None):
        return np.ascontiguousarray(np.transpose(inputs[0], axes))

    def backward(self, grad, inputs, output, axes=None):
        if axes is None:
            return [np.transpose(grad)]
        return [np.transpose(grad, np.argsort(axes))]


# Reductions

@register
class Sum(Primitive):
    kind = "sum"
    arity = 1

    def forward(self, inputs, axis=None):
        return np.asarray(inputs[0].sum(axis=axis))

    def backward(self, grad, inputs, output, axis=None):
        x = inputs[0]
        if axis is not None:
            grad = np.expand_dims(grad, axis)
        return [np.broadcast_to(grad, x.shape).copy()]


@register
class Mean(Primitive):
    kind = "mean"
    arity = 1

    def forward(self, inputs, axis=None):
        return np.asarray(inputs[0].mean(axis=axis))

    def backward(self, grad, inputs, output, axis=None):
        x = inputs[0]
        count = x.size if axis is None else x.shape[axis]
        if axis is not None:
            grad = np.expand_dims(grad, axis)
        return [np.broadcast_to(grad / count, x.shape).copy()]


@register
class LogSumExp(Primitive):
    """Overflow-safe log-sum-exp over the last axis, optionally masked."""

    kind = "log-sum-exp"
    arity = 1

    def check(self, inputs, mask=None, **attrs):
        super().check(inputs)
        _check_mask(self.kind, inputs[0], mask)

    @staticmethod
    def _weights(x, mask):
        if mask is not None:
            x = np.where(mask, x, -np.inf)
        m = x.max(axis=-1, keepdims=True)
        e = np.exp(x - m)
        return m, e

    def forward(self, inputs, mask=None):
        m, e = self._weights(inputs[0], mask)
        return (m + np.log(e.sum(axis=-1, keepdims=True)))[..., 0]

    def backward(self, grad, inputs, output, mask=None):
        m, e = self._weights(inputs[0], mask)
        p = e / e.sum(axis=-1, keepdims=True)
        return [grad[..., None] * p]


# Densities

@register
class GaussianLogDensity(Primitive):
    """
    Log-density of an isotropic Gaussian per mixture component.

    x: (..., d), mu: (..., K, d), sigma: (..., K) -> (..., K)
    """

    kind = "gaussian-log-density"
    arity = 3

    def check(self, inputs, **attrs):
        super().check(inputs)
        x, mu, sigma = inputs
        if mu.shape[:-2] != x.shape[:-1] or mu.shape[-1] != x.shape[-1]:
            raise ShapeError(f"gaussian-log-density: x {x.shape} vs mu {mu.shape}")
        if sigma.shape != mu.shape[:-1]:
            raise ShapeError(f"gaussian-log-density: sigma {sigma.shape} vs mu {mu.shape}")
        if np.any(sigma <= 0):
            raise DomainError("gaussian-log-density: sigma must be positive")

    def forward(self, inputs, **attrs):
        x, mu, sigma = inputs
        d = x.shape[-1]
        diff = x[..., None, :] - mu
        sq = (diff * diff).sum(axis=-1)
        return -0.5 * d * LOG_2PI - d * np.log(sigma) - sq / (2.0 * sigma ** 2)

    def backward(self, grad, inputs, output, **attrs):
        x, mu, sigma = inputs
        d = x.shape[-1]
        diff = x[..., None, :] - mu
        sq = (diff * diff).sum(axis=-1)
        inv_var = 1.0 / sigma ** 2
        weighted = (grad * inv_var)[..., None] * diff
        gx = -weighted.sum(axis=-2)
        gmu = weighted
        gsigma = grad * (-d / sigma + sq / sigma ** 3)
        return [gx, gmu, gsigma]


def get_primitive(kind: str) -> Primitive:
    try:
        return PRIMITIVES[kind]
    except KeyError as e:
        raise ShapeError(f"unknown operation kind: {kind}") from e
