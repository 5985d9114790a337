"""
Functional wrappers over graph primitives.

Model code calls these instead of Graph.apply so the layer definitions
read like ordinary array code.
"""
from typing import List, Optional, Sequence

import numpy as np

from .graph import Graph, Var
from .tensor import Tensor


def forward_primitive(kind: str, inputs: Sequence[Tensor], **attrs) -> Tensor:
    """Evaluate one primitive on constant inputs in a throwaway graph."""
    graph = Graph()
    vars_ = [graph.constant(t.data if isinstance(t, Tensor) else t) for t in inputs]
    out = graph.apply(kind, vars_, **attrs)
    return graph.nodes[out.index].value


def matmul(a: Var, b: Var) -> Var:
    return a.graph.apply("matmul", [a, b])


def add(a: Var, b: Var) -> Var:
    return a.graph.apply("add", [a, b])


def mul(a: Var, b: Var) -> Var:
    return a.graph.apply("elementwise-mul", [a, b])


def affine(x: Var, scale: float = 1.0, shift: float = 0.0) -> Var:
    return x.graph.apply("scalar-affine", [x], scale=float(scale), shift=float(shift))


def sub(a: Var, b: Var) -> Var:
    return add(a, affine(b, -1.0))


def linear(x: Var, weight: Var, bias: Optional[Var] = None) -> Var:
    out = matmul(x, weight)
    return add(out, bias) if bias is not None else out


def masked_softmax(x: Var, mask: Optional[np.ndarray] = None) -> Var:
    return x.graph.apply("masked-softmax", [x], mask=mask)


def layer_norm(x: Var, gamma: Var, beta: Var, eps: float = 1e-5) -> Var:
    return x.graph.apply("layer-norm", [x, gamma, beta], eps=eps)


def gather(table: Var, indices: np.ndarray) -> Var:
    return table.graph.apply("embedding-gather", [table], indices=np.asarray(indices, dtype=np.int64))


def gelu(x: Var) -> Var:
    return x.graph.apply("gelu", [x])


def relu(x: Var) -> Var:
    return x.graph.apply("relu", [x])


def exp(x: Var) -> Var:
    return x.graph.apply("exp", [x])


def clip(x: Var, low: float, high: float) -> Var:
    return x.graph.apply("clip", [x], low=float(low), high=float(high))


def concat(xs: List[Var]) -> Var:
    return xs[0].graph.apply("concat", xs)


def reshape(x: Var, shape) -> Var:
    return x.graph.apply("reshape", [x], shape=tuple(int(s) for s in shape))


def transpose(x: Var, axes=None) -> Var:
    return x.graph.apply("transpose", [x], axes=None if axes is None else tuple(axes))


def sum_(x: Var, axis=None) -> Var:
    return x.graph.apply("sum", [x], axis=axis)


def mean(x: Var, axis=None) -> Var:
    return x.graph.apply("mean", [x], axis=axis)


def logsumexp(x: Var, mask: Optional[np.ndarray] = None) -> Var:
    return x.graph.apply("log-sum-exp", [x], mask=mask)


def gaussian_log_density(x: Var, mu: Var, sigma: Var) -> Var:
    return x.graph.apply("gaussian-log-density", [x, mu, sigma])


def take_rows(x: Var, rows: np.ndarray, cols: np.ndarray) -> Var:
    """x[rows[i], cols[i]] for a (B, N, ...) tensor, via a flattened gather."""
    b, n = x.shape[0], x.shape[1]
    rest = x.shape[2:]
    width = int(np.prod(rest)) if rest else 1
    flat = reshape(x, (b * n, width))
    out = gather(flat, np.asarray(rows) * n + np.asarray(cols))
    return reshape(out, (len(rows),) + tuple(rest)) if rest else reshape(out, (len(rows),))
