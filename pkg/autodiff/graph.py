"""
Computation graph with reverse-mode differentiation.

A Graph records every forward primitive as a node in creation order, so
the node list is topologically sorted by construction. `backward` walks
it once in reverse. Parameters are bound by name from a ParameterStore;
a fresh graph is built for every forward pass and the store is shared.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

import os
import sys
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from core.exceptions import ShapeError
from .primitives import get_primitive
from .tensor import Tensor, ensure_finite

logger = logging.getLogger(__name__)


@dataclass
class Node:
    """One recorded operation."""
    kind: str
    inputs: Tuple[int, ...]
    value: Tensor
    attrs: Dict[str, Any] = field(default_factory=dict)
    requires_grad: bool = False
    param_name: Optional[str] = None


class Var:
    """Handle to a graph node; supports a few operator shortcuts."""

    __slots__ = ("graph", "index")

    def __init__(self, graph: "Graph", index: int):
        self.graph = graph
        self.index = index

    @property
    def value(self) -> np.ndarray:
        return self.graph.nodes[self.index].value.data

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.graph.nodes[self.index].value.shape

    def __add__(self, other: "Var") -> "Var":
        return self.graph.apply("add", [self, other])

    def __mul__(self, other: "Var") -> "Var":
        return self.graph.apply("elementwise-mul", [self, other])

    def __matmul__(self, other: "Var") -> "Var":
        return self.graph.apply("matmul", [self, other])

    def __repr__(self) -> str:
        node = self.graph.nodes[self.index]
        return f"Var(#{self.index} {node.kind} shape={node.value.shape})"


class ParameterStore:
    """
    Named trainable arrays, in insertion order.

    The optimizer updates the arrays in place between batches; graphs only
    read them.
    """

    def __init__(self, arrays: Optional[Dict[str, np.ndarray]] = None):
        self._arrays: Dict[str, np.ndarray] = {}
        for name, array in (arrays or {}).items():
            self.add(name, array)

    def add(self, name: str, array: np.ndarray) -> None:
        if name in self._arrays:
            raise KeyError(f"duplicate parameter name: {name}")
        self._arrays[name] = np.array(array, dtype=np.float64)

    def __getitem__(self, name: str) -> np.ndarray:
        return self._arrays[name]

    def __contains__(self, name: str) -> bool:
        return name in self._arrays

    def __iter__(self):
        return iter(self._arrays)

    def __len__(self) -> int:
        return len(self._arrays)

    def items(self):
        return self._arrays.items()

    def names(self) -> List[str]:
        return list(self._arrays)

    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        return {name: a.shape for name, a in self._arrays.items()}

    def snapshot(self) -> Dict[str, np.ndarray]:
        return {name: a.copy() for name, a in self._arrays.items()}

    def restore(self, snapshot: Dict[str, np.ndarray]) -> None:
        for name, array in snapshot.items():
            self._arrays[name][...] = array

    def copy(self) -> "ParameterStore":
        return ParameterStore(self.snapshot())

    def num_values(self) -> int:
        return int(sum(a.size for a in self._arrays.values()))


class Graph:
    """
    Records primitives applied to parameters and constants.

    Args:
        params: Store the graph reads parameters from
        check_finite: Raise NumericsError as soon as a node turns non-finite
    """

    def __init__(self, params: Optional[ParameterStore] = None, check_finite: bool = True):
        self.params = params if params is not None else ParameterStore()
        self.check_finite = check_finite
        self.nodes: List[Node] = []
        self._param_nodes: Dict[str, int] = {}

    def clear(self) -> None:
        """Drop recorded nodes; the parameter binding is kept."""
        self.nodes = []
        self._param_nodes = {}

    def param(self, name: str) -> Var:
        """Bind a named parameter (once per graph; later calls reuse the node)."""
        if name in self._param_nodes:
            return Var(self, self._param_nodes[name])
        value = Tensor(self.params[name])
        self.nodes.append(Node("parameter", (), value, requires_grad=True, param_name=name))
        self._param_nodes[name] = len(self.nodes) - 1
        return Var(self, len(self.nodes) - 1)

    def constant(self, array) -> Var:
        value = Tensor(array)
        ensure_finite(value.data, "constant")
        self.nodes.append(Node("constant", (), value))
        return Var(self, len(self.nodes) - 1)

    def apply(self, kind: str, inputs: Sequence[Var], **attrs) -> Var:
        """Run a primitive forward and record it."""
        prim = get_primitive(kind)
        for v in inputs:
            if v.graph is not self:
                raise ShapeError(f"{kind}: input belongs to another graph")
        arrays = [self.nodes[v.index].value.data for v in inputs]
        prim.check(arrays, **attrs)
        out = prim.forward(arrays, **attrs)
        if self.check_finite:
            ensure_finite(out, kind)
        requires_grad = any(self.nodes[v.index].requires_grad for v in inputs)
        self.nodes.append(
            Node(kind, tuple(v.index for v in inputs), Tensor.wrap(out), attrs, requires_grad)
        )
        return Var(self, len(self.nodes) - 1)

    def parameter_nodes(self) -> Dict[str, int]:
        return dict(self._param_nodes)

    def backward(self, loss: Var) -> Dict[str, np.ndarray]:
        """
        Reverse-mode sweep from a scalar loss.

        Returns:
            Gradient per bound parameter name, shaped like the parameter.
            Parameters that do not influence the loss get zeros.

        Raises:
            ShapeError: loss is not a single value
        """
        loss_node = self.nodes[loss.index]
        if loss_node.value.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {loss_node.value.shape}")

        grads: Dict[int, np.ndarray] = {loss.index: np.ones(loss_node.value.shape)}
        for index in range(loss.index, -1, -1):
            node = self.nodes[index]
            grad = grads.pop(index, None)
            if grad is None or not node.requires_grad or not node.inputs:
                if grad is not None and node.param_name is not None:
                    grads[index] = grad
                continue
            prim = get_primitive(node.kind)
            arrays = [self.nodes[i].value.data for i in node.inputs]
            input_grads = prim.backward(grad, arrays, node.value.data, **node.attrs)
            for i, g in zip(node.inputs, input_grads):
                if g is None or not self.nodes[i].requires_grad:
                    continue
                if i in grads:
                    grads[i] = grads[i] + g
                else:
                    grads[i] = g

        result: Dict[str, np.ndarray] = {}
        for name, index in self._param_nodes.items():
            g = grads.get(index)
            shape = self.nodes[index].value.shape
            result[name] = np.zeros(shape) if g is None else np.asarray(g).reshape(shape)
        return result
