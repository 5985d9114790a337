"""
Adam with bias-corrected moment estimates over a named parameter store.
"""
import os
import sys
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from autodiff.graph import ParameterStore
from core.exceptions import ShapeError


@dataclass
class OptimizerState:
    """First/second moments per parameter plus the step counter."""
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    def snapshot(self) -> "OptimizerState":
        return OptimizerState(
            beta1=self.beta1, beta2=self.beta2, eps=self.eps, step=self.step,
            m={k: a.copy() for k, a in self.m.items()},
            v={k: a.copy() for k, a in self.v.items()},
        )


class Adam:
    """
    In-place Adam updates.

    Args:
        lr: Step size; 0 leaves every parameter bitwise unchanged
        state: Moment accumulators, created empty if omitted
    """

    def __init__(self, lr: float, state: OptimizerState = None):
        self.lr = lr
        self.state = state or OptimizerState()

    def step(self, params: ParameterStore, grads: Dict[str, np.ndarray]) -> None:
        st = self.state
        st.step += 1
        if self.lr == 0.0:
            return
        bc1 = 1.0 - st.beta1 ** st.step
        bc2 = 1.0 - st.beta2 ** st.step
        step_size = self.lr / bc1

        for name, param in params.items():
            g = grads.get(name)
            if g is None:
                continue
            if g.shape != param.shape:
                raise ShapeError(f"gradient for {name} has shape {g.shape}, parameter {param.shape}")
            if name not in st.m:
                st.m[name] = np.zeros_like(param)
                st.v[name] = np.zeros_like(param)
            m, v = st.m[name], st.v[name]
            m *= st.beta1
            m += (1.0 - st.beta1) * g
            v *= st.beta2
            v += (1.0 - st.beta2) * (g * g)
            param -= step_size * m / (np.sqrt(v / bc2) + st.eps)
