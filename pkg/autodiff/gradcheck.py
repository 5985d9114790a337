"""
Central finite-difference check of analytic gradients.
"""
from typing import Callable, Dict, Optional

import numpy as np

from .graph import Graph, ParameterStore, Var

LossBuilder = Callable[[Graph], Var]


def _loss_value(build_loss: LossBuilder, params: ParameterStore) -> float:
    graph = Graph(params)
    return float(build_loss(graph).value.reshape(-1)[0])


def finite_difference_check(
    build_loss: LossBuilder,
    params: ParameterStore,
    name: str,
    epsilon: float = 1e-5,
    num_coords: int = 100,
    seed: int = 0,
    analytic: Optional[np.ndarray] = None,
) -> float:
    """
    Compare the analytic gradient of one parameter with central differences.

    Args:
        build_loss: Builds the scalar loss on a fresh graph; must be deterministic
        params: Parameter store (perturbed in place and restored)
        name: Parameter to check
        epsilon: Finite-difference step
        num_coords: Coordinates sampled when the parameter is larger
        analytic: Precomputed analytic gradient (saves a backward pass)

    Returns:
        max |analytic - numeric| / max(1, |analytic|) over sampled coordinates
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")

    if analytic is None:
        graph = Graph(params)
        analytic = graph.backward(build_loss(graph))[name]

    array = params[name]
    flat = array.reshape(-1)
    if flat.size <= num_coords:
        coords = np.arange(flat.size)
    else:
        coords = np.random.default_rng(seed).choice(flat.size, size=num_coords, replace=False)

    worst = 0.0
    analytic_flat = analytic.reshape(-1)
    for c in coords:
        original = flat[c]
        flat[c] = original + epsilon
        plus = _loss_value(build_loss, params)
        flat[c] = original - epsilon
        minus = _loss_value(build_loss, params)
        flat[c] = original
        numeric = (plus - minus) / (2.0 * epsilon)
        a = analytic_flat[c]
        worst = max(worst, abs(a - numeric) / max(1.0, abs(a)))
    return worst


def check_all(
    build_loss: LossBuilder,
    params: ParameterStore,
    epsilon: float = 1e-5,
    num_coords: int = 100,
    seed: int = 0,
) -> Dict[str, float]:
    """Run finite_difference_check for every parameter in the store."""
    graph = Graph(params)
    grads = graph.backward(build_loss(graph))
    return {
        name: finite_difference_check(
            build_loss, params, name, epsilon, num_coords, seed, analytic=grads[name]
        )
        for name in params.names()
    }
