from .tensor import Tensor
from .graph import Graph, Var, Node, ParameterStore
from .ops import forward_primitive
from .gradcheck import finite_difference_check, check_all
from .checkpoint import save_checkpoint, load_checkpoint, check_compatible

__all__ = [
    "Tensor",
    "Graph",
    "Var",
    "Node",
    "ParameterStore",
    "forward_primitive",
    "finite_difference_check",
    "check_all",
    "save_checkpoint",
    "load_checkpoint",
    "check_compatible",
]
