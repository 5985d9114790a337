"""
Immutable dense tensor of 64-bit floats.
"""
from typing import Sequence, Tuple

import numpy as np

import os
import sys
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from core.exceptions import NumericsError, ShapeError


class Tensor:
    """
    Row-major float64 buffer with a shape.

    The wrapped array is read-only, so a Tensor can be shared between
    threads and graphs without copying.
    """

    __slots__ = ("_data",)

    def __init__(self, data, shape: Sequence[int] = None):
        array = np.array(data, dtype=np.float64, order="C", copy=True)
        if shape is not None:
            shape = tuple(int(s) for s in shape)
            if int(np.prod(shape)) != array.size:
                raise ShapeError(f"shape {shape} does not hold {array.size} values")
            array = array.reshape(shape)
        array.setflags(write=False)
        self._data = array

    @classmethod
    def wrap(cls, array: np.ndarray) -> "Tensor":
        """Adopt an array without copying; the caller gives up ownership."""
        tensor = cls.__new__(cls)
        array = np.ascontiguousarray(array, dtype=np.float64)
        array.setflags(write=False)
        tensor._data = array
        return tensor

    @property
    def shape(self) -> Tuple[int, ...]:
        return self._data.shape

    @property
    def size(self) -> int:
        return self._data.size

    @property
    def data(self) -> np.ndarray:
        return self._data

    def numpy(self) -> np.ndarray:
        """Writable copy."""
        return self._data.copy()

    def item(self) -> float:
        if self._data.size != 1:
            raise ShapeError(f"item() needs a single value, tensor has shape {self.shape}")
        return float(self._data.reshape(-1)[0])

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"


def ensure_finite(array: np.ndarray, where: str) -> np.ndarray:
    if not np.all(np.isfinite(array)):
        raise NumericsError(f"non-finite values produced by {where}")
    return array
