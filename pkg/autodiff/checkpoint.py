"""
Binary parameter checkpoints.

Layout (all integers little-endian):

    8 bytes   magic b"GMFRCKPT"
    uint32    format version (1)
    uint32    metadata length N, then N bytes of UTF-8 JSON metadata
    uint32    record count R, then R records of:
                uint16  name length, name bytes (UTF-8)
                uint8   ndim
                uint32  x ndim dimension sizes
                float64 x prod(dims) values, row-major
"""
import json
import os
import struct
import sys
from typing import Any, Dict, Optional, Tuple

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from core.exceptions import CheckpointError
from .graph import ParameterStore

MAGIC = b"GMFRCKPT"
VERSION = 1


def save_checkpoint(path: str, params: ParameterStore, metadata: Optional[Dict[str, Any]] = None) -> None:
    """Write atomically: the file only appears once fully written."""
    meta_bytes = json.dumps(metadata or {}, sort_keys=True).encode("utf-8")
    tmp_path = path + ".partial"
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    try:
        with open(tmp_path, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<II", VERSION, len(meta_bytes)))
            f.write(meta_bytes)
            f.write(struct.pack("<I", len(params)))
            for name, array in params.items():
                name_bytes = name.encode("utf-8")
                f.write(struct.pack("<H", len(name_bytes)))
                f.write(name_bytes)
                f.write(struct.pack("<B", array.ndim))
                f.write(struct.pack(f"<{array.ndim}I", *array.shape))
                f.write(np.ascontiguousarray(array, dtype="<f8").tobytes())
        os.replace(tmp_path, path)
    finally:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)


def _read(f, fmt: str):
    size = struct.calcsize(fmt)
    chunk = f.read(size)
    if len(chunk) != size:
        raise CheckpointError("checkpoint truncated")
    return struct.unpack(fmt, chunk)


def load_checkpoint(path: str) -> Tuple[ParameterStore, Dict[str, Any]]:
    """
    Read a checkpoint.

    Returns:
        (parameters, metadata)

    Raises:
        CheckpointError: missing file, bad magic, unsupported version, truncation
    """
    if not os.path.exists(path):
        raise CheckpointError(f"Checkpoint not found: {path}")
    with open(path, "rb") as f:
        if f.read(len(MAGIC)) != MAGIC:
            raise CheckpointError(f"{path} is not a GMFlowRec checkpoint")
        version, meta_len = _read(f, "<II")
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        metadata = json.loads(f.read(meta_len).decode("utf-8"))
        (count,) = _read(f, "<I")
        params = ParameterStore()
        for _ in range(count):
            (name_len,) = _read(f, "<H")
            name = f.read(name_len).decode("utf-8")
            (ndim,) = _read(f, "<B")
            shape = _read(f, f"<{ndim}I") if ndim else ()
            n = int(np.prod(shape)) if shape else 1
            raw = f.read(8 * n)
            if len(raw) != 8 * n:
                raise CheckpointError(f"checkpoint truncated in record {name}")
            params.add(name, np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64))
    return params, metadata


def check_compatible(loaded: ParameterStore, expected: ParameterStore) -> None:
    """Raise CheckpointError unless names and shapes match exactly."""
    want = expected.shapes()
    got = loaded.shapes()
    missing = sorted(set(want) - set(got))
    extra = sorted(set(got) - set(want))
    if missing or extra:
        raise CheckpointError(f"parameter names differ (missing={missing}, unexpected={extra})")
    for name, shape in want.items():
        if tuple(got[name]) != tuple(shape):
            raise CheckpointError(f"{name}: checkpoint shape {got[name]} != config shape {shape}")
