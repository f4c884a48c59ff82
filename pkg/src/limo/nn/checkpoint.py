"""Binary checkpoint container for named parameters.

Layout (all little-endian):

    magic   4 bytes  b"CLCK"
    version u32
    count   u32
    then per parameter:
        name_len u32, name utf-8 bytes
        ndim u32, dims u32 each
        data float64 row-major
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import CheckpointIncompatible, MalformedHeader
from .tensor import Parameter

MAGIC = b"CLCK"
VERSION = 1


def save_checkpoint(params: list[Parameter], path) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(params)))
        for p in params:
            name = p.name.encode("utf-8")
            fh.write(struct.pack("<I", len(name)))
            fh.write(name)
            fh.write(struct.pack("<I", p.data.ndim))
            for d in p.data.shape:
                fh.write(struct.pack("<I", d))
            fh.write(p.data.astype("<f8", copy=False).tobytes(order="C"))


def load_checkpoint(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:4] != MAGIC:
        raise MalformedHeader(f"{path}: not a checkpoint file")
    version, count = struct.unpack("<II", blob[4:12])
    if version != VERSION:
        raise MalformedHeader(f"{path}: unsupported checkpoint version {version}")
    off = 12
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<I", blob, off)
        off += 4
        name = blob[off : off + nlen].decode("utf-8")
        off += nlen
        (ndim,) = struct.unpack_from("<I", blob, off)
        off += 4
        shape = struct.unpack_from(f"<{ndim}I", blob, off)
        off += 4 * ndim
        size = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(blob, dtype="<f8", count=size, offset=off).reshape(shape)
        off += size * 8
        out[name] = arr.copy()
    if off != len(blob):
        raise MalformedHeader(f"{path}: trailing bytes after last parameter")
    return out


def apply_checkpoint(params: list[Parameter], state: dict[str, np.ndarray]) -> None:
    """Load state into params; any name or shape mismatch is reported field by field."""
    problems = []
    by_name = {p.name: p for p in params}
    for name, p in by_name.items():
        if name not in state:
            problems.append(f"missing parameter {name!r} (model shape {p.data.shape})")
        elif state[name].shape != p.data.shape:
            problems.append(
                f"{name!r}: checkpoint shape {state[name].shape}, model shape {p.data.shape}"
            )
    for name in state:
        if name not in by_name:
            problems.append(f"unexpected parameter {name!r} in checkpoint")
    if problems:
        raise CheckpointIncompatible("; ".join(problems))
    for name, p in by_name.items():
        p.data = state[name].astype(np.float64, copy=True)
