"""Binary checkpoint files: a config echo plus named float64 arrays.

Layout (all integers little-endian):

    magic  b"ONCK"
    u32    format version (1)
    u32    config byte length, then that many bytes of UTF-8 JSON
    u32    parameter count
    per parameter:
        u32  name byte length, then the UTF-8 name
        u32  ndim, then ndim * u64 dims
        raw little-endian float64 values, row-major

Writes are atomic (temp file in the target directory, then rename), so an
interrupted run never leaves a truncated checkpoint behind.
"""

import json
import os
import struct
import tempfile

import numpy as np

from .errors import CheckpointError
from .tensor import Parameter

MAGIC = b"ONCK"
VERSION = 1


def save_checkpoint(path: str, config: dict, params: list[Parameter]):
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", VERSION)
    cfg = json.dumps(config, sort_keys=True).encode("utf-8")
    blob += struct.pack("<I", len(cfg)) + cfg
    blob += struct.pack("<I", len(params))
    for p in params:
        name = p.name.encode("utf-8")
        blob += struct.pack("<I", len(name)) + name
        blob += struct.pack("<I", p.data.ndim)
        blob += struct.pack(f"<{p.data.ndim}Q", *p.data.shape)
        blob += np.ascontiguousarray(p.data, dtype="<f8").tobytes()
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(prefix=".ckpt-", dir=d)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(bytes(blob))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointError("checkpoint truncated")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def load_checkpoint(path: str) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        r = _Reader(fh.read())
    if r.take(4) != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    version = r.u32()
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    config = json.loads(r.take(r.u32()).decode("utf-8"))
    count = r.u32()
    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        name = r.take(r.u32()).decode("utf-8")
        ndim = r.u32()
        shape = struct.unpack(f"<{ndim}Q", r.take(8 * ndim)) if ndim else ()
        n = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(r.take(8 * n), dtype="<f8").astype(np.float64).reshape(shape)
        if name in arrays:
            raise CheckpointError(f"{path}: duplicate parameter {name}")
        arrays[name] = arr
    if r.pos != len(r.buf):
        raise CheckpointError(f"{path}: trailing bytes after last parameter")
    return config, arrays


def restore_parameters(params: list[Parameter], arrays: dict[str, np.ndarray], path: str = ""):
    """Copy checkpoint arrays into parameters, validating names and shapes."""
    seen = set()
    for p in params:
        if p.name not in arrays:
            raise CheckpointError(f"{path}: missing parameter {p.name}")
        arr = arrays[p.name]
        if arr.shape != p.data.shape:
            raise CheckpointError(
                f"{path}: parameter {p.name} has shape {arr.shape}, config wants {p.data.shape}")
        p.data[...] = arr
        seen.add(p.name)
    extra = set(arrays) - seen
    if extra:
        raise CheckpointError(f"{path}: unexpected parameters {sorted(extra)}")
