"""Binary model files.

Layout (all integers little-endian)::

    magic    8 bytes   b"FGDMODEL"
    version  uint32    1
    count    uint32    number of arrays
    repeated count times:
        name_len  uint16, then name_len bytes of UTF-8
        kind      uint8     0 = euclidean, 1 = orthogonal
        rows      uint32
        cols      uint32
        data      rows * cols float64, little-endian, row-major
"""
import struct

import numpy as np

MAGIC = b"FGDMODEL"
VERSION = 1
_KINDS = {"euclidean": 0, "orthogonal": 1}


def save_model(path, arrays):
    """``arrays``: iterable of (name, kind, 2-D array)."""
    arrays = list(arrays)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(arrays)))
        for name, kind, a in arrays:
            a = np.ascontiguousarray(a, dtype="<f8")
            if a.ndim != 2:
                raise ValueError(f"array {name!r} must be 2-D")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<BII", _KINDS[kind], a.shape[0], a.shape[1]))
            fh.write(a.tobytes())


def load_model(path):
    names = {v: k for k, v in _KINDS.items()}
    with open(path, "rb") as fh:
        if fh.read(8) != MAGIC:
            raise ValueError(f"{path}: not an FGD model file")
        version, count = struct.unpack("<II", fh.read(8))
        if version != VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        out = []
        for _ in range(count):
            (nlen,) = struct.unpack("<H", fh.read(2))
            name = fh.read(nlen).decode("utf-8")
            kind, rows, cols = struct.unpack("<BII", fh.read(9))
            data = np.frombuffer(fh.read(8 * rows * cols), dtype="<f8").reshape(rows, cols)
            out.append((name, names[kind], data.astype(np.float64)))
        return out
