"""Binary tensor file format and PGM export.

Format (bit-exact round trips): magic ``b"SINT1\\n"``, a 4-byte
little-endian header length, a UTF-8 JSON header
``{"dtype": "f32"|"f64", "shape": [...], "order": "row-major"}``,
then the raw little-endian payload.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .tensor import ContractViolation, Tensor

MAGIC = b"SINT1\n"

_NP_DTYPES = {"f32": "<f4", "f64": "<f8"}


def write_tensor(path, arr) -> None:
    if isinstance(arr, Tensor):
        arr = arr.numpy()
    arr = np.asarray(arr)
    if arr.dtype == np.float32:
        dtype = "f32"
    else:
        dtype = "f64"
        arr = arr.astype(np.float64, copy=False)
    header = json.dumps(
        {"dtype": dtype, "shape": list(arr.shape), "order": "row-major"},
        separators=(",", ":"),
    ).encode("utf-8")
    payload = np.ascontiguousarray(arr, dtype=_NP_DTYPES[dtype]).tobytes()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(payload)


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ContractViolation(f"{path}: bad magic {magic!r}")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header.get("order") != "row-major":
            raise ContractViolation(f"{path}: unsupported order {header.get('order')!r}")
        dtype = header["dtype"]
        if dtype not in _NP_DTYPES:
            raise ContractViolation(f"{path}: unknown dtype {dtype!r}")
        shape = tuple(int(s) for s in header["shape"])
        count = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(fh.read(), dtype=_NP_DTYPES[dtype], count=count)
    out = data.reshape(shape).astype(_NP_DTYPES[dtype].lstrip("<"))
    return out


def write_pgm(path, arr) -> None:
    """8-bit grayscale P5 export, min-max normalized; the normalization is
    recorded in a JSON sidecar next to the image."""
    arr = np.asarray(arr, dtype=np.float64)
    lo, hi = float(arr.min()), float(arr.max())
    span = hi - lo if hi > lo else 1.0
    img = np.round((arr - lo) / span * 255.0).astype(np.uint8)
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
    sidecar = path.with_suffix(path.suffix + ".json")
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump({"min": lo, "max": hi}, fh)
        fh.write("\n")
