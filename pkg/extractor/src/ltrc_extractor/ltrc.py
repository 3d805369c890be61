"""Writer for the LTRC layer-trace exchange format.

Byte layout (little-endian): magic "LTRC" | u32 version = 1 | u32 L |
u32 N | u32 d | u32 reserved = 0 | L blocks of N*d float32, row-major.
The manifest is a flat string map in a JSON sidecar at <path>.manifest.json.
Implemented here against the published layout; the scoring package is
consumed only through this file format.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"LTRC"
VERSION = 1
_HEADER = struct.Struct("<4sIIIII")


def write_ltrc(coords: np.ndarray, path, manifest: dict[str, str]) -> None:
    arr = np.ascontiguousarray(coords, dtype="<f4")
    if arr.ndim != 3:
        raise ValueError(f"coords must be (L, N, d), got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("coords contain non-finite values")
    L, N, d = arr.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, L, N, d, 0))
        fh.write(arr.tobytes())
    sidecar = Path(str(path) + ".manifest.json")
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump({str(k): str(v) for k, v in manifest.items()},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
