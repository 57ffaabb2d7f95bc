"""AFDT writer.

Mirrors the consumer-side format contract: magic 'AFDT', version u32 LE = 1,
frame count u32 LE; per frame: index u32 LE, layer count u8; per layer:
label length u8 + ASCII label, H/W/C u32 LE, then H*W*C float32 LE values,
row-major, channel-minor.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"AFDT"
VERSION = 1


def write_afdt(frames, path) -> None:
    """`frames` is a list of (frame_index, [(label, (H, W, C) array), ...])."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(frames)))
        for index, layers in frames:
            if not 0 <= len(layers) <= 255:
                raise ValueError(f"frame {index}: bad layer count {len(layers)}")
            fh.write(struct.pack("<IB", index, len(layers)))
            for label, data in layers:
                data = np.ascontiguousarray(data, dtype="<f4")
                if data.ndim != 3:
                    raise ValueError(f"layer {label!r}: need (H, W, C) data")
                encoded = label.encode("ascii")
                if not 1 <= len(encoded) <= 255:
                    raise ValueError(f"bad label {label!r}")
                h, w, c = data.shape
                fh.write(struct.pack("<B", len(encoded)))
                fh.write(encoded)
                fh.write(struct.pack("<III", h, w, c))
                fh.write(data.tobytes(order="C"))
