"""AFDT binary tensor files: multi-channel feature maps, one record per layer.

Layout (all integers little-endian):
    magic   4 bytes  'AFDT'
    version u32      1
    frames  u32
    per frame:
        index   u32
        layers  u8
        per layer:
            label_len u8, label ASCII bytes
            H u32, W u32, C u32
            H*W*C float32, row-major, channel-minor: idx = (h*W + w)*C + c
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"AFDT"
VERSION = 1


class AfdtError(Exception):
    """Malformed AFDT file; message carries the byte offset."""


@dataclass
class LayerRecord:
    """One layer's activation block within a frame."""

    label: str
    data: np.ndarray  # shape (H, W, C), float32

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 3 or min(self.data.shape) < 1:
            raise ValueError(f"layer {self.label!r}: data must be (H, W, C) with "
                             f"positive dims, got {self.data.shape}")
        try:
            encoded = self.label.encode("ascii")
        except UnicodeEncodeError:
            raise ValueError(f"layer label {self.label!r} is not ASCII") from None
        if not 1 <= len(encoded) <= 255:
            raise ValueError(f"layer label {self.label!r} must be 1..255 bytes")


@dataclass
class FeatureFrame:
    """All exported layers of one video frame."""

    index: int
    layers: list = field(default_factory=list)

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("frame index must be non-negative")

    def layer(self, label: str) -> LayerRecord:
        for rec in self.layers:
            if rec.label == label:
                return rec
        raise KeyError(f"frame {self.index} has no layer {label!r}")

    @property
    def labels(self) -> tuple:
        return tuple(rec.label for rec in self.layers)


def write_feature_file(frames, path) -> None:
    """Serialize frames to an AFDT file."""
    frames = list(frames)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(frames)))
        for frame in frames:
            if len(frame.layers) > 255:
                raise ValueError(f"frame {frame.index}: more than 255 layers")
            fh.write(struct.pack("<IB", frame.index, len(frame.layers)))
            for rec in frame.layers:
                label = rec.label.encode("ascii")
                h, w, c = rec.data.shape
                fh.write(struct.pack("<B", len(label)))
                fh.write(label)
                fh.write(struct.pack("<III", h, w, c))
                fh.write(rec.data.astype("<f4", copy=False).tobytes(order="C"))


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.blob):
            raise AfdtError(
                f"truncated file: needed {n} bytes for {what} at offset {self.pos}, "
                f"only {len(self.blob) - self.pos} left"
            )
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def read_feature_file(path):
    """Parse an AFDT file into a list of FeatureFrame."""
    with open(path, "rb") as fh:
        blob = fh.read()
    rd = _Reader(blob)
    magic = rd.take(4, "magic")
    if magic != MAGIC:
        raise AfdtError(f"bad magic {magic!r} at offset 0, expected {MAGIC!r}")
    version, n_frames = rd.unpack("<II", "header")
    if version != VERSION:
        raise AfdtError(f"unsupported version {version} at offset 4")
    frames = []
    for _ in range(n_frames):
        index, n_layers = rd.unpack("<IB", "frame header")
        layers = []
        for _ in range(n_layers):
            (label_len,) = rd.unpack("<B", "label length")
            at = rd.pos
            try:
                label = rd.take(label_len, "label").decode("ascii")
            except UnicodeDecodeError:
                raise AfdtError(f"non-ASCII layer label at offset {at}") from None
            h, w, c = rd.unpack("<III", f"layer {label!r} dims")
            if min(h, w, c) < 1:
                raise AfdtError(
                    f"layer {label!r}: non-positive dims {(h, w, c)} at offset {rd.pos - 12}"
                )
            raw = rd.take(4 * h * w * c, f"layer {label!r} payload")
            data = np.frombuffer(raw, dtype="<f4").reshape(h, w, c)
            layers.append(LayerRecord(label, data.copy()))
        frames.append(FeatureFrame(index, layers))
    if rd.pos != len(blob):
        raise AfdtError(f"{len(blob) - rd.pos} trailing bytes at offset {rd.pos}")
    return frames
