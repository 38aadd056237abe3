"""1-gram Shannon entropy of byte streams, in bits per byte."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_WINDOW = 64
DEFAULT_STRIDE = 16


@dataclass(frozen=True)
class EntropyProfile:
    window: int
    stride: int
    values: tuple[float, ...]

    def offsets(self) -> list[int]:
        return [i * self.stride for i in range(len(self.values))]

    def to_csv(self) -> str:
        rows = ["offset,entropy"]
        rows += [f"{off},{h:.6f}" for off, h in zip(self.offsets(), self.values)]
        return "\n".join(rows) + "\n"


def _as_array(data) -> np.ndarray:
    arr = np.frombuffer(bytes(data), dtype=np.uint8)
    if arr.size == 0:
        raise ValueError("entropy of an empty byte sequence is undefined")
    return arr


def _entropy_of_counts(counts: np.ndarray, total: int) -> float:
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum()) + 0.0


def byte_entropy(data: bytes) -> float:
    arr = _as_array(data)
    return _entropy_of_counts(np.bincount(arr, minlength=256), arr.size)


def transec_distance(a: bytes, b: bytes) -> float:
    """Absolute entropy gap between two byte streams."""
    return abs(byte_entropy(a) - byte_entropy(b))


def sliding_profile(data: bytes, window: int = DEFAULT_WINDOW,
                    stride: int = DEFAULT_STRIDE) -> EntropyProfile:
    arr = _as_array(data)
    if window < 1 or stride < 1:
        raise ValueError("window and stride must be >= 1")
    if window > arr.size:
        raise ValueError(f"window {window} larger than data ({arr.size} bytes)")
    values = []
    for start in range(0, arr.size - window + 1, stride):
        seg = arr[start:start + window]
        values.append(_entropy_of_counts(np.bincount(seg, minlength=256), window))
    return EntropyProfile(window, stride, tuple(values))
