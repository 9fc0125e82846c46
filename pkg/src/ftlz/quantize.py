"""Linear-scaling quantization, reconstruction, and unpredictable handling.

Bin 0 is reserved as the unpredictable marker; a point whose residual leaves
the quantizer range (or fails the reconstruction double-check) is demoted and
its raw 32-bit word stored losslessly instead. Rounding is half away from
zero everywhere so both pipeline directions agree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .checksum import word_reinterpret, word_to_float
from .errors import CorruptStream, InvalidArgument


@dataclass(frozen=True)
class QuantConfig:
    """Quantizer geometry. bin_capacity must be a power of two >= 4."""

    bin_capacity: int = 65536

    def __post_init__(self):
        c = self.bin_capacity
        if c < 4 or (c & (c - 1)) != 0:
            raise InvalidArgument(f"bin_capacity must be a power of two >= 4, got {c}")

    @property
    def center(self) -> int:
        return self.bin_capacity // 2


def quantize_diff(diff: float, eb: float, cfg: QuantConfig) -> Optional[int]:
    """Bin index for a prediction residual, or None when unpredictable.

    q = round(diff / (2*eb)) half away from zero; the bin is center + q when
    that lands in [1, bin_capacity - 1].
    """
    half_steps = abs(float(diff)) / (2.0 * eb)
    if not half_steps <= 2.0 * cfg.bin_capacity:  # catches inf/NaN early
        return None
    q = int(math.floor(half_steps + 0.5))
    if diff < 0:
        q = -q
    b = cfg.center + q
    if 1 <= b <= cfg.bin_capacity - 1:
        return b
    return None


def quantize_grid(diff: np.ndarray, eb: float, cfg: QuantConfig) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized quantize_diff: (bins uint32 with 0 = unpredictable, mask).

    Matches quantize_diff elementwise, NaN/Inf residuals included.
    """
    d = np.asarray(diff, dtype=np.float64)
    half_steps = np.abs(d) / (2.0 * eb)
    small = half_steps <= 2.0 * cfg.bin_capacity
    q = np.floor(np.where(small, half_steps, 0.0) + 0.5)
    q = np.where(d < 0, -q, q)
    b = cfg.center + q
    ok = small & (b >= 1) & (b <= cfg.bin_capacity - 1)
    bins = np.where(ok, b, 0.0).astype(np.uint32)
    return bins, ok


def reconstruct(pred: float, bin_index: int, eb: float, cfg: QuantConfig) -> float:
    """Decompressed value for a predictable bin: pred + 2*eb*(bin - center)."""
    assert 1 <= bin_index <= cfg.bin_capacity - 1
    return float(pred) + (2.0 * eb) * float(bin_index - cfg.center)


def reconstruct_grid(pred: np.ndarray, bins: np.ndarray, eb: float, cfg: QuantConfig) -> np.ndarray:
    """Vectorized reconstruct (float64); bin 0 rows are filled but unused."""
    offs = bins.astype(np.float64) - float(cfg.center)
    return np.asarray(pred, dtype=np.float64) + (2.0 * eb) * offs


def store_unpredictable(value) -> int:
    """Raw 32-bit word for a point kept losslessly."""
    return word_reinterpret(value)


def load_unpredictable(word: int) -> np.float32:
    """Bit-exact inverse of store_unpredictable."""
    return word_to_float(word)


def double_check(ori: float, dcmp: float, eb: float) -> bool:
    """True to keep the quantized point, False to demote it to unpredictable.

    Keeps only when |ori - dcmp| <= eb holds for the value actually stored, so
    float32 rounding of the reconstruction can never break the bound; the
    NaN-propagating comparison demotes anything non-finite as well.
    """
    return abs(float(ori) - float(dcmp)) <= eb


class UnpredictableStore:
    """Ordered raw words for one block's unpredictable points."""

    def __init__(self, words=()):
        self._words = [int(w) for w in words]
        self._cursor = 0

    def append(self, word: int) -> None:
        self._words.append(int(word))

    def next_word(self) -> int:
        if self._cursor >= len(self._words):
            raise CorruptStream("unpredictable store exhausted during decode")
        w = self._words[self._cursor]
        self._cursor += 1
        return w

    def as_array(self) -> np.ndarray:
        return np.array(self._words, dtype=np.uint32)

    def __len__(self) -> int:
        return len(self._words)
