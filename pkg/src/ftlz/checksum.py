"""Round-off-free integer checksums over bit-reinterpreted values.

Values are treated as unsigned 32-bit words; a block's checksum is the pair

    sum  = sum_i w_i          (mod 2**64)
    isum = sum_i i * w_i      (mod 2**64)

Equal bytes always give equal pairs, NaN/Inf included, and a single corrupted
word can be detected, located, and restored exactly. Localization scans
candidate indices for j * (sum' - sum) == (isum' - isum) mod 2**64 instead of
dividing, which stays exact under wraparound. For any single-word change the
delta's 2-adic valuation is at most 31, so with at most 2**20 words per block
the congruence has one solution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BlockTooLarge

#: Maximum number of 32-bit words per checksummed block. Keeps localization
#: unique: candidate indices repeat with period 2**(64-31) > 2**20.
MAX_WORDS = 1 << 20

_M64 = (1 << 64) - 1

STATUS_CLEAN = "clean"
STATUS_CORRECTED = "corrected"
STATUS_UNCORRECTABLE = "uncorrectable"


@dataclass(frozen=True)
class ChecksumPair:
    """(sum, isum) accumulators, each an unsigned 64-bit value."""

    sum: int
    isum: int


@dataclass(frozen=True)
class CorrectionOutcome:
    status: str
    index: Optional[int] = None
    old_word: Optional[int] = None
    new_word: Optional[int] = None


def word_reinterpret(value) -> int:
    """Bit-identical view of a float32 as an unsigned 32-bit word."""
    return int(np.float32(value).view(np.uint32))


def word_to_float(word: int) -> np.float32:
    """Inverse of word_reinterpret."""
    return np.uint32(word).view(np.float32)


def float_words(values) -> np.ndarray:
    """uint32 word array for a float32 sequence (bit reinterpretation)."""
    arr = np.ascontiguousarray(values, dtype="<f4")
    return arr.view("<u4").reshape(-1)


def double_words(values) -> np.ndarray:
    """uint32 words for a float64 sequence; value i becomes words 2i, 2i+1.

    The low half of each double is word 2i (little-endian split).
    """
    arr = np.ascontiguousarray(values, dtype="<f8")
    return arr.view("<u4").reshape(-1)


def checksum_words(words: np.ndarray) -> ChecksumPair:
    """Checksum pair over a uint32 word array (wrapping 64-bit arithmetic)."""
    if words.size > MAX_WORDS:
        raise BlockTooLarge(f"{words.size} words exceeds cap {MAX_WORDS}")
    if words.size == 0:
        return ChecksumPair(0, 0)
    w = words.astype(np.uint64)
    idx = np.arange(words.size, dtype=np.uint64)
    s = int(np.add.reduce(w))
    si = int(np.add.reduce(w * idx))
    return ChecksumPair(s & _M64, si & _M64)


def checksum_block(values) -> ChecksumPair:
    """Checksum pair of a float32 block."""
    return checksum_words(float_words(values))


def checksum_block_f64(values) -> ChecksumPair:
    """Checksum pair of a float64 block over its split 32-bit words."""
    return checksum_words(double_words(values))


def verify_words(words: np.ndarray, stored: ChecksumPair) -> bool:
    """True iff the recomputed pair equals the stored pair exactly."""
    return checksum_words(words) == stored


def verify_block(values, stored: ChecksumPair) -> bool:
    return verify_words(float_words(values), stored)


def correct_words(words: np.ndarray, stored: ChecksumPair) -> CorrectionOutcome:
    """Detect/locate/correct at most one corrupted word, in place.

    `words` must be a writable uint32 array whose pristine content produced
    `stored`. On a located corruption the word is restored in place and the
    recomputed pair is guaranteed to equal `stored` again. Anything a single
    word patch cannot explain comes back uncorrectable (multi-corruption or
    damage beyond the error model); `words` is left unmodified in that case.
    """
    current = checksum_words(words)
    if current == stored:
        return CorrectionOutcome(STATUS_CLEAN)
    dsum = (current.sum - stored.sum) & _M64
    disum = (current.isum - stored.isum) & _M64
    if dsum == 0:
        # A single-word change always moves `sum`; isum-only drift means
        # multiple corruptions.
        return CorrectionOutcome(STATUS_UNCORRECTABLE)
    n = words.size
    idx = np.arange(n, dtype=np.uint64)
    cand = np.flatnonzero(idx * np.uint64(dsum) == np.uint64(disum))
    for j in cand:
        j = int(j)
        old = int(words[j])
        restored = (old - dsum) & _M64
        if restored >> 32:
            continue  # patch does not land in 32-bit word range
        words[j] = np.uint32(restored)
        # sum is restored by construction; the candidate congruence restored
        # isum, so re-verification can only fail for multi-word damage.
        if verify_words(words, stored):
            return CorrectionOutcome(STATUS_CORRECTED, j, old, restored)
        words[j] = np.uint32(old)
    return CorrectionOutcome(STATUS_UNCORRECTABLE)


def locate_and_correct(values: np.ndarray, stored: ChecksumPair) -> CorrectionOutcome:
    """Detect/locate/correct a single corrupted float32 value, in place.

    `values` must be a writable, C-contiguous float32 array.
    """
    return correct_words(values.view(np.uint32).reshape(-1), stored)


def locate_and_correct_f64(values: np.ndarray, stored: ChecksumPair) -> CorrectionOutcome:
    """float64 variant of locate_and_correct over the split word stream."""
    return correct_words(values.view(np.uint32).reshape(-1), stored)


def serialize_pair(pair: ChecksumPair) -> bytes:
    """Two little-endian unsigned 64-bit words."""
    return pair.sum.to_bytes(8, "little") + pair.isum.to_bytes(8, "little")


def parse_pair(data: bytes) -> ChecksumPair:
    if len(data) != 16:
        raise ValueError(f"checksum pair needs 16 bytes, got {len(data)}")
    return ChecksumPair(
        int.from_bytes(data[:8], "little"), int.from_bytes(data[8:], "little")
    )


def checksum_blocks_batch(stack: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row checksum pairs for a 2D uint32 array (rows are blocks).

    Returns (sums, isums) as uint64 arrays. Equivalent to checksum_words on
    each row; used by the pipeline to checksum every block of a group at once.
    """
    if stack.shape[1] > MAX_WORDS:
        raise BlockTooLarge(f"{stack.shape[1]} words exceeds cap {MAX_WORDS}")
    w = stack.astype(np.uint64)
    idx = np.arange(stack.shape[1], dtype=np.uint64)
    return np.add.reduce(w, axis=1), np.add.reduce(w * idx, axis=1)
