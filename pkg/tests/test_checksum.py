import numpy as np
import pytest

from ftlz.checksum import (
    MAX_WORDS,
    ChecksumPair,
    checksum_block,
    checksum_block_f64,
    checksum_blocks_batch,
    checksum_words,
    correct_words,
    double_words,
    float_words,
    locate_and_correct,
    locate_and_correct_f64,
    parse_pair,
    serialize_pair,
    verify_block,
    word_reinterpret,
    word_to_float,
)
from ftlz.errors import BlockTooLarge

M64 = (1 << 64) - 1


def brute_force_pair(words) -> ChecksumPair:
    """Independent naive accumulation oracle (pure-Python mod-2**64 loop)."""
    s = si = 0
    for i, w in enumerate(words):
        s = (s + int(w)) & M64
        si = (si + i * int(w)) & M64
    return ChecksumPair(s, si)


def test_word_reinterpret_known_constants():
    assert word_reinterpret(0.0) == 0x00000000
    assert word_reinterpret(1.0) == 0x3F800000


def test_word_reinterpret_roundtrip_bulk():
    rng = np.random.default_rng(0)
    words = rng.integers(0, 1 << 32, size=100_000, dtype=np.uint32)
    back = float_words(words.view(np.float32))
    assert np.array_equal(back, words)
    # spot-check the scalar path, NaN patterns included
    for w in [0, 1, 0x7FC00001, 0xFFFFFFFF, 0x7F800000]:
        assert word_reinterpret(word_to_float(w)) == w


def test_checksum_zero_block():
    assert checksum_block(np.zeros(17, np.float32)) == ChecksumPair(0, 0)
    assert checksum_block(np.zeros(0, np.float32)) == ChecksumPair(0, 0)


def test_checksum_two_ones():
    pair = checksum_block(np.array([1.0, 1.0], np.float32))
    assert pair.sum == 2 * 0x3F800000
    assert pair.isum == 0x3F800000  # only index 1 contributes


def test_checksum_matches_naive_oracle():
    rng = np.random.default_rng(1)
    vals = rng.standard_normal(1000).astype(np.float32)
    pair = checksum_block(vals)
    assert pair == brute_force_pair(float_words(vals))


def test_checksum_f64_split_words():
    rng = np.random.default_rng(2)
    vals = rng.standard_normal(500)
    pair = checksum_block_f64(vals)
    assert pair == brute_force_pair(double_words(vals))
    one = checksum_block_f64(np.array([1.5]))
    words = double_words(np.array([1.5]))
    assert one.isum == int(words[1])  # index-0 term vanishes
    assert checksum_block_f64(np.zeros(3)) == ChecksumPair(0, 0)


def test_checksum_length_cap():
    with pytest.raises(BlockTooLarge):
        checksum_words(np.zeros(MAX_WORDS + 1, np.uint32))


def test_verify_flags_any_single_flip():
    rng = np.random.default_rng(3)
    vals = rng.standard_normal(256).astype(np.float32)
    stored = checksum_block(vals)
    assert verify_block(vals, stored)
    for _ in range(200):
        work = vals.copy()
        e = int(rng.integers(256))
        bit = int(rng.integers(32))
        w = work.view(np.uint32)
        w[e] ^= np.uint32(1 << bit)
        assert not verify_block(work, stored)


def test_locate_and_correct_bit30_of_element7():
    rng = np.random.default_rng(4)
    vals = rng.standard_normal(1000).astype(np.float32)
    pristine = vals.copy()
    stored = checksum_block(vals)
    vals.view(np.uint32)[7] ^= np.uint32(1 << 30)
    out = locate_and_correct(vals, stored)
    assert out.status == "corrected"
    assert out.index == 7
    assert np.array_equal(vals, pristine)
    assert verify_block(vals, stored)


def test_locate_and_correct_clean():
    vals = np.arange(10, dtype=np.float32)
    out = locate_and_correct(vals, checksum_block(vals))
    assert out.status == "clean"


def test_double_fault_uncorrectable():
    # same-direction flips in two elements whose index sum is odd: candidate
    # congruence 2j = j1 + j2 (mod 2**(64-b)) has no integer solution
    vals = np.zeros(100, np.float32)
    stored = checksum_block(vals)
    w = vals.view(np.uint32)
    w[3] ^= np.uint32(1 << 10)
    w[6] ^= np.uint32(1 << 10)
    out = locate_and_correct(vals, stored)
    assert out.status == "uncorrectable"


def test_isum_only_mismatch_uncorrectable():
    # swap two unequal words: sum unchanged, isum moved -> multi-corruption
    rng = np.random.default_rng(5)
    vals = rng.standard_normal(50).astype(np.float32)
    stored = checksum_block(vals)
    w = vals.view(np.uint32)
    w[2], w[9] = w[9].copy(), w[2].copy()
    assert not verify_block(vals, stored)  # permutation sensitivity
    out = locate_and_correct(vals, stored)
    assert out.status == "uncorrectable"


def test_localization_uniqueness_across_bits():
    # for every flip bit b and random j, exactly one candidate index solves
    # the congruence within the block length
    n = 1000
    rng = np.random.default_rng(6)
    for b in range(32):
        j = int(rng.integers(n))
        delta = 1 << b
        dsum = np.uint64(delta)
        disum = np.uint64((j * delta) & M64)
        idx = np.arange(n, dtype=np.uint64)
        cand = np.flatnonzero(idx * dsum == disum)
        assert cand.tolist() == [j]


def test_correct_then_verify_randomized_sweep():
    # acceptance-grade behavior at unit scale: detection + exact restoration
    rng = np.random.default_rng(7)
    for trial in range(300):
        n = int(rng.integers(1, 1001))
        vals = rng.standard_normal(n).astype(np.float32)
        pristine = vals.copy()
        stored = checksum_block(vals)
        e = int(rng.integers(n))
        bit = int(rng.integers(32))
        vals.view(np.uint32)[e] ^= np.uint32(1 << bit)
        out = locate_and_correct(vals, stored)
        assert out.status == "corrected"
        assert out.index == e
        assert np.array_equal(vals, pristine)


def test_correct_f64_split_stream():
    rng = np.random.default_rng(8)
    vals = rng.standard_normal(200)
    pristine = vals.copy()
    stored = checksum_block_f64(vals)
    vals.view(np.uint64)[11] ^= np.uint64(1 << 55)  # flips word index 23
    out = locate_and_correct_f64(vals, stored)
    assert out.status == "corrected"
    assert out.index == 23
    assert np.array_equal(vals, pristine)


def test_batch_checksums_match_scalar():
    rng = np.random.default_rng(9)
    stack = rng.integers(0, 1 << 32, size=(17, 125), dtype=np.uint32)
    sums, isums = checksum_blocks_batch(stack)
    for row in range(17):
        pair = checksum_words(stack[row])
        assert (int(sums[row]), int(isums[row])) == (pair.sum, pair.isum)


def test_wraparound_still_detects_and_corrects():
    # all-max words overflow 64-bit sums many times over; modular arithmetic
    # keeps detection and correction exact
    n = 4096
    vals = np.full(n, 0xFFFFFFFF, dtype=np.uint32)
    stored = checksum_words(vals)
    work = vals.copy()
    work[1234] ^= np.uint32(1 << 3)
    out = correct_words(work, stored)
    assert out.status == "corrected" and out.index == 1234
    assert np.array_equal(work, vals)


def test_pair_serialization_roundtrip():
    pair = ChecksumPair(0x0123456789ABCDEF, 0xFEDCBA9876543210)
    assert parse_pair(serialize_pair(pair)) == pair
