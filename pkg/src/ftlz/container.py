"""Byte-exact container for compressed streams.

Layout (all integers little-endian):

    magic        4s   = "FTLZ"
    version      u8   = 1
    codec        u8
    dims         3xu64
    block_edge   u32
    eb_mode      u8   (0 = absolute, 1 = value-range relative)
    eb_value     f64  (resolved absolute bound used by the quantizer)
    bin_capacity u32
    block_count  u64
    block table, per block in canonical order:
        indicator     u8  (0 = Lorenzo, 1 = regression)
        coefficients  4xf32, present only when indicator = 1
        unpred_count  u32
        bit_length    u32
    codebook: symbol_count u32, then (symbol u32, length u8) pairs sorted by
        symbol; canonical code words are reconstructed from lengths
    payload: stored_len u64, then the backend-compressed Huffman payload;
        block bit slices are consecutive (offset = running bit_length sum)
    unpredictable section: raw u32 words, concatenated per block in canonical
        order (counts live in the block table)
    sum_dc section: raw_len u64, stored_len u64, then the backend-compressed
        per-block decompressed-data checksums (8 bytes per block; raw_len 0
        when the stream was written without them)

Any malformed or truncated input parses to CorruptStream with the offending
offset; a flipped payload bit can only affect the one block whose bit slice
contains it.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import BLOCK_EDGE_MAX, BLOCK_EDGE_MIN, EB_ABSOLUTE, EB_RELATIVE
from .encode import backend_apply, backend_invert
from .errors import CorruptStream
from .predict import PredictorKind, RegressionCoeffs

MAGIC = b"FTLZ"
VERSION = 1

EB_MODE_CODES = {EB_ABSOLUTE: 0, EB_RELATIVE: 1}
EB_MODE_NAMES = {v: k for k, v in EB_MODE_CODES.items()}

_HEADER = struct.Struct("<4sBBQQQIBdIQ")


@dataclass(frozen=True)
class BlockRecord:
    """Per-block metadata. Coefficients are kept as their 16 raw bytes so the
    record round-trips bit-exactly; sum_dc is None in unprotected streams."""

    predictor: int
    coeff_bytes: Optional[bytes]
    unpred_count: int
    bit_length: int
    sum_dc: Optional[int]

    def coeffs(self) -> Optional[RegressionCoeffs]:
        if self.coeff_bytes is None:
            return None
        return RegressionCoeffs.from_array(np.frombuffer(self.coeff_bytes, "<f4"))


@dataclass(frozen=True)
class CompressedStream:
    """Parsed in-memory form of an archive; payload is backend-inverted."""

    dims: tuple[int, int, int]
    block_edge: int
    eb_mode: str
    eb_value: float
    codec_id: int
    bin_capacity: int
    records: tuple[BlockRecord, ...]
    code_lengths: dict[int, int]
    payload: bytes
    unpred_words: bytes
    stored_size: Optional[int] = field(default=None, compare=False)

    def bit_offsets(self) -> list[int]:
        offs = [0] * (len(self.records) + 1)
        for i, rec in enumerate(self.records):
            offs[i + 1] = offs[i] + rec.bit_length
        return offs

    def unpred_offsets(self) -> list[int]:
        offs = [0] * (len(self.records) + 1)
        for i, rec in enumerate(self.records):
            offs[i + 1] = offs[i] + rec.unpred_count
        return offs

    def unpred_array(self) -> np.ndarray:
        return np.frombuffer(self.unpred_words, dtype="<u4")

    def has_sum_dc(self) -> bool:
        return self.records and self.records[0].sum_dc is not None


def serialize(stream: CompressedStream) -> bytes:
    """Serialize a stream; parse(serialize(s)) == s (modulo stored_size)."""
    out = bytearray()
    out += _HEADER.pack(
        MAGIC,
        VERSION,
        stream.codec_id,
        stream.dims[0],
        stream.dims[1],
        stream.dims[2],
        stream.block_edge,
        EB_MODE_CODES[stream.eb_mode],
        stream.eb_value,
        stream.bin_capacity,
        len(stream.records),
    )
    for rec in stream.records:
        out.append(rec.predictor)
        if rec.predictor == PredictorKind.REGRESSION:
            assert rec.coeff_bytes is not None and len(rec.coeff_bytes) == 16
            out += rec.coeff_bytes
        out += struct.pack("<II", rec.unpred_count, rec.bit_length)
    out += struct.pack("<I", len(stream.code_lengths))
    for sym in sorted(stream.code_lengths):
        out += struct.pack("<IB", sym, stream.code_lengths[sym])
    stored_payload = backend_apply(stream.payload, stream.codec_id)
    out += struct.pack("<Q", len(stored_payload))
    out += stored_payload
    out += stream.unpred_words
    if stream.has_sum_dc():
        raw = b"".join(
            rec.sum_dc.to_bytes(8, "little") for rec in stream.records
        )
        stored = backend_apply(raw, stream.codec_id)
        out += struct.pack("<QQ", len(raw), len(stored))
        out += stored
    else:
        out += struct.pack("<QQ", 0, 0)
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise CorruptStream(f"truncated while reading {what}", offset=self.pos)
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, st: struct.Struct, what: str):
        return st.unpack(self.take(st.size, what))


_REC_TAIL = struct.Struct("<II")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")
_SYM = struct.Struct("<IB")
_LENS2 = struct.Struct("<QQ")


def parse(data: bytes) -> CompressedStream:
    """Parse and validate an archive. Bad magic, version, truncation, or any
    structurally impossible field raises CorruptStream with an offset."""
    r = _Reader(data)
    (
        magic,
        version,
        codec_id,
        nx,
        ny,
        nz,
        block_edge,
        eb_mode_code,
        eb_value,
        bin_capacity,
        block_count,
    ) = r.unpack(_HEADER, "header")
    if magic != MAGIC:
        raise CorruptStream(f"bad magic {magic!r}", offset=0)
    if version != VERSION:
        raise CorruptStream(f"unsupported version {version}", offset=4)
    if min(nx, ny, nz) < 1:
        raise CorruptStream(f"bad dims {(nx, ny, nz)}", offset=6)
    if not (BLOCK_EDGE_MIN <= block_edge <= BLOCK_EDGE_MAX):
        raise CorruptStream(f"bad block edge {block_edge}", offset=30)
    if eb_mode_code not in EB_MODE_NAMES:
        raise CorruptStream(f"bad error-bound mode {eb_mode_code}", offset=34)
    if not (eb_value > 0.0 and math.isfinite(eb_value)):
        raise CorruptStream(f"bad error bound {eb_value}", offset=35)
    if bin_capacity < 4 or bin_capacity & (bin_capacity - 1):
        raise CorruptStream(f"bad bin capacity {bin_capacity}", offset=43)
    expected_blocks = 1
    for d in (nx, ny, nz):
        expected_blocks *= -(-d // block_edge)
    if block_count != expected_blocks:
        raise CorruptStream(
            f"block count {block_count} does not match dims", offset=47
        )

    records = []
    for _ in range(block_count):
        (indicator,) = r.take(1, "block indicator")
        if indicator not in (0, 1):
            raise CorruptStream(f"bad predictor indicator {indicator}", offset=r.pos - 1)
        coeff_bytes = bytes(r.take(16, "regression coefficients")) if indicator else None
        unpred_count, bit_length = r.unpack(_REC_TAIL, "block record")
        records.append(BlockRecord(indicator, coeff_bytes, unpred_count, bit_length, None))

    (symbol_count,) = r.unpack(_U32, "codebook size")
    code_lengths: dict[int, int] = {}
    prev_sym = -1
    for _ in range(symbol_count):
        sym, length = r.unpack(_SYM, "codebook entry")
        if sym <= prev_sym:
            raise CorruptStream("codebook symbols not strictly increasing", offset=r.pos - 5)
        if sym >= bin_capacity:
            raise CorruptStream(f"codebook symbol {sym} outside bin range", offset=r.pos - 5)
        if not (1 <= length <= 57):
            raise CorruptStream(f"bad code length {length}", offset=r.pos - 1)
        code_lengths[sym] = length
        prev_sym = sym
    if symbol_count == 0:
        raise CorruptStream("empty codebook", offset=r.pos)
    kraft = sum(2 ** (57 - l) for l in code_lengths.values())
    if kraft > (1 << 57):
        raise CorruptStream("codebook violates Kraft inequality", offset=r.pos)

    (stored_len,) = r.unpack(_U64, "payload length")
    payload = backend_invert(bytes(r.take(stored_len, "payload")), codec_id)
    total_bits = sum(rec.bit_length for rec in records)
    if total_bits > 8 * len(payload):
        raise CorruptStream("block bit lengths exceed payload", offset=r.pos)

    total_unpred = sum(rec.unpred_count for rec in records)
    unpred_words = bytes(r.take(4 * total_unpred, "unpredictable words"))

    raw_len, sum_stored_len = r.unpack(_LENS2, "checksum section lengths")
    if raw_len not in (0, 8 * block_count):
        raise CorruptStream(f"bad checksum section length {raw_len}", offset=r.pos - 16)
    if raw_len:
        raw = backend_invert(bytes(r.take(sum_stored_len, "checksum section")), codec_id)
        if len(raw) != raw_len:
            raise CorruptStream("checksum section length mismatch", offset=r.pos)
        sums = np.frombuffer(raw, dtype="<u8")
        records = [
            BlockRecord(
                rec.predictor,
                rec.coeff_bytes,
                rec.unpred_count,
                rec.bit_length,
                int(sums[i]),
            )
            for i, rec in enumerate(records)
        ]
    elif sum_stored_len:
        raise CorruptStream("orphan checksum payload", offset=r.pos - 8)

    if r.pos != len(data):
        raise CorruptStream(f"{len(data) - r.pos} trailing bytes", offset=r.pos)

    return CompressedStream(
        dims=(nx, ny, nz),
        block_edge=block_edge,
        eb_mode=EB_MODE_NAMES[eb_mode_code],
        eb_value=eb_value,
        codec_id=codec_id,
        bin_capacity=bin_capacity,
        records=tuple(records),
        code_lengths=code_lengths,
        payload=payload,
        unpred_words=unpred_words,
        stored_size=len(data),
    )
