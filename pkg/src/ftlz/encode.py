"""Canonical Huffman coding, per-block bitstreams, pluggable lossless backends.

One global codebook covers every bin value occurring anywhere in the dataset
(plus the reserved bin 0). Construction is deterministic: heap ties break on
leaf symbol value then node creation order, and code words are assigned
canonically by (length, symbol). Bits are packed most-significant-bit first.
"""

from __future__ import annotations

import heapq
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import CorruptStream, InternalInvariantViolation, UnsupportedCodec

#: Longest supported code. The vectorized packer writes each code into an
#: 8-byte window, which caps length + intra-byte shift at 64 bits.
MAX_CODE_BITS = 57

_DECODE_TABLE_BITS = 16


def _huffman_lengths(freq: dict[int, int]) -> dict[int, int]:
    """Code length per symbol; deterministic tie-breaking."""
    symbols = sorted(freq)
    if not symbols:
        raise InternalInvariantViolation("empty frequency table")
    if len(symbols) == 1:
        return {symbols[0]: 1}
    # Heap entries: (weight, tiebreak, id). Leaves enter in symbol order, so
    # equal weights pop lowest-symbol first; merged nodes follow creation order.
    heap = []
    children: dict[int, tuple[int, int]] = {}
    for tie, sym in enumerate(symbols):
        heapq.heappush(heap, (freq[sym], tie, sym))
    next_id = len(symbols)
    node_base = 1 << 32  # node ids above any symbol value
    while len(heap) > 1:
        w1, t1, n1 = heapq.heappop(heap)
        w2, t2, n2 = heapq.heappop(heap)
        node = node_base + next_id
        children[node] = (n1, n2)
        heapq.heappush(heap, (w1 + w2, next_id, node))
        next_id += 1
    lengths: dict[int, int] = {}
    stack = [(heap[0][2], 0)]
    while stack:
        node, depth = stack.pop()
        if node in children:
            a, b = children[node]
            stack.append((a, depth + 1))
            stack.append((b, depth + 1))
        else:
            lengths[node] = depth
    return lengths


def _canonical_codes(lengths: dict[int, int]) -> dict[int, int]:
    """Assign canonical code words ordered by (length, symbol)."""
    code = 0
    prev_len = 0
    codes: dict[int, int] = {}
    for length, sym in sorted((l, s) for s, l in lengths.items()):
        code <<= length - prev_len
        codes[sym] = code
        code += 1
        prev_len = length
    return codes


@dataclass(frozen=True)
class HuffmanCodebook:
    """Canonical prefix code: symbol -> (code word, length)."""

    lengths: dict[int, int]
    codes: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.codes:
            object.__setattr__(self, "codes", _canonical_codes(self.lengths))
        worst = max(self.lengths.values())
        if worst > MAX_CODE_BITS:
            raise InternalInvariantViolation(
                f"code length {worst} exceeds cap {MAX_CODE_BITS}"
            )

    @classmethod
    def from_lengths(cls, lengths: dict[int, int]) -> "HuffmanCodebook":
        return cls(dict(lengths))

    def kraft_sum(self) -> float:
        return sum(2.0 ** -l for l in self.lengths.values())

    def luts(self) -> tuple[np.ndarray, np.ndarray]:
        """(length, code) lookup arrays indexed by symbol, 0 length = absent."""
        size = max(self.lengths) + 1
        lut_len = np.zeros(size, dtype=np.uint64)
        lut_code = np.zeros(size, dtype=np.uint64)
        for sym, l in self.lengths.items():
            lut_len[sym] = l
            lut_code[sym] = self.codes[sym]
        return lut_len, lut_code


def build_codebook(freq: dict[int, int]) -> HuffmanCodebook:
    """Canonical Huffman codebook for a frequency table.

    Symbols with zero recorded frequency still receive codes (the pipeline
    always registers bin 0). A single-symbol alphabet gets a 1-bit code.
    """
    return HuffmanCodebook(_huffman_lengths(freq))


def encode_symbols(bins: np.ndarray, book: HuffmanCodebook, bit_offsets: np.ndarray, out: np.ndarray) -> None:
    """Scatter the codes for `bins` into `out` at the given bit offsets.

    `out` must be zeroed and at least 8 bytes longer than the last code's end.
    Offsets must be non-overlapping and presorted; bitwise OR merges lanes.
    """
    lut_len, lut_code = book.luts()
    if bins.size == 0:
        return
    if int(bins.max()) >= lut_len.size:
        raise InternalInvariantViolation("symbol outside codebook")
    bit_offsets = bit_offsets.astype(np.uint64, copy=False)
    lens = lut_len[bins]
    if np.any(lens == 0):
        raise InternalInvariantViolation("symbol outside codebook")
    codes = lut_code[bins]
    shift = np.uint64(64) - (bit_offsets & np.uint64(7)) - lens
    vals = codes << shift
    byte_pos = (bit_offsets >> np.uint64(3)).astype(np.int64)
    for lane in range(8):
        lane_bytes = ((vals >> np.uint64(56 - 8 * lane)) & np.uint64(0xFF)).astype(
            np.uint8
        )
        np.bitwise_or.at(out, byte_pos + lane, lane_bytes)


def symbol_bit_lengths(bins: np.ndarray, book: HuffmanCodebook) -> np.ndarray:
    """Code length (uint64) of every symbol in `bins`."""
    lut_len, _ = book.luts()
    if bins.size and int(bins.max()) >= lut_len.size:
        raise InternalInvariantViolation("symbol outside codebook")
    lens = lut_len[bins]
    if np.any(lens == 0):
        raise InternalInvariantViolation("symbol outside codebook")
    return lens


def encode_block(bins: np.ndarray, book: HuffmanCodebook) -> tuple[bytes, int]:
    """Bitstream for one block: (packed bytes, exact bit length)."""
    bins = np.ascontiguousarray(bins, dtype=np.uint32)
    if bins.size == 0:
        return b"", 0
    lens = symbol_bit_lengths(bins, book)
    offsets = np.zeros(bins.size, dtype=np.uint64)
    np.cumsum(lens[:-1], out=offsets[1:])
    total = int(lens.sum())
    out = np.zeros((total + 7) // 8 + 8, dtype=np.uint8)
    encode_symbols(bins, book, offsets, out)
    return out[: (total + 7) // 8].tobytes(), total


class _Decoder:
    """Table-accelerated canonical Huffman decoder."""

    def __init__(self, book: HuffmanCodebook):
        self.max_len = max(book.lengths.values())
        table_bits = min(_DECODE_TABLE_BITS, max(self.max_len, 1))
        self.table_bits = table_bits
        # packed entry: (symbol << 6) | length; 0 = invalid/escape
        self.table = [0] * (1 << table_bits)
        by_len: dict[int, list[int]] = {}
        for sym, l in book.lengths.items():
            by_len.setdefault(l, []).append(sym)
        for l, syms in by_len.items():
            if l > table_bits:
                continue
            for sym in syms:
                code = book.codes[sym]
                base = code << (table_bits - l)
                for e in range(base, base + (1 << (table_bits - l))):
                    self.table[e] = (sym << 6) | l
        # slow path: canonical (first_code, first_index) per length
        self.long_syms: dict[int, list[int]] = {}
        self.long_first: dict[int, int] = {}
        for l in sorted(by_len):
            if l <= table_bits:
                continue
            syms = sorted(by_len[l])
            self.long_syms[l] = syms
            self.long_first[l] = min(book.codes[s] for s in syms)

    def decode(self, data: bytes, bit_offset: int, bit_length: int, count: int) -> np.ndarray:
        """Decode exactly `count` symbols from a bit slice.

        Raises CorruptStream when the walk leaves the code space or does not
        consume exactly `bit_length` bits; never crashes on corrupted input.
        Runs a sliding accumulator of at most table_bits + 64 bits, so each
        symbol costs O(1) regardless of block size.
        """
        if count == 0:
            if bit_length != 0:
                raise CorruptStream("empty block with nonzero bit length")
            return np.empty(0, dtype=np.uint32)
        first_byte = bit_offset >> 3
        last_byte = (bit_offset + bit_length + 7) >> 3
        if last_byte > len(data):
            raise CorruptStream("bit slice extends past payload end")
        chunk = data[first_byte:last_byte] + b"\x00" * 16
        consumed = 0  # bits consumed relative to bit_offset
        table = self.table
        tb = self.table_bits
        need = max(tb, self.max_len)
        out = [0] * count
        skip = bit_offset & 7  # leading bits of the first byte belong elsewhere
        acc = chunk[0] & (0xFF >> skip)
        nbits = 8 - skip
        byte_idx = 1
        for idx in range(count):
            if consumed > bit_length:
                raise CorruptStream("code ran past block boundary")
            while nbits < need:
                acc = (acc << 8) | chunk[byte_idx]
                byte_idx += 1
                nbits += 8
            window = (acc >> (nbits - tb)) & ((1 << tb) - 1)
            entry = table[window]
            if entry:
                l = entry & 63
                out[idx] = entry >> 6
            else:
                # escape: walk lengths above table_bits canonically
                sym = None
                for l in sorted(self.long_syms):
                    code = (acc >> (nbits - l)) & ((1 << l) - 1)
                    rank = code - self.long_first[l]
                    syms = self.long_syms[l]
                    if 0 <= rank < len(syms):
                        sym = syms[rank]
                        break
                if sym is None:
                    raise CorruptStream("bit pattern outside Huffman code space")
                out[idx] = sym
            consumed += l
            nbits -= l
            acc &= (1 << nbits) - 1
        if consumed != bit_length:
            raise CorruptStream(
                f"block consumed {consumed} bits, expected {bit_length}"
            )
        return np.array(out, dtype=np.uint32)


def decode_block(
    data: bytes,
    book: HuffmanCodebook,
    count: int,
    bit_offset: int = 0,
    bit_length: int | None = None,
    decoder: _Decoder | None = None,
) -> np.ndarray:
    """Decode `count` symbols of one block from `data`; padding bits ignored.

    `bit_length` defaults to all bits from `bit_offset` to the end of `data`.
    """
    if bit_length is None:
        bit_length = len(data) * 8 - bit_offset
    dec = decoder if decoder is not None else _Decoder(book)
    return dec.decode(data, bit_offset, bit_length, count)


# ---------------------------------------------------------------------------
# Pluggable lossless backends. Codec 0 (identity) is the reference codec the
# acceptance suite runs against; others plug in behind the same id byte.
# ---------------------------------------------------------------------------

CODEC_IDENTITY = 0
CODEC_RLE = 1
CODEC_ZLIB = 2


def _rle_apply(data: bytes) -> bytes:
    out = bytearray()
    i = 0
    n = len(data)
    while i < n:
        b = data[i]
        run = 1
        while run < 255 and i + run < n and data[i + run] == b:
            run += 1
        out.append(run)
        out.append(b)
        i += run
    return bytes(out)


def _rle_invert(data: bytes) -> bytes:
    if len(data) % 2:
        raise CorruptStream("run-length stream has odd length")
    out = bytearray()
    for i in range(0, len(data), 2):
        run = data[i]
        if run == 0:
            raise CorruptStream("run-length stream has zero-length run")
        out.extend(data[i + 1 : i + 2] * run)
    return bytes(out)


def _zlib_invert(data: bytes) -> bytes:
    try:
        return zlib.decompress(data)
    except zlib.error as exc:
        raise CorruptStream(f"zlib stream damaged: {exc}") from exc


_CODECS: dict[int, tuple[str, object, object]] = {}


def register_codec(codec_id: int, name: str, apply_fn, invert_fn) -> None:
    _CODECS[int(codec_id)] = (name, apply_fn, invert_fn)


register_codec(CODEC_IDENTITY, "identity", lambda d: bytes(d), lambda d: bytes(d))
register_codec(CODEC_RLE, "rle", _rle_apply, _rle_invert)
register_codec(CODEC_ZLIB, "zlib", lambda d: zlib.compress(d, 6), _zlib_invert)


def codec_name(codec_id: int) -> str:
    try:
        return _CODECS[int(codec_id)][0]
    except KeyError:
        raise UnsupportedCodec(f"codec {codec_id} is not registered") from None


def backend_apply(data: bytes, codec_id: int) -> bytes:
    try:
        fn = _CODECS[int(codec_id)][1]
    except KeyError:
        raise UnsupportedCodec(f"codec {codec_id} is not registered") from None
    return fn(data)


def backend_invert(data: bytes, codec_id: int) -> bytes:
    try:
        fn = _CODECS[int(codec_id)][2]
    except KeyError:
        raise UnsupportedCodec(f"codec {codec_id} is not registered") from None
    return fn(data)
