import numpy as np
import pytest

from ftlz.container import BlockRecord, CompressedStream, parse, serialize
from ftlz.core import ErrorBound, synth_field
from ftlz.encode import CODEC_RLE, CODEC_ZLIB
from ftlz.errors import CorruptStream
from ftlz.pipeline import FtConfig, compress


def small_stream(codec_id=0, ft=True) -> CompressedStream:
    field = synth_field("mixed", (12, 9, 7), seed=21)
    cfg = (
        FtConfig.protected(block_edge=4, codec_id=codec_id)
        if ft
        else FtConfig.unprotected(block_edge=4, codec_id=codec_id)
    )
    stream, _ = compress(field, ErrorBound.absolute(1e-3), cfg)
    return stream


def test_roundtrip_identity_codec():
    s = small_stream()
    assert parse(serialize(s)) == s


def test_roundtrip_backend_codecs():
    for codec in (CODEC_RLE, CODEC_ZLIB):
        s = small_stream(codec_id=codec)
        assert parse(serialize(s)) == s


def test_roundtrip_without_sum_dc():
    s = small_stream(ft=False)
    assert not s.has_sum_dc()
    assert parse(serialize(s)) == s


def test_header_fields_roundtrip():
    s = small_stream()
    t = parse(serialize(s))
    assert t.dims == (12, 9, 7)
    assert t.block_edge == 4
    assert t.eb_mode == "absolute"
    assert t.eb_value == 1e-3
    assert t.bin_capacity == 65536


def test_bad_magic_and_version():
    data = bytearray(serialize(small_stream()))
    bad = bytes(b"XXXX") + bytes(data[4:])
    with pytest.raises(CorruptStream):
        parse(bad)
    data[4] = 99
    with pytest.raises(CorruptStream):
        parse(bytes(data))


def test_truncation_sweep_every_byte():
    data = serialize(small_stream())
    for cut in range(len(data)):
        with pytest.raises(CorruptStream):
            parse(data[:cut])


def test_trailing_garbage_rejected():
    data = serialize(small_stream())
    with pytest.raises(CorruptStream):
        parse(data + b"\x00")


def test_block_count_must_match_dims():
    data = bytearray(serialize(small_stream()))
    # block_count lives in the last 8 header bytes (offset 47)
    data[47:55] = (999).to_bytes(8, "little")
    with pytest.raises(CorruptStream):
        parse(bytes(data))


def test_bit_offsets_and_unpred_offsets():
    s = small_stream()
    offs = s.bit_offsets()
    assert offs[0] == 0
    assert offs[-1] == sum(r.bit_length for r in s.records)
    uoffs = s.unpred_offsets()
    assert uoffs[-1] == sum(r.unpred_count for r in s.records)
    assert len(s.unpred_words) == 4 * uoffs[-1]


def test_sum_dc_overhead_is_8_bytes_per_block():
    f = synth_field("sine", (20, 20, 20), seed=2)
    on, _ = compress(f, ErrorBound.absolute(1e-3), FtConfig.protected(block_edge=10))
    off, _ = compress(f, ErrorBound.absolute(1e-3), FtConfig.unprotected(block_edge=10))
    assert len(serialize(on)) - len(serialize(off)) == 8 * len(on.records)


def test_record_coeff_bytes_only_for_regression():
    s = small_stream()
    for rec in s.records:
        if rec.predictor == 1:
            assert rec.coeff_bytes is not None and len(rec.coeff_bytes) == 16
            assert rec.coeffs() is not None
        else:
            assert rec.coeff_bytes is None


def test_block_record_is_value_object():
    a = BlockRecord(0, None, 3, 17, 5)
    b = BlockRecord(0, None, 3, 17, 5)
    assert a == b


def test_parse_rejects_oversized_codebook_symbol():
    s = small_stream()
    lengths = dict(s.code_lengths)
    lengths[1 << 20] = max(lengths.values())
    bad = CompressedStream(
        dims=s.dims,
        block_edge=s.block_edge,
        eb_mode=s.eb_mode,
        eb_value=s.eb_value,
        codec_id=s.codec_id,
        bin_capacity=s.bin_capacity,
        records=s.records,
        code_lengths=lengths,
        payload=s.payload,
        unpred_words=s.unpred_words,
    )
    with pytest.raises(CorruptStream):
        parse(serialize(bad))
