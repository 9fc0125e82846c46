"""Fault-tolerant compression and decompression pipelines.

Compression stages, in order:
  (a) per block: fit regression coefficients, checksum the input block
  (b) per block: estimate both predictors on a sample, pick one
  (c) per block: verify/correct the input, predict (duplicated), quantize,
      reconstruct (duplicated), double-check against the bound, finalize the
      bin array, checksum it, and accumulate the decompressed-data checksum
  (d) build the global codebook, verify/correct each bin array, encode
  (e) apply the backend codec and assemble the container

Decompression decodes and reconstructs every block, then compares each
block's decompressed-data checksum with the stored one; a mismatching block
is re-executed once via random access, and a second mismatch is terminal
(the output is withheld and the report says the SDC happened upstream).

Blocks are processed in batches grouped by extent. All per-point arithmetic
is elementwise (float64 operands, fixed operand order, float32 stored
values), so batch size, worker count, and compress/decompress direction all
produce bit-identical values. Lorenzo blocks run as a wavefront over
constant i+j+k planes: every neighbor of a plane lies in an earlier plane,
which preserves the sequential predict-from-reconstructed semantics.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import hooks
from .checksum import checksum_blocks_batch, checksum_words, correct_words, float_words
from .container import BlockRecord, CompressedStream
from .core import (
    DEFAULT_BLOCK_EDGE,
    BlockGrid,
    ErrorBound,
    Field,
    partition,
    resolve_error_bound,
)
from .encode import (
    CODEC_IDENTITY,
    HuffmanCodebook,
    _Decoder,
    build_codebook,
    encode_symbols,
    symbol_bit_lengths,
)
from .errors import (
    CorruptStream,
    InternalInvariantViolation,
    InvalidArgument,
    InvalidRegion,
    UncorrectableCorruption,
)
from .predict import (
    PredictorKind,
    fit_regression_batch,
    sample_select_batch,
)
from .quantize import QuantConfig

STATUS_CLEAN = "clean"
STATUS_CORRECTED = "corrected"
STATUS_SDC = "sdc_in_compression"


@dataclass(frozen=True)
class FtConfig:
    """Protection switches plus the compressor geometry they apply to.

    With every flag off the pipeline degenerates to the unprotected
    independent-block compressor (the rsz baseline).
    """

    protect_input: bool = True
    protect_bins: bool = True
    duplicate_eval: bool = True
    store_sum_dc: bool = True
    block_edge: int = DEFAULT_BLOCK_EDGE
    codec_id: int = CODEC_IDENTITY
    quant: QuantConfig = field(default_factory=QuantConfig)

    @classmethod
    def protected(cls, **kw) -> "FtConfig":
        return cls(**kw)

    @classmethod
    def unprotected(cls, **kw) -> "FtConfig":
        return cls(
            protect_input=False,
            protect_bins=False,
            duplicate_eval=False,
            store_sum_dc=False,
            **kw,
        )


@dataclass
class FtReport:
    """Per-block fault-tolerance events observed during one pipeline run."""

    input_corrected: list = field(default_factory=list)
    bins_corrected: list = field(default_factory=list)
    dup_mismatch_resolved: list = field(default_factory=list)
    decomp_block_reexecuted: list = field(default_factory=list)
    sdc_in_compression: bool = False
    detail: str = ""

    @property
    def status(self) -> str:
        if self.sdc_in_compression:
            return STATUS_SDC
        if (
            self.input_corrected
            or self.bins_corrected
            or self.dup_mismatch_resolved
            or self.decomp_block_reexecuted
        ):
            return STATUS_CORRECTED
        return STATUS_CLEAN

    def _normalize(self) -> "FtReport":
        # canonical event order, so reports are identical for any worker count
        self.input_corrected.sort()
        self.bins_corrected.sort()
        self.dup_mismatch_resolved.sort()
        self.decomp_block_reexecuted.sort()
        return self

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "input_corrected": list(self.input_corrected),
            "bins_corrected": list(self.bins_corrected),
            "dup_mismatch_resolved": list(self.dup_mismatch_resolved),
            "decomp_block_reexecuted": list(self.decomp_block_reexecuted),
            "detail": self.detail,
        }


@dataclass(frozen=True)
class DupResult:
    value: np.ndarray
    mismatch: bool
    disagree: Optional[np.ndarray]  # per-element True where all three differ


def _bit_view(arr: np.ndarray) -> np.ndarray:
    kind = {8: np.uint64, 4: np.uint32}[arr.dtype.itemsize]
    return np.ascontiguousarray(arr).view(kind)


def duplicated_eval(fn: Callable[[], np.ndarray], enabled: bool = True, tag: str = "value") -> DupResult:
    """Evaluate `fn` with instruction duplication and 2-of-3 voting.

    `fn` must be deterministic over its inputs; it is called a second time and
    the results compared bit for bit (NaN-safe). On mismatch a third
    evaluation votes per element; elements where all three disagree are
    flagged for the caller to demote (compression) or re-execute
    (decompression). Fault-free, the result is bit-equal to one evaluation.
    """
    a = hooks.fire(hooks.STAGE_DUP_EVAL, tag, 1, fn())
    if not enabled:
        return DupResult(a, False, None)
    b = hooks.fire(hooks.STAGE_DUP_EVAL, tag, 2, fn())
    eq_ab = _bit_view(a) == _bit_view(b)
    if eq_ab.all():
        return DupResult(a, False, None)
    c = hooks.fire(hooks.STAGE_DUP_EVAL, tag, 3, fn())
    bits_c = _bit_view(c)
    eq_bc = _bit_view(b) == bits_c
    eq_ac = _bit_view(a) == bits_c
    value = np.where((eq_ab | eq_ac).reshape(a.shape), a, b)
    disagree = ~(eq_ab | eq_bc | eq_ac)
    return DupResult(value, True, disagree.reshape(a.shape))


def cr_decrease_bound(r0: float, n_blocks: int) -> float:
    """Worst-case compression-ratio decrease (percent) when one block's
    compression is ruined: (r0 - 1) / (r0 + n - 1) * 100."""
    if not r0 >= 1.0:
        raise InvalidArgument(f"baseline ratio must be >= 1, got {r0}")
    if n_blocks < 1:
        raise InvalidArgument(f"block count must be >= 1, got {n_blocks}")
    return (r0 - 1.0) / (r0 + n_blocks - 1.0) * 100.0


# ---------------------------------------------------------------------------
# shared batched geometry helpers
# ---------------------------------------------------------------------------

_WAVEFRONT_CACHE: dict = {}


def _wavefronts(extent) -> list:
    """Index arrays (ii, jj, kk) for each constant-(i+j+k) plane of a block."""
    got = _WAVEFRONT_CACHE.get(extent)
    if got is not None:
        return got
    bx, by, bz = extent
    ii, jj, kk = np.indices(extent)
    s = (ii + jj + kk).reshape(-1)
    ii, jj, kk = ii.reshape(-1), jj.reshape(-1), kk.reshape(-1)
    fronts = []
    for v in range(bx + by + bz - 2):
        sel = np.flatnonzero(s == v)
        fronts.append((ii[sel], jj[sel], kk[sel]))
    _WAVEFRONT_CACHE[extent] = fronts
    return fronts


def _group_blocks(grid: BlockGrid) -> list:
    """Blocks grouped by extent: list of (extent, block-index array)."""
    by_extent: dict = {}
    for spec in grid.blocks:
        by_extent.setdefault(spec.extent, []).append(spec.block_index)
    return [
        (extent, np.array(ids, dtype=np.int64))
        for extent, ids in sorted(by_extent.items())
    ]


def _gather(values: np.ndarray, grid: BlockGrid, ids: np.ndarray, extent) -> np.ndarray:
    out = np.empty((len(ids), *extent), dtype=values.dtype)
    for row, b in enumerate(ids):
        out[row] = values[grid.blocks[b].slices()]
    return out


def _run_units(units: list, threads: int) -> None:
    """Execute closures; each writes to disjoint preallocated slots, so the
    result is identical for any worker count."""
    if threads <= 1 or len(units) <= 1:
        for u in units:
            u()
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for f in [pool.submit(u) for u in units]:
            f.result()


def _lorenzo_gather(p: np.ndarray, ii, jj, kk) -> np.ndarray:
    """Canonical-order Lorenzo sum over the padded float64 recon buffer."""
    return (
        p[:, ii, jj + 1, kk + 1]
        + p[:, ii + 1, jj, kk + 1]
        + p[:, ii + 1, jj + 1, kk]
        - p[:, ii, jj, kk + 1]
        - p[:, ii, jj + 1, kk]
        - p[:, ii + 1, jj, kk]
        + p[:, ii, jj, kk]
    )


def _regression_grid_batch(coeffs: np.ndarray, extent) -> np.ndarray:
    """Affine predictions for a block stack, canonical operand order."""
    b0 = coeffs[:, 0].astype(np.float64).reshape(-1, 1, 1, 1)
    b1 = coeffs[:, 1].astype(np.float64).reshape(-1, 1, 1, 1)
    b2 = coeffs[:, 2].astype(np.float64).reshape(-1, 1, 1, 1)
    b3 = coeffs[:, 3].astype(np.float64).reshape(-1, 1, 1, 1)
    i = np.arange(extent[0], dtype=np.float64).reshape(1, -1, 1, 1)
    j = np.arange(extent[1], dtype=np.float64).reshape(1, 1, -1, 1)
    k = np.arange(extent[2], dtype=np.float64).reshape(1, 1, 1, -1)
    return ((b0 + b1 * i) + b2 * j) + b3 * k


def _quantize_batch(diff: np.ndarray, eb: float, quant: QuantConfig):
    """Vectorized linear-scaling quantization (matches quantize.quantize_diff)."""
    half_steps = np.abs(diff) / (2.0 * eb)
    small = half_steps <= 2.0 * quant.bin_capacity
    q = np.floor(np.where(small, half_steps, 0.0) + 0.5)
    q = np.where(diff < 0, -q, q)
    b = quant.center + q
    ok = small & (b >= 1) & (b <= quant.bin_capacity - 1)
    return np.where(ok, b, 0.0).astype(np.uint32), ok


# ---------------------------------------------------------------------------
# compression
# ---------------------------------------------------------------------------


def compress(
    field: Field,
    eb_spec: ErrorBound,
    cfg: FtConfig = FtConfig(),
    threads: int = 1,
    predictor_override=None,
) -> tuple[CompressedStream, FtReport]:
    """Compress a field under an error bound with the configured protection.

    `predictor_override` (testing knob) maps block index -> PredictorKind and
    overrides the sampled selection for those blocks; any forced choice still
    yields error-bounded output.

    Raises UncorrectableCorruption when a protected array fails verification
    in a way one word cannot explain (error model exceeded).
    """
    eb = resolve_error_bound(eb_spec, field)
    grid = partition(field.dims, cfg.block_edge)
    nb = len(grid.blocks)
    quant = cfg.quant
    report = FtReport()

    working = field.values.copy()
    groups = _group_blocks(grid)

    # stage (a): regression coefficients and input checksums, per block
    coeffs_all = np.empty((nb, 4), dtype=np.float32)
    in_sums = np.zeros(nb, dtype=np.uint64)
    in_isums = np.zeros(nb, dtype=np.uint64)

    def _stage_a(extent, ids):
        def unit():
            stack = _gather(working, grid, ids, extent)
            coeffs_all[ids] = fit_regression_batch(stack)
            if cfg.protect_input:
                words = stack.reshape(len(ids), -1).view(np.uint32)
                in_sums[ids], in_isums[ids] = checksum_blocks_batch(words)

        return unit

    _run_units([_stage_a(e, ids) for e, ids in groups], threads)
    hooks.fire(hooks.STAGE_COEFFS_FITTED, coeffs_all, grid)
    hooks.fire(hooks.STAGE_INPUT_AFTER_CHECKSUM, working, grid)

    def _verify_input(stack, ids, extent):
        words = stack.reshape(len(ids), -1).view(np.uint32)
        sums, isums = checksum_blocks_batch(words)
        bad = np.flatnonzero((sums != in_sums[ids]) | (isums != in_isums[ids]))
        for row in bad:
            b = int(ids[row])
            blk = np.ascontiguousarray(working[grid.blocks[b].slices()])
            outcome = correct_words(
                blk.view(np.uint32).reshape(-1),
                _pair(in_sums[b], in_isums[b]),
            )
            if outcome.status != "corrected":
                raise UncorrectableCorruption(
                    f"input block {b} failed verification beyond repair"
                )
            working[grid.blocks[b].slices()] = blk
            stack[row] = blk
            report.input_corrected.append(b)

    # stage (b): sampled predictor selection. The input is verified/corrected
    # here as well as before prediction: selection errors cannot break the
    # bound, but healing first keeps a corrected run's archive bit-identical
    # to the fault-free one.
    est_reg = np.empty(nb, dtype=np.float64)
    est_lor = np.empty(nb, dtype=np.float64)

    def _stage_b(extent, ids):
        def unit():
            stack = _gather(working, grid, ids, extent)
            if cfg.protect_input:
                _verify_input(stack, ids, extent)
            est_reg[ids], est_lor[ids] = sample_select_batch(stack, coeffs_all[ids])

        return unit

    _run_units([_stage_b(e, ids) for e, ids in groups], threads)
    hooks.fire(hooks.STAGE_ESTIMATES, est_reg, est_lor)
    indicators = np.where(
        est_reg < est_lor, int(PredictorKind.REGRESSION), int(PredictorKind.LORENZO)
    ).astype(np.uint8)
    if predictor_override is not None:
        for b, kind in predictor_override.items():
            indicators[b] = int(kind)

    # stage (c): verify/correct input, predict, quantize, reconstruct, check
    bins_flat: list = [None] * nb
    unpred: list = [None] * nb
    bin_sums = np.zeros(nb, dtype=np.uint64)
    bin_isums = np.zeros(nb, dtype=np.uint64)
    dc_sums = np.zeros(nb, dtype=np.uint64)

    def _compress_rows(stack, rows, ids, extent, kind):
        """Quantize a same-predictor subset of one extent group."""
        sub = stack[rows]
        n = len(rows)
        if n == 0:
            return
        sub64 = sub.astype(np.float64)
        dup_on = cfg.duplicate_eval
        if kind == PredictorKind.REGRESSION:
            coeffs = coeffs_all[ids[rows]]
            pred_r = duplicated_eval(
                lambda: _regression_grid_batch(coeffs, extent), dup_on, "predict"
            )
            diff = sub64 - pred_r.value
            bins3, ok = _quantize_batch(diff, eb, quant)
            if pred_r.disagree is not None:
                ok &= ~pred_r.disagree
            offs = bins3.astype(np.float64) - float(quant.center)
            dcmp_r = duplicated_eval(
                lambda: pred_r.value + (2.0 * eb) * offs, dup_on, "reconstruct"
            )
            if dcmp_r.disagree is not None:
                ok &= ~dcmp_r.disagree
            dcmp32 = dcmp_r.value.astype(np.float32)
            keep = ok & (np.abs(sub64 - dcmp32.astype(np.float64)) <= eb)
            bins3 = np.where(keep, bins3, np.uint32(0))
            recon32 = np.where(keep, dcmp32, sub)
            mism = pred_r.mismatch or dcmp_r.mismatch
        else:
            bx, by, bz = extent
            padded = np.zeros((n, bx + 1, by + 1, bz + 1), dtype=np.float64)
            bins3 = np.zeros((n, bx, by, bz), dtype=np.uint32)
            recon32 = np.empty((n, bx, by, bz), dtype=np.float32)
            mism = False
            for ii, jj, kk in _wavefronts(extent):
                pred_r = duplicated_eval(
                    lambda: _lorenzo_gather(padded, ii, jj, kk), dup_on, "predict"
                )
                ori_w = sub[:, ii, jj, kk].astype(np.float64)
                diff = ori_w - pred_r.value
                bins_w, ok = _quantize_batch(diff, eb, quant)
                if pred_r.disagree is not None:
                    ok &= ~pred_r.disagree
                offs = bins_w.astype(np.float64) - float(quant.center)
                dcmp_r = duplicated_eval(
                    lambda: pred_r.value + (2.0 * eb) * offs, dup_on, "reconstruct"
                )
                if dcmp_r.disagree is not None:
                    ok &= ~dcmp_r.disagree
                dcmp32 = dcmp_r.value.astype(np.float32)
                keep = ok & (np.abs(ori_w - dcmp32.astype(np.float64)) <= eb)
                bins_w = np.where(keep, bins_w, np.uint32(0))
                recon_w = np.where(keep, dcmp32, sub[:, ii, jj, kk])
                padded[:, ii + 1, jj + 1, kk + 1] = recon_w.astype(np.float64)
                bins3[:, ii, jj, kk] = bins_w
                recon32[:, ii, jj, kk] = recon_w
                mism = mism or pred_r.mismatch or dcmp_r.mismatch

        if mism:
            report.dup_mismatch_resolved.extend(int(b) for b in ids[rows])
        vol = extent[0] * extent[1] * extent[2]
        flat_bins = bins3.reshape(n, vol)
        s, si = checksum_blocks_batch(flat_bins)
        dc, _ = checksum_blocks_batch(recon32.reshape(n, vol).view(np.uint32))
        for row in range(n):
            b = int(ids[rows[row]])
            fb = flat_bins[row]
            bins_flat[b] = fb
            unpred[b] = float_words(sub[row])[fb == 0]
            bin_sums[b] = s[row]
            bin_isums[b] = si[row]
            dc_sums[b] = dc[row]

    def _stage_c(extent, ids):
        def unit():
            stack = _gather(working, grid, ids, extent)
            if cfg.protect_input:
                _verify_input(stack, ids, extent)
            kinds = indicators[ids]
            for kind in (PredictorKind.LORENZO, PredictorKind.REGRESSION):
                rows = np.flatnonzero(kinds == int(kind))
                _compress_rows(stack, rows, ids, extent, kind)

        return unit

    _run_units([_stage_c(e, ids) for e, ids in groups], threads)
    hooks.fire(hooks.STAGE_BINS_FINALIZED, bins_flat, grid)

    # stage (d): codebook over all blocks, verify/correct bins, encode
    corrected_bins: set = set()

    def _verify_bins(tag):
        for b in range(nb):
            outcome = correct_words(bins_flat[b], _pair(bin_sums[b], bin_isums[b]))
            if outcome.status == "uncorrectable":
                raise UncorrectableCorruption(
                    f"bin array of block {b} failed verification beyond repair ({tag})"
                )
            if outcome.status == "corrected" and b not in corrected_bins:
                corrected_bins.add(b)
                report.bins_corrected.append(b)

    if cfg.protect_bins:
        _verify_bins("histogram")
    all_bins = np.concatenate(bins_flat)
    if int(all_bins.max()) >= quant.bin_capacity:
        # only reachable with protection off: a corrupted bin outside the
        # quantizer range (the original implementation's segfault class)
        raise InternalInvariantViolation("bin index outside quantizer range")
    counts = np.bincount(all_bins, minlength=1)
    freq = {int(sym): int(c) for sym, c in enumerate(counts) if c or sym == 0}
    book = build_codebook(freq)
    if cfg.protect_bins:
        _verify_bins("encode")
        all_bins = np.concatenate(bins_flat)

    lens = symbol_bit_lengths(all_bins, book)
    sizes = np.array([len(bf) for bf in bins_flat], dtype=np.int64)
    starts = np.zeros(nb, dtype=np.int64)
    np.cumsum(sizes[:-1], out=starts[1:])
    bit_lengths = np.add.reduceat(lens, starts) if all_bins.size else np.zeros(nb, np.uint64)
    offsets = np.zeros(all_bins.size, dtype=np.uint64)
    if all_bins.size:
        np.cumsum(lens[:-1], out=offsets[1:])
    total_bits = int(lens.sum())
    payload_buf = np.zeros((total_bits + 7) // 8 + 8, dtype=np.uint8)
    encode_symbols(all_bins, book, offsets, payload_buf)
    payload = payload_buf[: (total_bits + 7) // 8].tobytes()

    records = []
    for b in range(nb):
        is_reg = indicators[b] == int(PredictorKind.REGRESSION)
        records.append(
            BlockRecord(
                predictor=int(indicators[b]),
                coeff_bytes=coeffs_all[b].astype("<f4").tobytes() if is_reg else None,
                unpred_count=int(unpred[b].size),
                bit_length=int(bit_lengths[b]),
                sum_dc=int(dc_sums[b]) if cfg.store_sum_dc else None,
            )
        )
    unpred_words = np.concatenate(unpred).astype("<u4").tobytes()

    stream = CompressedStream(
        dims=field.dims,
        block_edge=cfg.block_edge,
        eb_mode=eb_spec.mode,
        eb_value=eb,
        codec_id=cfg.codec_id,
        bin_capacity=quant.bin_capacity,
        records=tuple(records),
        code_lengths=dict(book.lengths),
        payload=payload,
        unpred_words=unpred_words,
    )
    return stream, report._normalize()


def _pair(s, si):
    from .checksum import ChecksumPair

    return ChecksumPair(int(s), int(si))


# ---------------------------------------------------------------------------
# decompression
# ---------------------------------------------------------------------------


class _StreamContext:
    """Decode-side view of a parsed stream."""

    def __init__(self, stream: CompressedStream):
        self.stream = stream
        self.grid = partition(stream.dims, stream.block_edge)
        self.book = HuffmanCodebook.from_lengths(stream.code_lengths)
        self.decoder = _Decoder(self.book)
        self.bit_offsets = stream.bit_offsets()
        self.unp_offsets = stream.unpred_offsets()
        self.unp_words = stream.unpred_array()
        self.quant = QuantConfig(stream.bin_capacity)
        self.eb = stream.eb_value

    def decode_bins(self, b: int) -> np.ndarray:
        """Huffman-decode block b and cross-check its unpredictable count."""
        rec = self.stream.records[b]
        spec = self.grid.blocks[b]
        bins = self.decoder.decode(
            self.stream.payload, self.bit_offsets[b], rec.bit_length, spec.volume
        )
        zeros = int(np.count_nonzero(bins == 0))
        if zeros != rec.unpred_count:
            raise CorruptStream(
                f"block {b} decoded {zeros} unpredictable markers, "
                f"record says {rec.unpred_count}"
            )
        return bins

    def raw_values(self, b: int) -> np.ndarray:
        rec = self.stream.records[b]
        lo = self.unp_offsets[b]
        return self.unp_words[lo : lo + rec.unpred_count].view(np.float32)


def _reconstruct_group(ctx: _StreamContext, extent, ids, bins_by_block) -> np.ndarray:
    """Reconstruct a same-extent batch of blocks; returns (B, bx, by, bz) f32.

    Bit-identical to the reconstruction performed during compression.
    """
    n = len(ids)
    bx, by, bz = extent
    vol = bx * by * bz
    bins3 = np.empty((n, bx, by, bz), dtype=np.uint32)
    raw3 = np.zeros((n, bx, by, bz), dtype=np.float32)
    for row, b in enumerate(ids):
        flat = bins_by_block[int(b)]
        bins3[row] = flat.reshape(extent)
        rawflat = raw3[row].reshape(-1)
        rawflat[flat == 0] = ctx.raw_values(int(b))
    quant = ctx.quant
    eb = ctx.eb

    kinds = np.array([ctx.stream.records[int(b)].predictor for b in ids])
    recon = np.empty((n, bx, by, bz), dtype=np.float32)

    reg_rows = np.flatnonzero(kinds == int(PredictorKind.REGRESSION))
    if reg_rows.size:
        coeffs = np.stack(
            [
                np.frombuffer(ctx.stream.records[int(ids[r])].coeff_bytes, "<f4")
                for r in reg_rows
            ]
        )
        pred = _regression_grid_batch(coeffs, extent)
        sel = bins3[reg_rows]
        offs = sel.astype(np.float64) - float(quant.center)
        dcmp32 = (pred + (2.0 * eb) * offs).astype(np.float32)
        recon[reg_rows] = np.where(sel > 0, dcmp32, raw3[reg_rows])

    lor_rows = np.flatnonzero(kinds == int(PredictorKind.LORENZO))
    if lor_rows.size:
        m = lor_rows.size
        padded = np.zeros((m, bx + 1, by + 1, bz + 1), dtype=np.float64)
        sub_bins = bins3[lor_rows]
        sub_raw = raw3[lor_rows]
        out = recon[lor_rows]
        for ii, jj, kk in _wavefronts(extent):
            pred = _lorenzo_gather(padded, ii, jj, kk)
            bins_w = sub_bins[:, ii, jj, kk]
            offs = bins_w.astype(np.float64) - float(quant.center)
            dcmp32 = (pred + (2.0 * eb) * offs).astype(np.float32)
            recon_w = np.where(bins_w > 0, dcmp32, sub_raw[:, ii, jj, kk])
            padded[:, ii + 1, jj + 1, kk + 1] = recon_w.astype(np.float64)
            out[:, ii, jj, kk] = recon_w
        recon[lor_rows] = out

    return recon


def _block_sum(values32: np.ndarray) -> int:
    return checksum_words(float_words(values32)).sum


def decompress(stream: CompressedStream, threads: int = 1) -> tuple[Optional[Field], FtReport]:
    """Decompress a stream; returns (field, report).

    A block whose decompressed checksum mismatches is re-executed once via
    random access; a second mismatch (or an undecodable block) is terminal:
    the field comes back None and the report carries sdc_in_compression.
    """
    ctx = _StreamContext(stream)
    report = FtReport()
    nb = len(ctx.grid.blocks)
    out = np.empty(stream.dims, dtype=np.float32)

    bins_by_block: list = [None] * nb
    failed: list = []

    def _decode_unit(ids):
        def unit():
            for b in ids:
                try:
                    bins_by_block[int(b)] = ctx.decode_bins(int(b))
                except CorruptStream as exc:
                    failed.append((int(b), str(exc)))

        return unit

    all_ids = np.arange(nb)
    chunks = np.array_split(all_ids, max(1, min(threads, nb)))
    _run_units([_decode_unit(c) for c in chunks if c.size], threads)
    if failed:
        b, why = sorted(failed)[0]
        report.sdc_in_compression = True
        report.detail = f"block {b} undecodable: {why}"
        return None, report._normalize()

    groups = _group_blocks(ctx.grid)

    def _recon_unit(extent, ids):
        def unit():
            recon = _reconstruct_group(ctx, extent, ids, bins_by_block)
            for row, b in enumerate(ids):
                out[ctx.grid.blocks[int(b)].slices()] = recon[row]

        return unit

    _run_units([_recon_unit(e, ids) for e, ids in groups], threads)
    hooks.fire(hooks.STAGE_DECOMP_BEFORE_VERIFY, out, ctx.grid)

    if stream.has_sum_dc():
        for extent, ids in groups:
            got = _gather(out, ctx.grid, ids, extent)
            sums, _ = checksum_blocks_batch(
                got.reshape(len(ids), -1).view(np.uint32)
            )
            stored = np.array(
                [ctx.stream.records[int(b)].sum_dc for b in ids], dtype=np.uint64
            )
            for row in np.flatnonzero(sums != stored):
                b = int(ids[row])
                ok = _reexecute_block(ctx, b, out)
                if not ok:
                    report.sdc_in_compression = True
                    report.detail = f"block {b} mismatches after re-execution"
                    return None, report._normalize()
                report.decomp_block_reexecuted.append(b)

    return Field.from_array(out), report._normalize()


def _reexecute_block(ctx: _StreamContext, b: int, out: np.ndarray) -> bool:
    """Random-access re-decode of one block into `out`; True when its
    checksum matches afterwards."""
    spec = ctx.grid.blocks[b]
    try:
        bins = ctx.decode_bins(b)
    except CorruptStream:
        return False
    recon = _reconstruct_group(ctx, spec.extent, np.array([b]), {b: bins})
    out[spec.slices()] = recon[0]
    return _block_sum(recon[0]) == ctx.stream.records[b].sum_dc


def decompress_region(stream: CompressedStream, region, threads: int = 1) -> tuple[Optional[Field], FtReport]:
    """Decode only the blocks intersecting `region` (half-open box
    ((x0,y0,z0), (x1,y1,z1)) in field coordinates). The values are
    bit-identical to the same slice of a full decompression; per-block
    checksum verification (with one re-execution) still applies.
    """
    (x0, y0, z0), (x1, y1, z1) = region
    nx, ny, nz = stream.dims
    if not (0 <= x0 < x1 <= nx and 0 <= y0 < y1 <= ny and 0 <= z0 < z1 <= nz):
        raise InvalidRegion(f"region {region} outside dims {stream.dims}")
    ctx = _StreamContext(stream)
    report = FtReport()
    e = stream.block_edge
    cx, cy, cz = ctx.grid.counts
    wanted = []
    for bi in range(x0 // e, -(-x1 // e)):
        for bj in range(y0 // e, -(-y1 // e)):
            for bk in range(z0 // e, -(-z1 // e)):
                wanted.append((bi * cy + bj) * cz + bk)
    wanted.sort()

    region_out = np.empty((x1 - x0, y1 - y0, z1 - z0), dtype=np.float32)
    by_extent: dict = {}
    for b in wanted:
        by_extent.setdefault(ctx.grid.blocks[b].extent, []).append(b)

    def _region_unit(extent, ids):
        def unit():
            bins_by_block = {}
            for b in ids:
                bins_by_block[b] = ctx.decode_bins(b)
            recon = _reconstruct_group(
                ctx, extent, np.array(ids), bins_by_block
            )
            for row, b in enumerate(ids):
                blk = recon[row]
                if stream.has_sum_dc() and _block_sum(blk) != stream.records[b].sum_dc:
                    fresh = _reconstruct_group(
                        ctx, extent, np.array([b]), {b: ctx.decode_bins(b)}
                    )[0]
                    if _block_sum(fresh) != stream.records[b].sum_dc:
                        raise CorruptStream(
                            f"block {b} mismatches after re-execution"
                        )
                    report.decomp_block_reexecuted.append(b)
                    blk = fresh
                spec = ctx.grid.blocks[b]
                (i0, j0, k0), (bx, by, bz) = spec.origin, spec.extent
                si = slice(max(x0, i0), min(x1, i0 + bx))
                sj = slice(max(y0, j0), min(y1, j0 + by))
                sk = slice(max(z0, k0), min(z1, k0 + bz))
                region_out[
                    si.start - x0 : si.stop - x0,
                    sj.start - y0 : sj.stop - y0,
                    sk.start - z0 : sk.stop - z0,
                ] = blk[
                    si.start - i0 : si.stop - i0,
                    sj.start - j0 : sj.stop - j0,
                    sk.start - k0 : sk.stop - k0,
                ]

        return unit

    try:
        _run_units([_region_unit(e_, ids) for e_, ids in sorted(by_extent.items())], threads)
    except CorruptStream as exc:
        report.sdc_in_compression = True
        report.detail = str(exc)
        return None, report._normalize()
    return Field.from_array(region_out), report._normalize()


def intersecting_block_count(stream_or_grid, region) -> int:
    """Number of blocks a region extraction must decode."""
    if isinstance(stream_or_grid, BlockGrid):
        grid = stream_or_grid
    else:
        grid = partition(stream_or_grid.dims, stream_or_grid.block_edge)
    (x0, y0, z0), (x1, y1, z1) = region
    e = grid.block_edge
    return (
        (-(-x1 // e) - x0 // e)
        * (-(-y1 // e) - y0 // e)
        * (-(-z1 // e) - z0 // e)
    )
