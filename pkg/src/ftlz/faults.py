"""Source-level fault injection and the resilience campaign runner.

Each trial arms one hook at a declared pipeline stage, runs a full
compress + decompress, and classifies the outcome:

    bounded   -- output produced, max |original - decompressed| <= bound
    unbounded -- output produced, bound violated somewhere
    crash     -- no output: a caught pipeline error (the memory-safe stand-in
                 for the original implementation's segmentation faults) or a
                 detected-SDC report with the output withheld

Memory errors into the input array are injected strictly after that block's
checksums are taken; bin-array errors after the array is finalized and
checksummed. Computation errors into regression or sampling perturb one
intermediate value, the same thing the original evaluation did at source
level. Every trial is deterministic given its plan (target + seed).
"""

from __future__ import annotations

import math
from contextlib import ExitStack
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import hooks
from .container import parse, serialize
from .core import ErrorBound, Field, resolve_error_bound
from .errors import FtlzError, InvalidInjection
from .pipeline import FtConfig, compress, decompress

TARGET_INPUT = "input"
TARGET_BINS = "bins"
TARGET_REGRESSION = "regression"
TARGET_SAMPLING = "sampling"
TARGET_DECOMP = "decomp"
TARGET_BYTES = "bytes"

TARGETS = (
    TARGET_INPUT,
    TARGET_BINS,
    TARGET_REGRESSION,
    TARGET_SAMPLING,
    TARGET_DECOMP,
    TARGET_BYTES,
)

_ALIASES = {
    "input_after_checksum": TARGET_INPUT,
    "bin_array": TARGET_BINS,
    "regression_fit": TARGET_REGRESSION,
    "sampling": TARGET_SAMPLING,
    "decompressed_buffer": TARGET_DECOMP,
    "compressed_bytes": TARGET_BYTES,
}

CLASS_BOUNDED = "bounded"
CLASS_UNBOUNDED = "unbounded"
CLASS_CRASH = "crash"


@dataclass(frozen=True)
class InjectionPlan:
    """One injection: where (target/block/element/bit) and the trial seed.

    block, element, and bit may be None for "choose randomly from the seed".
    """

    target: str
    block: Optional[int] = None
    element: Optional[int] = None
    bit: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        target = _ALIASES.get(self.target, self.target)
        object.__setattr__(self, "target", target)
        if target not in TARGETS:
            raise InvalidInjection(f"unknown injection target {self.target!r}")


def inject_bitflip(buffer, element: int, bit: int):
    """Flip one bit of one element in place; applying twice restores it.

    float32/float64 buffers are flipped through their integer views; uint32
    and byte buffers directly.
    """
    if isinstance(buffer, (bytearray, memoryview)):
        if not (0 <= element < len(buffer)) or not (0 <= bit < 8):
            raise InvalidInjection(f"byte {element} bit {bit} out of range")
        buffer[element] ^= 1 << bit
        return buffer
    arr = buffer
    if arr.dtype == np.float32:
        view, width = arr.view(np.uint32), 32
    elif arr.dtype == np.float64:
        view, width = arr.view(np.uint64), 64
    elif arr.dtype == np.uint32:
        view, width = arr, 32
    elif arr.dtype == np.uint64:
        view, width = arr, 64
    else:
        raise InvalidInjection(f"unsupported buffer dtype {arr.dtype}")
    flat = view.reshape(-1)
    if not (0 <= element < flat.size) or not (0 <= bit < width):
        raise InvalidInjection(f"element {element} bit {bit} out of range")
    flat[element] = flat[element] ^ view.dtype.type(1 << bit)
    return buffer


@dataclass(frozen=True)
class TrialOutcome:
    classification: str
    corrected: bool
    max_abs_error: Optional[float]
    ratio: Optional[float]
    bit_identical_output: Optional[bool]
    bit_identical_archive: Optional[bool]
    compress_events: dict
    decompress_events: dict
    detail: str = ""


def fault_free_reference(field: Field, eb_spec: ErrorBound, cfg: FtConfig):
    """(archive bytes, decompressed field) of a clean run, for comparisons."""
    stream, _ = compress(field, eb_spec, cfg)
    data = serialize(stream)
    out, rep = decompress(parse(data))
    assert out is not None and rep.status == "clean"
    return data, out


def _pick(rng, explicit: Optional[int], upper: int, what: str) -> int:
    if explicit is None:
        return int(rng.integers(upper))
    if not (0 <= explicit < upper):
        raise InvalidInjection(f"{what} {explicit} out of range [0, {upper})")
    return explicit


def run_trial(
    field: Field,
    eb_spec: ErrorBound,
    cfg: FtConfig,
    plan: InjectionPlan,
    reference=None,
) -> TrialOutcome:
    """Run one injected compress+decompress and classify the outcome."""
    rng = np.random.default_rng(plan.seed)
    eb = resolve_error_bound(eb_spec, field)
    if reference is None:
        reference = fault_free_reference(field, eb_spec, cfg)
    ref_bytes, ref_field = reference

    def hook_input(working, grid):
        b = _pick(rng, plan.block, len(grid.blocks), "block")
        spec = grid.blocks[b]
        e = _pick(rng, plan.element, spec.volume, "element")
        bit = _pick(rng, plan.bit, 32, "bit")
        i, j, k = grid.cell_of_block(b, e)
        inject_bitflip(working[i, j, k : k + 1], 0, bit)

    def hook_bins(bins_list, grid):
        b = _pick(rng, plan.block, len(bins_list), "block")
        e = _pick(rng, plan.element, bins_list[b].size, "element")
        bit = _pick(rng, plan.bit, 32, "bit")
        inject_bitflip(bins_list[b], e, bit)

    def hook_regression(coeffs_all, grid):
        b = _pick(rng, plan.block, coeffs_all.shape[0], "block")
        e = _pick(rng, plan.element, 4, "coefficient")
        bit = _pick(rng, plan.bit, 32, "bit")
        inject_bitflip(coeffs_all[b], e, bit)

    def hook_sampling(est_reg, est_lor):
        b = _pick(rng, plan.block, est_reg.size, "block")
        which = _pick(rng, plan.element, 2, "estimate")
        bit = _pick(rng, plan.bit, 64, "bit")
        inject_bitflip(est_reg if which == 0 else est_lor, b, bit)

    def hook_decomp(out, grid):
        b = _pick(rng, plan.block, len(grid.blocks), "block")
        spec = grid.blocks[b]
        e = _pick(rng, plan.element, spec.volume, "element")
        bit = _pick(rng, plan.bit, 32, "bit")
        i, j, k = grid.cell_of_block(b, e)
        inject_bitflip(out[i, j, k : k + 1], 0, bit)

    stage_map = {
        TARGET_INPUT: (hooks.STAGE_INPUT_AFTER_CHECKSUM, hook_input, False),
        TARGET_BINS: (hooks.STAGE_BINS_FINALIZED, hook_bins, False),
        TARGET_REGRESSION: (hooks.STAGE_COEFFS_FITTED, hook_regression, False),
        TARGET_SAMPLING: (hooks.STAGE_ESTIMATES, hook_sampling, False),
        TARGET_DECOMP: (hooks.STAGE_DECOMP_BEFORE_VERIFY, hook_decomp, True),
    }

    comp_events: dict = {}
    dec_events: dict = {}
    try:
        with ExitStack() as stack:
            if plan.target in stage_map:
                stage, fn, once = stage_map[plan.target]
                stack.enter_context(hooks.armed(stage, fn, once=once))
            stream, rep_c = compress(field, eb_spec, cfg)
            comp_events = rep_c.to_dict()
            data = bytearray(serialize(stream))
            if plan.target == TARGET_BYTES:
                e = _pick(rng, plan.element, len(data), "byte")
                bit = _pick(rng, plan.bit, 8, "bit")
                inject_bitflip(data, e, bit)
            data = bytes(data)
            out, rep_d = decompress(parse(data))
            dec_events = rep_d.to_dict()
    except FtlzError as exc:
        return TrialOutcome(
            CLASS_CRASH,
            corrected=False,
            max_abs_error=None,
            ratio=None,
            bit_identical_output=None,
            bit_identical_archive=None,
            compress_events=comp_events,
            decompress_events=dec_events,
            detail=f"{type(exc).__name__}: {exc}",
        )

    corrected = comp_events.get("status") == "corrected" or dec_events.get(
        "status"
    ) == "corrected"
    if out is None:
        return TrialOutcome(
            CLASS_CRASH,
            corrected=corrected,
            max_abs_error=None,
            ratio=None,
            bit_identical_output=None,
            bit_identical_archive=None,
            compress_events=comp_events,
            decompress_events=dec_events,
            detail=f"output withheld: {dec_events.get('detail', '')}",
        )

    diff = field.values.astype(np.float64) - out.values.astype(np.float64)
    max_err = float(np.max(np.abs(diff)))
    bounded = max_err <= eb
    same_out = bool(
        np.array_equal(out.values.view(np.uint32), ref_field.values.view(np.uint32))
    )
    return TrialOutcome(
        CLASS_BOUNDED if bounded else CLASS_UNBOUNDED,
        corrected=corrected,
        max_abs_error=max_err,
        ratio=field.nbytes / len(data),
        bit_identical_output=same_out,
        bit_identical_archive=bool(data == ref_bytes),
        compress_events=comp_events,
        decompress_events=dec_events,
    )


@dataclass
class CampaignCell:
    cfg_name: str
    target: str
    eb_mode: str
    eb_value: float
    trials: int = 0
    bounded: int = 0
    unbounded: int = 0
    crashes: int = 0
    corrected: int = 0
    bit_identical: int = 0
    ratios: list = field(default_factory=list)

    def add(self, outcome: TrialOutcome) -> None:
        self.trials += 1
        if outcome.classification == CLASS_BOUNDED:
            self.bounded += 1
        elif outcome.classification == CLASS_UNBOUNDED:
            self.unbounded += 1
        else:
            self.crashes += 1
        if outcome.corrected:
            self.corrected += 1
        if outcome.bit_identical_output:
            self.bit_identical += 1
        if outcome.ratio is not None:
            self.ratios.append(outcome.ratio)

    @property
    def mean_ratio(self) -> float:
        return sum(self.ratios) / len(self.ratios) if self.ratios else math.nan

    def to_row(self) -> dict:
        assert self.bounded + self.unbounded + self.crashes == self.trials
        return {
            "target": self.target,
            "eb": self.eb_value,
            "cfg": self.cfg_name,
            "trials": self.trials,
            "bounded_pct": 100.0 * self.bounded / self.trials,
            "crash_pct": 100.0 * self.crashes / self.trials,
            "corrected_pct": 100.0 * self.corrected / self.trials,
            "mean_ratio": self.mean_ratio,
        }


@dataclass
class CampaignReport:
    """Aggregated outcomes of an injection campaign, one cell per
    (configuration, target, error bound)."""

    field_note: str
    seed: int
    cells: list

    def rows(self) -> list:
        return [c.to_row() for c in self.cells]

    def cell(self, cfg_name: str, target: str, eb_value: float) -> CampaignCell:
        for c in self.cells:
            if (
                c.cfg_name == cfg_name
                and c.target == target
                and c.eb_value == eb_value
            ):
                return c
        raise KeyError((cfg_name, target, eb_value))


def trial_seed(master: int, cell_index: int, trial_index: int) -> int:
    """Stable per-trial seed derived from the campaign master seed."""
    ss = np.random.SeedSequence(entropy=master, spawn_key=(cell_index, trial_index))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def run_campaign(
    field: Field,
    eb_list,
    cfg_variants: dict,
    trials: int,
    seed: int = 0,
    targets=(TARGET_INPUT, TARGET_BINS),
    field_note: str = "",
) -> CampaignReport:
    """Run `trials` injected runs per (configuration, target, bound) cell.

    Deterministic for a given seed; cells iterate in the order given.
    """
    assert trials >= 1
    cells = []
    cell_index = 0
    for cfg_name, cfg in cfg_variants.items():
        for target in targets:
            for eb_spec in eb_list:
                reference = fault_free_reference(field, eb_spec, cfg)
                cell = CampaignCell(cfg_name, target, eb_spec.mode, eb_spec.value)
                for t in range(trials):
                    plan = InjectionPlan(
                        target=target, seed=trial_seed(seed, cell_index, t)
                    )
                    cell.add(run_trial(field, eb_spec, cfg, plan, reference))
                cells.append(cell)
                cell_index += 1
    return CampaignReport(field_note=field_note, seed=seed, cells=cells)
