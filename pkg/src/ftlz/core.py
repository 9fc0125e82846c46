"""Field geometry, block partitioning, error bounds, synthetic data, metrics.

A Field is a dense 3D array of float32 values in row-major (C) order.
2D data is represented as a degenerate 3D field with nx = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBound, InvalidGeometry, IoError, ShapeMismatch

Dims = tuple[int, int, int]

BLOCK_EDGE_MIN = 2
BLOCK_EDGE_MAX = 64
DEFAULT_BLOCK_EDGE = 10

EB_ABSOLUTE = "absolute"
EB_RELATIVE = "value_range_relative"

#: Sentinel used for PSNR when the reconstruction is exact (rmse == 0).
PSNR_INFINITE = math.inf


def _check_dims(dims) -> Dims:
    if len(dims) != 3:
        raise InvalidGeometry(f"expected 3 dimensions, got {len(dims)}")
    nx, ny, nz = (int(d) for d in dims)
    if nx < 1 or ny < 1 or nz < 1:
        raise InvalidGeometry(f"all dimensions must be >= 1, got {(nx, ny, nz)}")
    return (nx, ny, nz)


@dataclass(frozen=True)
class Field:
    """Dense 3D float32 field. `values` has shape `dims` and is read-only."""

    dims: Dims
    values: np.ndarray

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "Field":
        dims = _check_dims(arr.shape)
        vals = np.ascontiguousarray(arr, dtype=np.float32)
        if vals is arr:
            vals = arr.copy()
        vals.flags.writeable = False
        return cls(dims, vals)

    @classmethod
    def from_flat(cls, flat, dims) -> "Field":
        dims = _check_dims(dims)
        vals = np.asarray(flat, dtype=np.float32)
        if vals.size != dims[0] * dims[1] * dims[2]:
            raise InvalidGeometry(
                f"value count {vals.size} does not match dims {dims}"
            )
        return cls.from_array(vals.reshape(dims))

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def nbytes(self) -> int:
        return self.values.size * 4

    def value_range(self) -> float:
        v = self.values
        return float(v.max()) - float(v.min())


@dataclass(frozen=True, slots=True)
class BlockSpec:
    """One block of a partition: row-major index, origin cell, actual extent."""

    block_index: int
    origin: Dims
    extent: Dims

    @property
    def volume(self) -> int:
        bx, by, bz = self.extent
        return bx * by * bz

    def slices(self) -> tuple[slice, slice, slice]:
        (i0, j0, k0), (bx, by, bz) = self.origin, self.extent
        return (slice(i0, i0 + bx), slice(j0, j0 + by), slice(k0, k0 + bz))


@dataclass(frozen=True)
class BlockGrid:
    """Exact tiling of a field into blocks, row-major over block coordinates.

    The position of a BlockSpec in `blocks` is the canonical block index used
    by every per-block checksum array and by the container's block table.
    """

    field_dims: Dims
    block_edge: int
    blocks: tuple[BlockSpec, ...]

    @property
    def counts(self) -> Dims:
        e = self.block_edge
        nx, ny, nz = self.field_dims
        return (-(-nx // e), -(-ny // e), -(-nz // e))

    def block_of_cell(self, i: int, j: int, k: int) -> tuple[int, int]:
        """Map a field cell to (block_index, row-major offset within block)."""
        e = self.block_edge
        cx, cy, cz = self.counts
        bi, bj, bk = i // e, j // e, k // e
        index = (bi * cy + bj) * cz + bk
        blk = self.blocks[index]
        li, lj, lk = i - blk.origin[0], j - blk.origin[1], k - blk.origin[2]
        _, by, bz = blk.extent
        return index, (li * by + lj) * bz + lk

    def cell_of_block(self, block_index: int, offset: int) -> Dims:
        """Inverse of block_of_cell."""
        blk = self.blocks[block_index]
        _, by, bz = blk.extent
        li, rem = divmod(offset, by * bz)
        lj, lk = divmod(rem, bz)
        return (blk.origin[0] + li, blk.origin[1] + lj, blk.origin[2] + lk)


def partition(dims, block_edge: int = DEFAULT_BLOCK_EDGE) -> BlockGrid:
    """Tile `dims` into blocks of edge `block_edge`, trailing blocks smaller.

    Block ordering is row-major over block coordinates.
    """
    dims = _check_dims(dims)
    block_edge = int(block_edge)
    if not (BLOCK_EDGE_MIN <= block_edge <= BLOCK_EDGE_MAX):
        raise InvalidGeometry(
            f"block_edge must be in [{BLOCK_EDGE_MIN}, {BLOCK_EDGE_MAX}], "
            f"got {block_edge}"
        )
    nx, ny, nz = dims
    e = block_edge
    specs = []
    index = 0
    for i0 in range(0, nx, e):
        bx = min(e, nx - i0)
        for j0 in range(0, ny, e):
            by = min(e, ny - j0)
            for k0 in range(0, nz, e):
                bz = min(e, nz - k0)
                specs.append(BlockSpec(index, (i0, j0, k0), (bx, by, bz)))
                index += 1
    return BlockGrid(dims, block_edge, tuple(specs))


@dataclass(frozen=True)
class ErrorBound:
    """User error-bound request: absolute, or relative to the value range."""

    mode: str
    value: float

    def __post_init__(self):
        if self.mode not in (EB_ABSOLUTE, EB_RELATIVE):
            raise DegenerateBound(f"unknown error-bound mode {self.mode!r}")
        if not (self.value > 0.0) or not math.isfinite(self.value):
            raise DegenerateBound(f"error-bound value must be > 0, got {self.value}")

    @classmethod
    def absolute(cls, value: float) -> "ErrorBound":
        return cls(EB_ABSOLUTE, float(value))

    @classmethod
    def relative(cls, value: float) -> "ErrorBound":
        return cls(EB_RELATIVE, float(value))


def resolve_error_bound(spec: ErrorBound, field: Field) -> float:
    """Resolve a bound request to the absolute bound used by the quantizer."""
    if spec.mode == EB_ABSOLUTE:
        resolved = spec.value
    else:
        resolved = spec.value * field.value_range()
    if not (resolved > 0.0) or not math.isfinite(resolved):
        raise DegenerateBound(
            f"resolved bound {resolved} is not positive and finite "
            f"(mode={spec.mode}, value={spec.value})"
        )
    return float(resolved)


def synth_field(kind: str, dims, seed: int = 0) -> Field:
    """Deterministic synthetic test fields.

    kinds:
      constant -- one value everywhere
      linear   -- exactly affine in (i, j, k); dyadic coefficients so the
                  float32 representation is exact and second differences are 0
      sine     -- smooth band-limited waves, axis terms plus a 3D product term
      noise    -- unit-variance Gaussian noise
      mixed    -- sine + ramp + moderate noise
    """
    dims = _check_dims(dims)
    rng = np.random.default_rng(seed)
    nx, ny, nz = dims
    i = np.arange(nx, dtype=np.float64).reshape(nx, 1, 1)
    j = np.arange(ny, dtype=np.float64).reshape(1, ny, 1)
    k = np.arange(nz, dtype=np.float64).reshape(1, 1, nz)

    if kind == "constant":
        value = float(rng.integers(-64, 65)) / 8.0
        data = np.full(dims, value, dtype=np.float64)
    elif kind == "linear":
        a, b, c, d = rng.integers(1, 9, size=4) / 16.0
        data = a + b * i + c * j + d * k
    elif kind == "sine":
        f1, f2, f3 = rng.integers(1, 4, size=3)
        p1, p2, p3 = rng.uniform(0.0, 2.0 * math.pi, size=3)
        data = (
            np.sin(2.0 * math.pi * f1 * i / nx + p1)
            + np.sin(2.0 * math.pi * f2 * j / ny + p2)
            + np.sin(2.0 * math.pi * f3 * k / nz + p3)
            + 0.5
            * np.sin(2.0 * math.pi * i / nx)
            * np.sin(4.0 * math.pi * j / ny)
            * np.sin(2.0 * math.pi * k / nz)
        )
    elif kind == "noise":
        data = rng.standard_normal(dims)
    elif kind == "mixed":
        f1, f2 = rng.integers(1, 4, size=2)
        data = (
            np.sin(2.0 * math.pi * f1 * i / nx)
            + np.sin(2.0 * math.pi * f2 * (j + k) / (ny + nz))
            + 0.002 * (i + 2.0 * j - k)
            + 0.2 * rng.standard_normal(dims)
        )
    else:
        raise InvalidGeometry(f"unknown synthetic kind {kind!r}")
    return Field.from_array(data.astype(np.float32))


@dataclass(frozen=True)
class QualityMetrics:
    max_abs_error: float
    rmse: float
    psnr: float
    compression_ratio: float
    bit_rate: float

    def to_dict(self) -> dict:
        return {
            "max_abs_error": self.max_abs_error,
            "rmse": self.rmse,
            "psnr": None if math.isinf(self.psnr) else self.psnr,
            "compression_ratio": self.compression_ratio,
            "bit_rate": self.bit_rate,
        }


def compute_metrics(
    original: Field, decompressed: Field, compressed_bytes: int
) -> QualityMetrics:
    """Distortion and size metrics for a compression run.

    PSNR uses the original field's value range; an exact reconstruction is
    reported with the PSNR_INFINITE sentinel.
    """
    if original.dims != decompressed.dims:
        raise ShapeMismatch(
            f"dims differ: {original.dims} vs {decompressed.dims}"
        )
    a = original.values.astype(np.float64)
    b = decompressed.values.astype(np.float64)
    diff = a - b
    max_err = float(np.max(np.abs(diff))) if diff.size else 0.0
    rmse = math.sqrt(float(np.mean(diff * diff)))
    if rmse > 0.0:
        psnr = 20.0 * math.log10(original.value_range() / rmse)
    else:
        psnr = PSNR_INFINITE
    n = original.size
    ratio = (n * 4) / compressed_bytes if compressed_bytes > 0 else math.inf
    bit_rate = 8.0 * compressed_bytes / n
    return QualityMetrics(max_err, rmse, psnr, ratio, bit_rate)


def read_raw(path, dims) -> Field:
    """Read little-endian IEEE-754 float32 values, row-major, dims external."""
    dims = _check_dims(dims)
    try:
        data = np.fromfile(path, dtype="<f4")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    n = dims[0] * dims[1] * dims[2]
    if data.size != n:
        raise InvalidGeometry(
            f"{path} holds {data.size} values but dims {dims} need {n}"
        )
    return Field.from_array(data.reshape(dims))


def write_raw(field: Field, path) -> None:
    """Write a field as little-endian float32, row-major."""
    try:
        field.values.astype("<f4", copy=False).tofile(path)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
