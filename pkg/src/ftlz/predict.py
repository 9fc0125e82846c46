"""Per-block predictors: 4-parameter linear regression and 3D Lorenzo.

Both predictors evaluate in float64 with a fixed operand order so that the
compression and decompression sides produce bit-identical predictions. The
Lorenzo predictor never crosses block boundaries; out-of-block neighbors read
as zero, which keeps every block self-contained.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

#: Sampling stride for predictor selection (~12.5% of each block).
SAMPLE_STRIDE = 8


class PredictorKind(enum.IntEnum):
    LORENZO = 0
    REGRESSION = 1


@dataclass(frozen=True)
class RegressionCoeffs:
    """pred(i,j,k) = b0 + b1*i + b2*j + b3*k over local block coordinates."""

    b0: np.float32
    b1: np.float32
    b2: np.float32
    b3: np.float32

    @classmethod
    def from_array(cls, arr) -> "RegressionCoeffs":
        a = np.asarray(arr, dtype=np.float32)
        return cls(a[0], a[1], a[2], a[3])

    def as_array(self) -> np.ndarray:
        return np.array([self.b0, self.b1, self.b2, self.b3], dtype=np.float32)


@dataclass(frozen=True)
class PredictorEstimate:
    e_reg: float
    e_lor: float
    chosen: PredictorKind


def _axis_slope(v64: np.ndarray, axis: int) -> float:
    """Least-squares slope along one grid axis (0 when that edge is 1)."""
    edge = v64.shape[axis]
    if edge == 1:
        return 0.0
    shape = [1, 1, 1]
    shape[axis] = edge
    coord = np.arange(edge, dtype=np.float64).reshape(shape)
    centered = coord - (edge - 1) / 2.0
    denom = v64.size * (edge * edge - 1) / 12.0
    return float(np.sum(centered * v64) / denom)


def fit_regression(block: np.ndarray) -> RegressionCoeffs:
    """Closed-form normal-equation fit on the regular grid; exact on affine data.

    The coordinate columns are mutually uncorrelated over a full grid, so each
    slope is an independent projection; the intercept absorbs the mean. Edges
    of extent 1 make that slope unidentifiable and it is set to 0.
    """
    v64 = np.asarray(block, dtype=np.float64)
    bx, by, bz = v64.shape
    b1 = _axis_slope(v64, 0)
    b2 = _axis_slope(v64, 1)
    b3 = _axis_slope(v64, 2)
    b0 = float(np.mean(v64)) - b1 * (bx - 1) / 2.0 - b2 * (by - 1) / 2.0 - b3 * (
        bz - 1
    ) / 2.0
    return RegressionCoeffs.from_array([b0, b1, b2, b3])


def fit_regression_batch(stack: np.ndarray) -> np.ndarray:
    """fit_regression for a (B, bx, by, bz) stack; returns (B, 4) float32.

    Bit-identical to looping fit_regression over the rows.
    """
    s64 = np.asarray(stack, dtype=np.float64)
    nblocks = s64.shape[0]
    vol = s64[0].size
    out = np.empty((nblocks, 4), dtype=np.float64)
    means = np.mean(s64, axis=(1, 2, 3))
    out[:, 0] = means
    for axis in range(3):
        edge = s64.shape[axis + 1]
        if edge == 1:
            out[:, axis + 1] = 0.0
            continue
        shape = [1, 1, 1, 1]
        shape[axis + 1] = edge
        coord = np.arange(edge, dtype=np.float64).reshape(shape)
        centered = coord - (edge - 1) / 2.0
        denom = vol * (edge * edge - 1) / 12.0
        out[:, axis + 1] = np.sum(centered * s64, axis=(1, 2, 3)) / denom
        out[:, 0] -= out[:, axis + 1] * (edge - 1) / 2.0
    return out.astype(np.float32)


def regression_predict(coeffs: RegressionCoeffs, i: int, j: int, k: int) -> float:
    """Evaluate the affine model in canonical order: ((b0 + b1*i) + b2*j) + b3*k."""
    return (
        (float(coeffs.b0) + float(coeffs.b1) * i) + float(coeffs.b2) * j
    ) + float(coeffs.b3) * k


def lorenzo_predict(buf: np.ndarray, i: int, j: int, k: int) -> float:
    """First-order 3D Lorenzo prediction from an in-block reconstructed buffer.

    Neighbors at negative local coordinates read as 0. Operand order is fixed:
    d100 + d010 + d001 - d110 - d101 - d011 + d111 (suffix = offsets subtracted).
    """

    def d(a: int, b: int, c: int) -> float:
        if a < 0 or b < 0 or c < 0:
            return 0.0
        return float(buf[a, b, c])

    return (
        d(i - 1, j, k)
        + d(i, j - 1, k)
        + d(i, j, k - 1)
        - d(i - 1, j - 1, k)
        - d(i - 1, j, k - 1)
        - d(i, j - 1, k - 1)
        + d(i - 1, j - 1, k - 1)
    )


def lorenzo_predict_grid(values: np.ndarray) -> np.ndarray:
    """Lorenzo predictions for every point of a block at once (float64).

    Uses the given buffer itself as the neighbor source, so it matches the
    sequential predictor only where neighbors are not being rewritten; the
    pipeline uses it on original values for predictor selection.
    """
    v = np.asarray(values, dtype=np.float64)
    p = np.zeros((v.shape[0] + 1, v.shape[1] + 1, v.shape[2] + 1))
    p[1:, 1:, 1:] = v
    return (
        p[:-1, 1:, 1:]
        + p[1:, :-1, 1:]
        + p[1:, 1:, :-1]
        - p[:-1, :-1, 1:]
        - p[:-1, 1:, :-1]
        - p[1:, :-1, :-1]
        + p[:-1, :-1, :-1]
    )


def regression_predict_grid(coeffs_row, extent) -> np.ndarray:
    """Affine predictions for a whole block (float64), canonical operand order."""
    bx, by, bz = extent
    b0 = float(coeffs_row[0])
    b1 = float(coeffs_row[1])
    b2 = float(coeffs_row[2])
    b3 = float(coeffs_row[3])
    i = np.arange(bx, dtype=np.float64).reshape(bx, 1, 1)
    j = np.arange(by, dtype=np.float64).reshape(1, by, 1)
    k = np.arange(bz, dtype=np.float64).reshape(1, 1, bz)
    return ((b0 + b1 * i) + b2 * j) + b3 * k


def sample_select(block: np.ndarray, coeffs: RegressionCoeffs, eb: float) -> PredictorEstimate:
    """Pick the per-block predictor from a deterministic strided sample.

    Every SAMPLE_STRIDE-th point in canonical order, starting at the stride
    (the block origin has only padded neighbors and would bias the Lorenzo
    estimate), contributes |orig - pred| for both predictors; the Lorenzo
    estimate predicts from original neighbors as a stand-in for reconstructed
    ones. Regression wins only on strictly smaller error; ties go to Lorenzo,
    which needs no stored coefficients. `eb` must be resolved (> 0) by the
    time selection runs.
    """
    assert eb > 0.0
    v = np.asarray(block, dtype=np.float64)
    flat = v.reshape(-1)
    sample = slice(SAMPLE_STRIDE, flat.size, SAMPLE_STRIDE)
    pred_reg = regression_predict_grid(
        (coeffs.b0, coeffs.b1, coeffs.b2, coeffs.b3), v.shape
    ).reshape(-1)
    pred_lor = lorenzo_predict_grid(v).reshape(-1)
    e_reg = float(np.sum(np.abs(flat[sample] - pred_reg[sample])))
    e_lor = float(np.sum(np.abs(flat[sample] - pred_lor[sample])))
    chosen = PredictorKind.REGRESSION if e_reg < e_lor else PredictorKind.LORENZO
    return PredictorEstimate(e_reg, e_lor, chosen)


def sample_select_batch(stack: np.ndarray, coeffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(e_reg, e_lor) float64 arrays for a (B, bx, by, bz) stack.

    Bit-identical to looping sample_select over the rows.
    """
    s64 = np.asarray(stack, dtype=np.float64)
    nblocks = s64.shape[0]
    extent = s64.shape[1:]
    vol = extent[0] * extent[1] * extent[2]
    flat = s64.reshape(nblocks, vol)
    sample = slice(SAMPLE_STRIDE, vol, SAMPLE_STRIDE)

    b0 = coeffs[:, 0].astype(np.float64).reshape(-1, 1, 1, 1)
    b1 = coeffs[:, 1].astype(np.float64).reshape(-1, 1, 1, 1)
    b2 = coeffs[:, 2].astype(np.float64).reshape(-1, 1, 1, 1)
    b3 = coeffs[:, 3].astype(np.float64).reshape(-1, 1, 1, 1)
    i = np.arange(extent[0], dtype=np.float64).reshape(1, -1, 1, 1)
    j = np.arange(extent[1], dtype=np.float64).reshape(1, 1, -1, 1)
    k = np.arange(extent[2], dtype=np.float64).reshape(1, 1, 1, -1)
    pred_reg = (((b0 + b1 * i) + b2 * j) + b3 * k).reshape(nblocks, vol)

    p = np.zeros((nblocks, extent[0] + 1, extent[1] + 1, extent[2] + 1))
    p[:, 1:, 1:, 1:] = s64
    pred_lor = (
        p[:, :-1, 1:, 1:]
        + p[:, 1:, :-1, 1:]
        + p[:, 1:, 1:, :-1]
        - p[:, :-1, :-1, 1:]
        - p[:, :-1, 1:, :-1]
        - p[:, 1:, :-1, :-1]
        + p[:, :-1, :-1, :-1]
    ).reshape(nblocks, vol)

    e_reg = np.sum(np.abs(flat[:, sample] - pred_reg[:, sample]), axis=1)
    e_lor = np.sum(np.abs(flat[:, sample] - pred_lor[:, sample]), axis=1)
    return e_reg, e_lor
