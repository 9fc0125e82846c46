import math

import numpy as np
import pytest

from ftlz.core import (
    ErrorBound,
    Field,
    PSNR_INFINITE,
    compute_metrics,
    partition,
    read_raw,
    resolve_error_bound,
    synth_field,
    write_raw,
)
from ftlz.errors import DegenerateBound, InvalidGeometry, ShapeMismatch


def test_partition_exact_tiling_single_block():
    grid = partition((10, 10, 10), 10)
    assert len(grid.blocks) == 1
    assert grid.blocks[0].extent == (10, 10, 10)


def test_partition_512_cubed():
    grid = partition((512, 512, 512), 10)
    assert len(grid.blocks) == 52 ** 3
    # trailing blocks carry the remainder extent 2 on each trailing edge
    assert grid.blocks[-1].extent == (2, 2, 2)
    assert grid.blocks[0].extent == (10, 10, 10)
    assert sum(b.volume for b in grid.blocks) == 512 ** 3


def test_partition_sl_dims():
    grid = partition((98, 1200, 1200), 10)
    assert len(grid.blocks) == 10 * 120 * 120
    assert grid.blocks[-1].extent == (8, 10, 10)
    assert sum(b.volume for b in grid.blocks) == 98 * 1200 * 1200


def test_partition_rejects_bad_geometry():
    with pytest.raises(InvalidGeometry):
        partition((0, 4, 4), 10)
    with pytest.raises(InvalidGeometry):
        partition((4, 4, 4), 1)
    with pytest.raises(InvalidGeometry):
        partition((4, 4, 4), 65)


def test_partition_index_bijection_exhaustive():
    # round-trip cell -> (block, offset) -> cell on an awkward small grid
    grid = partition((7, 5, 9), 4)
    seen = set()
    for i in range(7):
        for j in range(5):
            for k in range(9):
                b, off = grid.block_of_cell(i, j, k)
                assert grid.cell_of_block(b, off) == (i, j, k)
                seen.add((b, off))
    assert len(seen) == 7 * 5 * 9


def test_resolve_absolute_ignores_field():
    f1 = synth_field("noise", (4, 4, 4), 1)
    f2 = synth_field("sine", (6, 6, 6), 2)
    eb = ErrorBound.absolute(1e-3)
    assert resolve_error_bound(eb, f1) == 1e-3
    assert resolve_error_bound(eb, f2) == 1e-3


def test_resolve_relative_uses_range():
    vals = np.zeros((2, 2, 2), np.float32)
    vals[1, 1, 1] = 100.0
    f = Field.from_array(vals)
    assert resolve_error_bound(ErrorBound.relative(1e-3), f) == pytest.approx(0.1)


def test_resolve_relative_constant_field_degenerate():
    f = synth_field("constant", (4, 4, 4), 3)
    with pytest.raises(DegenerateBound):
        resolve_error_bound(ErrorBound.relative(1e-3), f)


def test_error_bound_rejects_nonpositive():
    with pytest.raises(DegenerateBound):
        ErrorBound.absolute(0.0)
    with pytest.raises(DegenerateBound):
        ErrorBound.absolute(-1.0)


def test_synth_constant():
    f = synth_field("constant", (4, 4, 4), 99)
    assert np.unique(f.values).size == 1


def test_synth_linear_second_differences_zero():
    f = synth_field("linear", (6, 5, 4), 11)
    v = f.values
    for axis in range(3):
        d2 = np.diff(v, n=2, axis=axis)
        assert np.all(d2 == 0.0)


def test_synth_deterministic():
    a = synth_field("noise", (5, 5, 5), 7)
    b = synth_field("noise", (5, 5, 5), 7)
    assert np.array_equal(a.values, b.values)
    c = synth_field("noise", (5, 5, 5), 8)
    assert not np.array_equal(a.values, c.values)


def test_metrics_identity_pair():
    f = synth_field("mixed", (8, 8, 8), 1)
    m = compute_metrics(f, f, 1024)
    assert m.max_abs_error == 0.0
    assert m.rmse == 0.0
    assert m.psnr == PSNR_INFINITE


def test_metrics_ratio_and_bitrate():
    f = synth_field("noise", (10, 10, 10), 2)
    m = compute_metrics(f, f, 400)
    assert m.compression_ratio == pytest.approx(4000 / 400)
    assert m.bit_rate == pytest.approx(8 * 400 / 1000)


def test_metrics_rmse_against_direct_summation():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((4, 4, 4)).astype(np.float32)
    b = (a + rng.uniform(-0.01, 0.01, a.shape)).astype(np.float32)
    fa, fb = Field.from_array(a), Field.from_array(b)
    m = compute_metrics(fa, fb, 100)
    acc = math.fsum(
        (float(x) - float(y)) ** 2 for x, y in zip(a.reshape(-1), b.reshape(-1))
    )
    expect = math.sqrt(acc / a.size)
    assert m.rmse == pytest.approx(expect, rel=1e-12)
    assert m.max_abs_error == pytest.approx(
        max(abs(float(x) - float(y)) for x, y in zip(a.reshape(-1), b.reshape(-1)))
    )


def test_metrics_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        compute_metrics(
            synth_field("noise", (4, 4, 4), 1), synth_field("noise", (4, 4, 5), 1), 10
        )


def test_raw_roundtrip(tmp_path):
    f = synth_field("mixed", (3, 7, 5), 13)
    path = tmp_path / "field.raw"
    write_raw(f, path)
    g = read_raw(path, (3, 7, 5))
    assert np.array_equal(f.values, g.values)
    with pytest.raises(InvalidGeometry):
        read_raw(path, (3, 7, 6))


def test_field_values_read_only():
    f = synth_field("noise", (4, 4, 4), 1)
    with pytest.raises(ValueError):
        f.values[0, 0, 0] = 1.0
