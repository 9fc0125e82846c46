import csv
import json

import numpy as np
import pytest

from ftlz.cli import dispatch, emit_report, render_text_table
from ftlz.core import read_raw, synth_field, write_raw
from ftlz.errors import InvalidArgument


@pytest.fixture()
def raw_field(tmp_path):
    field = synth_field("mixed", (16, 12, 10), seed=4)
    path = tmp_path / "field.raw"
    write_raw(field, path)
    return field, path


def test_compress_decompress_roundtrip(tmp_path, raw_field, capsys):
    field, raw = raw_field
    archive = tmp_path / "f.ftlz"
    out = tmp_path / "f.dec.raw"
    rc = dispatch(
        [
            "compress", "--in", str(raw), "--dims", "16,12,10",
            "--eb-abs", "1e-3", "--block", "5", "--out", str(archive),
        ]
    )
    assert rc == 0
    assert "effective-config" in capsys.readouterr().err
    rc = dispatch(
        [
            "decompress", "--in", str(archive), "--out", str(out),
            "--verify-against", str(raw),
        ]
    )
    assert rc == 0
    err = capsys.readouterr().err
    assert "max_abs_error" in err and "<=" in err
    dec = read_raw(out, (16, 12, 10))
    assert np.max(np.abs(field.values.astype("f8") - dec.values.astype("f8"))) <= 1e-3


def test_decompress_corrupted_archive_exit_2(tmp_path, raw_field, capsys):
    _, raw = raw_field
    archive = tmp_path / "f.ftlz"
    dispatch(
        ["compress", "--in", str(raw), "--dims", "16,12,10",
         "--eb-abs", "1e-3", "--out", str(archive)]
    )
    data = bytearray(archive.read_bytes())
    data[len(data) - 60] ^= 0xFF  # lands in the payload/tail sections
    archive.write_bytes(bytes(data))
    rc = dispatch(["decompress", "--in", str(archive), "--out", str(archive) + ".raw"])
    assert rc == 2
    msg = capsys.readouterr().err
    assert "SDC in compression" in msg or "corrupt stream" in msg


def test_extract_matches_slice(tmp_path, raw_field):
    field, raw = raw_field
    archive = tmp_path / "f.ftlz"
    dispatch(
        ["compress", "--in", str(raw), "--dims", "16,12,10",
         "--eb-abs", "1e-3", "--block", "5", "--out", str(archive)]
    )
    full = tmp_path / "full.raw"
    dispatch(["decompress", "--in", str(archive), "--out", str(full)])
    part = tmp_path / "part.raw"
    rc = dispatch(
        ["extract", "--in", str(archive), "--region", "2,0,3,9,12,10",
         "--out", str(part)]
    )
    assert rc == 0
    whole = read_raw(full, (16, 12, 10))
    got = read_raw(part, (7, 12, 7))
    want = whole.values[2:9, 0:12, 3:10]
    assert np.array_equal(got.values.view(np.uint32), want.copy().view(np.uint32))


def test_extract_out_of_range_exit_1(tmp_path, raw_field):
    _, raw = raw_field
    archive = tmp_path / "f.ftlz"
    dispatch(
        ["compress", "--in", str(raw), "--dims", "16,12,10",
         "--eb-abs", "1e-3", "--out", str(archive)]
    )
    rc = dispatch(
        ["extract", "--in", str(archive), "--region", "0,0,0,99,12,10",
         "--out", str(archive) + ".r"]
    )
    assert rc == 1


def test_usage_errors_exit_1(tmp_path):
    assert dispatch(["compress", "--in", "x", "--dims", "1,2",
                     "--eb-abs", "1e-3", "--out", "y"]) == 1
    assert dispatch(["compress"]) == 1
    assert dispatch(["decompress", "--in", str(tmp_path / "missing"), "--out", "z"]) == 1


def test_info_summarizes_archive(tmp_path, raw_field, capsys):
    _, raw = raw_field
    archive = tmp_path / "f.ftlz"
    dispatch(
        ["compress", "--in", str(raw), "--dims", "16,12,10",
         "--eb-abs", "1e-3", "--block", "5", "--out", str(archive)]
    )
    capsys.readouterr()
    assert dispatch(["info", "--in", str(archive)]) == 0
    text = capsys.readouterr().out
    assert "dims             (16, 12, 10)" in text
    assert "sum_dc section   present" in text
    assert "codec            0 (identity)" in text


def test_inject_writes_csv_and_json(tmp_path, capsys):
    report = tmp_path / "campaign.csv"
    rc = dispatch(
        [
            "inject", "--target", "input", "--target", "bins",
            "--trials", "3", "--eb", "1e-2,1e-3", "--seed", "42",
            "--dims", "10,10,10", "--block", "5", "--report", str(report),
        ]
    )
    assert rc == 0
    with open(report) as fh:
        rows = list(csv.DictReader(fh))
    assert [c for c in rows[0]] == [
        "target", "eb", "cfg", "trials", "bounded_pct",
        "crash_pct", "corrected_pct", "mean_ratio",
    ]
    assert len(rows) == 2 * 2 * 2  # cfg x target x eb
    ftrsz_rows = [r for r in rows if r["cfg"] == "ftrsz"]
    assert all(float(r["bounded_pct"]) == 100.0 for r in ftrsz_rows)
    detail = json.loads((tmp_path / "campaign.csv.json").read_text())
    assert detail["seed"] == 42
    assert len(detail["cells"]) == len(rows)


def test_bench_formats(tmp_path, capsys):
    rc = dispatch(
        ["bench", "--synth", "sine", "--dims", "12,12,12",
         "--eb-list", "1e-2,1e-3", "--format", "json"]
    )
    assert rc == 0
    rows = json.loads(capsys.readouterr().out)
    assert len(rows) == 2
    assert rows[0]["max_abs_error"] <= 1e-2
    path = tmp_path / "bench.csv"
    rc = dispatch(
        ["bench", "--synth", "sine", "--dims", "12,12,12",
         "--eb-list", "1e-2", "--format", "csv", "--report", str(path)]
    )
    assert rc == 0
    with open(path) as fh:
        got = list(csv.DictReader(fh))
    assert got[0]["kind"] == "sine"


def test_metrics_json_roundtrip():
    rows = [{"kind": "sine", "eb": 1e-3, "psnr": 55.5, "ratio": 12.0}]
    text = emit_report(rows, "json")
    assert json.loads(text) == rows


def test_campaign_text_render_golden():
    rows = [
        {"target": "input", "eb": 1e-3, "cfg": "ftrsz", "trials": 4,
         "bounded_pct": 100.0, "crash_pct": 0.0, "corrected_pct": 100.0,
         "mean_ratio": 5.0},
        {"target": "input", "eb": 1e-4, "cfg": "ftrsz", "trials": 4,
         "bounded_pct": 100.0, "crash_pct": 0.0, "corrected_pct": 100.0,
         "mean_ratio": 4.0},
        {"target": "input", "eb": 1e-3, "cfg": "rsz", "trials": 4,
         "bounded_pct": 50.0, "crash_pct": 0.0, "corrected_pct": 0.0,
         "mean_ratio": 5.0},
        {"target": "input", "eb": 1e-4, "cfg": "rsz", "trials": 4,
         "bounded_pct": 25.0, "crash_pct": 25.0, "corrected_pct": 0.0,
         "mean_ratio": 4.0},
    ]
    text = render_text_table(rows, "campaign")
    golden = (
        "bounded% by error bound\n"
        "cfg     target             1e-03       1e-04\n"
        "ftrsz   input             100.0%      100.0%\n"
        "rsz     input              50.0%       25.0%\n"
    )
    assert text == golden


def test_emit_report_rejects_empty():
    with pytest.raises(InvalidArgument):
        emit_report([], "csv")
