"""Command-line surface: compress, decompress, extract, inject, bench, info.

Exit codes: 0 success, 1 usage error, 2 corrupt stream or SDC detected in
compression, 3 uncorrectable corruption (error model exceeded). Diagnostics
go to stderr; data goes to files only.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from .container import parse, serialize
from .core import (
    DEFAULT_BLOCK_EDGE,
    ErrorBound,
    Field,
    compute_metrics,
    read_raw,
    resolve_error_bound,
    synth_field,
    write_raw,
)
from .encode import codec_name
from .errors import (
    CorruptStream,
    FtlzError,
    InvalidArgument,
    IoError,
    UncorrectableCorruption,
)
from .faults import TARGETS, run_campaign
from .pipeline import FtConfig, compress, decompress, decompress_region
from .predict import PredictorKind


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _dims(text: str):
    parts = text.split(",")
    if len(parts) != 3:
        raise _UsageError(f"--dims wants NX,NY,NZ, got {text!r}")
    return tuple(int(p) for p in parts)


def _region(text: str):
    parts = text.split(",")
    if len(parts) != 6:
        raise _UsageError(f"--region wants x0,y0,z0,x1,y1,z1, got {text!r}")
    v = [int(p) for p in parts]
    return (v[0], v[1], v[2]), (v[3], v[4], v[5])


def _eb_from_args(args) -> ErrorBound:
    if getattr(args, "eb_abs", None) is not None:
        return ErrorBound.absolute(args.eb_abs)
    if getattr(args, "eb_rel", None) is not None:
        return ErrorBound.relative(args.eb_rel)
    raise _UsageError("one of --eb-abs / --eb-rel is required")


def _cfg_from_args(args, ft_on: bool) -> FtConfig:
    kw = dict(block_edge=args.block, codec_id=args.codec)
    return FtConfig.protected(**kw) if ft_on else FtConfig.unprotected(**kw)


def _echo_config(args, extra="") -> None:
    fields = " ".join(
        f"{k}={v}" for k, v in sorted(vars(args).items()) if k != "func" and v is not None
    )
    print(f"ftlz effective-config: {fields} {extra}".rstrip(), file=sys.stderr)


def build_parser() -> _Parser:
    p = _Parser(prog="ftlz", description=__doc__)
    sub = p.add_subparsers(dest="subcommand", required=True)

    c = sub.add_parser("compress", help="compress a raw float32 file")
    c.add_argument("--in", dest="infile", required=True)
    c.add_argument("--dims", type=_dims, required=True, help="NX,NY,NZ")
    c.add_argument("--eb-abs", type=float)
    c.add_argument("--eb-rel", type=float)
    c.add_argument("--block", type=int, default=DEFAULT_BLOCK_EDGE)
    c.add_argument("--codec", type=int, default=0)
    c.add_argument("--ft", choices=("on", "off"), default="on")
    c.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    c.add_argument("--out", required=True)

    d = sub.add_parser("decompress", help="decompress an archive")
    d.add_argument("--in", dest="infile", required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--verify-against", dest="verify_against")
    d.add_argument("--threads", type=int, default=os.cpu_count() or 1)

    e = sub.add_parser("extract", help="random-access region decompression")
    e.add_argument("--in", dest="infile", required=True)
    e.add_argument("--region", type=_region, required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--threads", type=int, default=os.cpu_count() or 1)

    i = sub.add_parser("inject", help="run a fault-injection campaign")
    i.add_argument("--target", choices=TARGETS, action="append", required=True)
    i.add_argument("--trials", type=int, default=100)
    i.add_argument("--eb", required=True, help="comma list of absolute bounds")
    i.add_argument("--seed", type=int, default=42)
    i.add_argument("--ft", choices=("on", "off", "both"), default="both")
    i.add_argument("--synth", default="mixed")
    i.add_argument("--dims", type=_dims, default=(20, 20, 20))
    i.add_argument("--field-seed", type=int, default=1)
    i.add_argument("--in", dest="infile", help="raw file instead of --synth")
    i.add_argument("--block", type=int, default=DEFAULT_BLOCK_EDGE)
    i.add_argument("--codec", type=int, default=0)
    i.add_argument("--report", required=True, help="CSV output path")

    b = sub.add_parser("bench", help="rate/distortion sweep on synthetic data")
    b.add_argument("--synth", default="sine")
    b.add_argument("--dims", type=_dims, default=(64, 64, 64))
    b.add_argument("--field-seed", type=int, default=1)
    b.add_argument("--eb-list", required=True, help="comma list of absolute bounds")
    b.add_argument("--block", type=int, default=DEFAULT_BLOCK_EDGE)
    b.add_argument("--codec", type=int, default=0)
    b.add_argument("--ft", choices=("on", "off"), default="on")
    b.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    b.add_argument("--report")
    b.add_argument("--format", choices=("csv", "json", "text"), default="text")

    n = sub.add_parser("info", help="print archive header and table summary")
    n.add_argument("--in", dest="infile", required=True)
    return p


def emit_report(rows: list, fmt: str, path=None, grid_axes=None):
    """Write rows of a campaign/metrics report as csv, json, or text.

    Column order is the order of the first row's keys. The text format, when
    `grid_axes` is ("cfg+target rows", "eb columns"), renders the
    protected/unprotected comparison grid of bounded percentages.
    """
    if not rows:
        raise InvalidArgument("empty report")
    columns = list(rows[0].keys())
    if fmt == "csv":
        text = ",".join(columns) + "\n"
        for row in rows:
            text += ",".join(_csv_cell(row[c]) for c in columns) + "\n"
    elif fmt == "json":
        text = json.dumps(rows, indent=2, default=_json_cell) + "\n"
    else:
        text = render_text_table(rows, grid_axes)
    if path is None:
        return text
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return text


def _csv_cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _json_cell(v):
    if isinstance(v, float) and not np.isfinite(v):
        return None
    raise TypeError(f"not JSON serializable: {v!r}")


def render_text_table(rows: list, grid_axes=None) -> str:
    """Fixed-width text table; campaign rows render as a bounded% grid with
    one line per (cfg, target) and one column per error bound."""
    if grid_axes == "campaign":
        ebs = sorted({row["eb"] for row in rows}, reverse=True)
        lines = ["bounded% by error bound"]
        header = f"{'cfg':<8}{'target':<12}" + "".join(f"{eb:>12.0e}" for eb in ebs)
        lines.append(header)
        keys = []
        for row in rows:
            key = (row["cfg"], row["target"])
            if key not in keys:
                keys.append(key)
        for cfg_name, target in keys:
            cells = []
            for eb in ebs:
                pct = next(
                    (
                        r["bounded_pct"]
                        for r in rows
                        if r["cfg"] == cfg_name and r["target"] == target and r["eb"] == eb
                    ),
                    None,
                )
                cells.append(f"{pct:>11.1f}%" if pct is not None else f"{'-':>12}")
            lines.append(f"{cfg_name:<8}{target:<12}" + "".join(cells))
        return "\n".join(lines) + "\n"
    columns = list(rows[0].keys())
    widths = {
        c: max(len(c), *(len(_csv_cell(r[c])) for r in rows)) for c in columns
    }
    lines = ["  ".join(c.ljust(widths[c]) for c in columns)]
    for row in rows:
        lines.append("  ".join(_csv_cell(row[c]).ljust(widths[c]) for c in columns))
    return "\n".join(lines) + "\n"


def _cmd_compress(args) -> int:
    eb = _eb_from_args(args)
    field = read_raw(args.infile, args.dims)
    cfg = _cfg_from_args(args, args.ft == "on")
    _echo_config(args)
    stream, report = compress(field, eb, cfg, threads=args.threads)
    data = serialize(stream)
    with open(args.out, "wb") as fh:
        fh.write(data)
    print(
        f"compressed {field.nbytes} -> {len(data)} bytes "
        f"(ratio {field.nbytes / len(data):.2f}), status {report.status}",
        file=sys.stderr,
    )
    return 0


def _cmd_decompress(args) -> int:
    _echo_config(args)
    with open(args.infile, "rb") as fh:
        data = fh.read()
    stream = parse(data)
    out, report = decompress(stream, threads=args.threads)
    if out is None:
        print(f"SDC in compression: {report.detail}", file=sys.stderr)
        return 2
    write_raw(out, args.out)
    print(f"decompressed to {args.out}, status {report.status}", file=sys.stderr)
    if args.verify_against:
        original = read_raw(args.verify_against, stream.dims)
        metrics = compute_metrics(original, out, len(data))
        ok = metrics.max_abs_error <= stream.eb_value
        print(
            f"verify: max_abs_error {metrics.max_abs_error:.3e} "
            f"{'<=' if ok else '>'} bound {stream.eb_value:.3e}",
            file=sys.stderr,
        )
    return 0


def _cmd_extract(args) -> int:
    _echo_config(args)
    with open(args.infile, "rb") as fh:
        stream = parse(fh.read())
    out, report = decompress_region(stream, args.region, threads=args.threads)
    if out is None:
        print(f"SDC in compression: {report.detail}", file=sys.stderr)
        return 2
    write_raw(out, args.out)
    print(f"extracted {out.dims} region to {args.out}", file=sys.stderr)
    return 0


def _cmd_inject(args) -> int:
    _echo_config(args)
    if args.infile:
        field = read_raw(args.infile, args.dims)
    else:
        field = synth_field(args.synth, args.dims, args.field_seed)
    eb_list = [ErrorBound.absolute(float(x)) for x in args.eb.split(",")]
    variants = {}
    if args.ft in ("on", "both"):
        variants["ftrsz"] = FtConfig.protected(block_edge=args.block, codec_id=args.codec)
    if args.ft in ("off", "both"):
        variants["rsz"] = FtConfig.unprotected(block_edge=args.block, codec_id=args.codec)
    report = run_campaign(
        field,
        eb_list,
        variants,
        trials=args.trials,
        seed=args.seed,
        targets=tuple(args.target),
        field_note=f"{args.synth}{args.dims}" if not args.infile else args.infile,
    )
    rows = report.rows()
    emit_report(rows, "csv", args.report)
    detail = {
        "field": report.field_note,
        "seed": report.seed,
        "cells": rows,
    }
    with open(args.report + ".json", "w") as fh:
        json.dump(detail, fh, indent=2)
    print(render_text_table(rows, "campaign"), file=sys.stderr)
    return 0


def _cmd_bench(args) -> int:
    _echo_config(args)
    field = synth_field(args.synth, args.dims, args.field_seed)
    cfg = _cfg_from_args(args, args.ft == "on")
    rows = []
    for text in args.eb_list.split(","):
        eb = ErrorBound.absolute(float(text))
        t0 = time.perf_counter()
        stream, _ = compress(field, eb, cfg, threads=args.threads)
        data = serialize(stream)
        t1 = time.perf_counter()
        out, _ = decompress(parse(data), threads=args.threads)
        t2 = time.perf_counter()
        metrics = compute_metrics(field, out, len(data))
        row = {"kind": args.synth, "eb": eb.value}
        row.update(metrics.to_dict())
        row["compress_s"] = round(t1 - t0, 4)
        row["decompress_s"] = round(t2 - t1, 4)
        rows.append(row)
    text = emit_report(rows, args.format, args.report)
    if args.report is None:
        print(text, end="")
    return 0


def _cmd_info(args) -> int:
    with open(args.infile, "rb") as fh:
        data = fh.read()
    stream = parse(data)
    counts = {k: 0 for k in PredictorKind}
    unpred = 0
    for rec in stream.records:
        counts[PredictorKind(rec.predictor)] += 1
        unpred += rec.unpred_count
    print(f"archive          {args.infile} ({len(data)} bytes)")
    print(f"dims             {stream.dims}")
    print(f"block edge       {stream.block_edge} ({len(stream.records)} blocks)")
    print(f"error bound      {stream.eb_mode}, resolved abs {stream.eb_value:g}")
    print(f"codec            {stream.codec_id} ({codec_name(stream.codec_id)})")
    print(f"bin capacity     {stream.bin_capacity}")
    print(f"codebook         {len(stream.code_lengths)} symbols")
    print(f"payload          {len(stream.payload)} bytes raw")
    print(f"unpredictable    {unpred} values")
    print(f"regression blks  {counts[PredictorKind.REGRESSION]}")
    print(f"lorenzo blks     {counts[PredictorKind.LORENZO]}")
    print(f"sum_dc section   {'present' if stream.has_sum_dc() else 'absent'}")
    return 0


_COMMANDS = {
    "compress": _cmd_compress,
    "decompress": _cmd_decompress,
    "extract": _cmd_extract,
    "inject": _cmd_inject,
    "bench": _cmd_bench,
    "info": _cmd_info,
}


def dispatch(argv) -> int:
    """Parse argv and run; exceptions map to the documented exit codes."""
    try:
        args = build_parser().parse_args(argv)
        return _COMMANDS[args.subcommand](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except UncorrectableCorruption as exc:
        print(f"uncorrectable corruption: {exc}", file=sys.stderr)
        return 3
    except CorruptStream as exc:
        print(f"corrupt stream: {exc}", file=sys.stderr)
        return 2
    except (FtlzError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
