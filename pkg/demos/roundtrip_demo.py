"""Round-trip demo: compress synthetic fields at several error bounds and
watch ratio, bit rate, and PSNR trade off while the bound always holds."""

import numpy as np

from ftlz import ErrorBound, FtConfig, compress, compute_metrics, decompress, serialize, synth_field
from ftlz.container import parse

DIMS = (64, 64, 64)

print(f"{'kind':8s} {'eb':>8s} {'ratio':>8s} {'bits/val':>9s} {'psnr dB':>8s} {'max err':>10s}")
for kind in ("sine", "mixed", "noise"):
    field = synth_field(kind, DIMS, seed=11)
    for eb in (1e-2, 1e-3, 1e-4, 1e-5):
        stream, report = compress(field, ErrorBound.absolute(eb), FtConfig())
        data = serialize(stream)
        out, _ = decompress(parse(data))
        m = compute_metrics(field, out, len(data))
        assert m.max_abs_error <= eb
        psnr = f"{m.psnr:8.1f}" if np.isfinite(m.psnr) else "     inf"
        print(
            f"{kind:8s} {eb:8.0e} {m.compression_ratio:8.2f} "
            f"{m.bit_rate:9.3f} {psnr} {m.max_abs_error:10.2e}"
        )

print("\nSmooth data compresses hard; tighter bounds cost bits, never accuracy.")
