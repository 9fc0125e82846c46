"""ftlz: fault-tolerant, error-bounded, blockwise lossy compression for
3D float32 scientific fields, with integer-checksum SDC detection and
correction, duplicated-evaluation protection, random-access extraction,
and a fault-injection evaluation harness."""

from .core import (
    ErrorBound,
    Field,
    QualityMetrics,
    compute_metrics,
    partition,
    read_raw,
    resolve_error_bound,
    synth_field,
    write_raw,
)
from .checksum import (
    ChecksumPair,
    CorrectionOutcome,
    checksum_block,
    checksum_block_f64,
    locate_and_correct,
    verify_block,
    word_reinterpret,
)
from .container import CompressedStream, parse, serialize
from .pipeline import (
    FtConfig,
    FtReport,
    compress,
    cr_decrease_bound,
    decompress,
    decompress_region,
    duplicated_eval,
)
from .predict import PredictorKind, RegressionCoeffs, fit_regression, sample_select
from .quantize import QuantConfig, quantize_diff, reconstruct
from .faults import CampaignReport, InjectionPlan, inject_bitflip, run_campaign, run_trial

__version__ = "0.1.0"

__all__ = [
    "CampaignReport",
    "ChecksumPair",
    "CompressedStream",
    "CorrectionOutcome",
    "ErrorBound",
    "Field",
    "FtConfig",
    "FtReport",
    "InjectionPlan",
    "PredictorKind",
    "QualityMetrics",
    "QuantConfig",
    "RegressionCoeffs",
    "checksum_block",
    "checksum_block_f64",
    "compress",
    "compute_metrics",
    "cr_decrease_bound",
    "decompress",
    "decompress_region",
    "duplicated_eval",
    "fit_regression",
    "inject_bitflip",
    "locate_and_correct",
    "parse",
    "partition",
    "quantize_diff",
    "read_raw",
    "reconstruct",
    "resolve_error_bound",
    "run_campaign",
    "run_trial",
    "sample_select",
    "serialize",
    "synth_field",
    "verify_block",
    "word_reinterpret",
    "write_raw",
]
