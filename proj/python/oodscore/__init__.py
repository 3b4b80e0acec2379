"""Post-hoc out-of-distribution scoring.

Scores are oriented so that higher means more in-distribution. The heavy
lifting happens in the compiled ``_core`` extension; this package re-exports it.
"""

from ._core import (  # noqa: F401
    CsvError,
    Error,
    EvaluationError,
    FormatError,
    IoError,
    ScaleFactor,
    ValidationError,
    ash_b,
    ash_p,
    ash_s,
    aupr,
    auroc,
    compute_logits,
    distribution_iou,
    energy_score,
    fpr_at_tpr,
    generate_synthetic,
    logsumexp,
    lts_scale_factor,
    morph_iou,
    msp_score,
    react_clip,
    read_feature_dump,
    read_head,
    roc_curve,
    run_benchmark,
    run_detector,
    scale_features,
    sweep_p,
    write_feature_dump,
    write_head,
)

__version__ = "0.1.0"
