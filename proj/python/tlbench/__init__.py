"""Transfer-learning benchmark harness: python surface over the C++ core."""

from ._core import (
    TlbenchError,
    age_group,
    backbone_layer_count,
    backbone_names,
    binary_confusion_metrics,
    confusion_metrics,
    generate_synth_corpus,
    hyperband_schedule,
    manifest_summary,
    num_freeze_layers,
    predict_labels,
    reference_leaderboard_csv,
    roc_auc,
    run_cli,
    steps_per_epoch,
)

__all__ = [
    "TlbenchError",
    "age_group",
    "backbone_layer_count",
    "backbone_names",
    "binary_confusion_metrics",
    "confusion_metrics",
    "generate_synth_corpus",
    "hyperband_schedule",
    "manifest_summary",
    "num_freeze_layers",
    "predict_labels",
    "reference_leaderboard_csv",
    "roc_auc",
    "run_cli",
    "steps_per_epoch",
]
