"""Dataset pruning toolkit: trace scoring, coreset selection, data maps."""

from ._core import (
    DataError,
    DataMapStats,
    DatasetSpec,
    IoError,
    LabeledDataset,
    Model,
    PruneManifest,
    ScoreTable,
    TraceHeader,
    TrainConfig,
    ValidationFinding,
    ValidationReport,
    aggregate,
    dyn_unc_scores,
    el2n_scores,
    el2n_value,
    emit_csv,
    emit_svg,
    entropy_scores,
    entropy_value,
    evaluate,
    export_dataset_csv,
    forgetting_scores,
    generate_synthetic,
    keep_count,
    parse_dataset_spec,
    parse_train_config,
    prune,
    prune_class_balanced,
    random_scores,
    rank,
    read_labels,
    read_manifest,
    read_scores,
    static_variance_scores,
    trace_header,
    train_and_log,
    train_on_subset,
    validate,
    window_std,
    write_labels,
    write_manifest,
    write_scores,
)

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "DataMapStats",
    "DatasetSpec",
    "IoError",
    "LabeledDataset",
    "Model",
    "PruneManifest",
    "ScoreTable",
    "TraceHeader",
    "TrainConfig",
    "ValidationFinding",
    "ValidationReport",
    "aggregate",
    "dyn_unc_scores",
    "el2n_scores",
    "el2n_value",
    "emit_csv",
    "emit_svg",
    "entropy_scores",
    "entropy_value",
    "evaluate",
    "export_dataset_csv",
    "forgetting_scores",
    "generate_synthetic",
    "keep_count",
    "parse_dataset_spec",
    "parse_train_config",
    "prune",
    "prune_class_balanced",
    "random_scores",
    "rank",
    "read_labels",
    "read_manifest",
    "read_scores",
    "static_variance_scores",
    "trace_header",
    "train_and_log",
    "train_on_subset",
    "validate",
    "window_std",
    "write_labels",
    "write_manifest",
    "write_scores",
]
