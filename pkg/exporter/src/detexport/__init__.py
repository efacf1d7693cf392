"""Detector-dump conversion tooling for the acquisition engine's file formats."""

from .convert import (
    ExportError,
    export_labeled_stats,
    export_pool,
    load_annotations,
    load_features,
    load_remap,
    load_results,
)

__version__ = "0.1.0"

__all__ = [
    "ExportError",
    "export_labeled_stats",
    "export_pool",
    "load_annotations",
    "load_features",
    "load_remap",
    "load_results",
    "__version__",
]
