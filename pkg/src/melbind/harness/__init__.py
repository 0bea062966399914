from .experiment import (
    EmbedderBundle,
    ExperimentReport,
    ReferenceLines,
    default_config_table,
    reference_lines,
    run_experiment,
)
from .manifest import DatasetManifest, ManifestConcept, fill_subject, load_manifest
from .report import emit_report, parse_report, report_to_dict

__all__ = [
    "EmbedderBundle",
    "ExperimentReport",
    "ReferenceLines",
    "default_config_table",
    "reference_lines",
    "run_experiment",
    "DatasetManifest",
    "ManifestConcept",
    "fill_subject",
    "load_manifest",
    "emit_report",
    "parse_report",
    "report_to_dict",
]
