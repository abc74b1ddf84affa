"""Python bindings for the lab-result timeline engine."""

import json

from ._core import (
    Dataset,
    FormatError,
    InputError,
    NotFoundError,
    ResultCategory,
    VersionError,
    categorize,
    generate,
    ingest,
    is_relevant_change,
    load,
    median,
    rate_of_change,
    validate_file,
)


def clinical_path(dataset, patient_id, **options):
    """Clinical path of one patient as a dict (same shape as the HTTP API)."""
    return json.loads(dataset.path_json(patient_id, **options))


def series(dataset, patient_id, test, **options):
    return json.loads(dataset.series_json(patient_id, test, **options))


__all__ = [
    "Dataset",
    "FormatError",
    "InputError",
    "NotFoundError",
    "ResultCategory",
    "VersionError",
    "categorize",
    "clinical_path",
    "generate",
    "ingest",
    "is_relevant_change",
    "load",
    "median",
    "rate_of_change",
    "series",
    "validate_file",
]
