"""Benchmark task construction: language pairing and split manifests."""
from .manifest import ManifestError, dumps, loads, read_manifest, write_manifest
from .pairing import (
    AuditEntry, PairingCandidateSet, PairingDecision, PairingError, SelectionRules, TranslationInfo,
    builtin_families, load_family, replay, select_pairing,
)
from .splits import (
    GENERATOR_ID, TASKS, SplitError, SplitManifest, TaskSpec, build_book_split, build_cv_splits,
    build_task, fisher_yates, shared_positions, task_spec,
)

__all__ = [
    "ManifestError", "dumps", "loads", "read_manifest", "write_manifest", "AuditEntry", "PairingCandidateSet",
    "PairingDecision", "PairingError", "SelectionRules", "TranslationInfo", "builtin_families", "load_family",
    "replay", "select_pairing", "GENERATOR_ID", "TASKS", "SplitError", "SplitManifest", "TaskSpec",
    "build_book_split", "build_cv_splits", "build_task", "fisher_yates", "shared_positions", "task_spec",
]
