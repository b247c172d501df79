"""dashsnap: dashboard snapshots for threaded collaboration platforms.

A formal YAML spec language for snapshots, a template catalog with
shape-driven applicability, an in-memory aggregation engine, a freshness
and recurrence lifecycle, and a simulated chat platform with per-viewer
interactive filters — served over HTTP with a thin CLI.
"""

__version__ = "0.1.0"

from .dates import Duration, add_duration, parse_duration
from .model import (
    Annotation,
    ComponentSpec,
    Curation,
    DashboardSelection,
    DataFilter,
    Dimension,
    InteractiveFilter,
    Measure,
    OriginalDesign,
    SnapshotSpec,
    TemplateConfig,
    TimeFrame,
    UpdatePolicy,
    validate_component,
    validate_snapshot,
)
from .specio import lint, parse_component, parse_snapshot, serialize_component, serialize_snapshot

__all__ = [
    "Duration",
    "add_duration",
    "parse_duration",
    "Annotation",
    "ComponentSpec",
    "Curation",
    "DashboardSelection",
    "DataFilter",
    "Dimension",
    "InteractiveFilter",
    "Measure",
    "OriginalDesign",
    "SnapshotSpec",
    "TemplateConfig",
    "TimeFrame",
    "UpdatePolicy",
    "validate_component",
    "validate_snapshot",
    "lint",
    "parse_component",
    "parse_snapshot",
    "serialize_component",
    "serialize_snapshot",
]
