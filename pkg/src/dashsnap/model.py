"""Domain types for dashboard snapshots and their validation.

The type graph: a SnapshotSpec holds ComponentSpecs; each component imports
data source, filters, measures, dimensions, and original design from a
DashboardSelection, carries a TimeFrame, and may bind a template through a
TemplateConfig. Validation never raises on malformed-but-typed input; it
returns a ValidationReport whose entries carry machine-readable codes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import date, datetime, time

from . import measure_expr
from .dates import Duration, add_duration

MEASURE_KINDS = ("column", "aggregated", "computed")
AGGREGATES = ("sum", "avg", "min", "max", "count")
DIMENSION_KINDS = ("nominal", "temporal")
FILTER_KINDS = ("equals", "one_of", "range", "date_range")
MARKS = ("bar", "line", "area", "point", "text-metric")
APPEARANCES = ("visual", "text", "both")
ANNOTATION_KINDS = ("highlight", "reference-line", "note")
CURATION_METHODS = ("stack", "carousel", "slideshow", "mini-dashboard")
UPDATE_MODES = ("manual-author", "manual-viewer", "auto-recur")
INTERACTIVE_KINDS = ("dropdown", "slider", "macro")

DEFAULT_SLIDESHOW_INTERVAL = 5  # seconds
DEFAULT_MINI_DASHBOARD_COLUMNS = 2


@dataclass(frozen=True)
class Measure:
    name: str
    kind: str  # column | aggregated | computed
    source_column: str | None = None
    aggregate: str | None = None  # sum | avg | min | max | count
    expression: str | None = None
    unit: str | None = None


@dataclass(frozen=True)
class Dimension:
    name: str
    source_column: str
    kind: str  # nominal | temporal


@dataclass(frozen=True)
class DataFilter:
    """One predicate over a column; a filter list is a conjunction.

    Exactly one predicate shape applies per kind:
      equals     -> value
      one_of     -> values
      range      -> low, high          (inclusive on both ends)
      date_range -> start, end         (inclusive on both ends)
    Range filters differ from time frames, which are half-open [start, end).
    """

    column: str
    kind: str
    value: object = None
    values: tuple = ()
    low: float | None = None
    high: float | None = None
    start: date | None = None
    end: date | None = None


@dataclass(frozen=True)
class TimeFrame:
    field: str  # temporal column name
    start: date
    duration: Duration

    @property
    def end(self) -> date:
        """Exclusive end: the frame covers [start, end)."""
        return add_duration(self.start, self.duration)

    def display(self) -> str:
        return f"{self.duration} from {self.start.isoformat()} by {self.field}"


@dataclass(frozen=True)
class Scale:
    field: str
    kind: str  # linear | ordinal | time | ...
    domain: tuple = ()
    range: tuple = ()  # numeric range or color palette


@dataclass(frozen=True)
class OriginalDesign:
    mark: str  # bar | line | area | point | text-metric
    encodings: dict = field(default_factory=dict)  # channel (x|y|color) -> field name
    scales: tuple[Scale, ...] = ()

    def __post_init__(self):
        # dicts are unhashable but encodings stay small and read-only by convention
        object.__setattr__(self, "encodings", dict(self.encodings))

    def __hash__(self):
        return hash((self.mark, tuple(sorted(self.encodings.items())), self.scales))


@dataclass(frozen=True)
class Annotation:
    """Visual emphasis overlaid on a chart, or a free note.

    Targets: a dimension value (`category`), a measure threshold
    (`measure` + `value`), or a point (`category` + `measure`).
    """

    kind: str  # highlight | reference-line | note
    category: str | None = None
    measure: str | None = None
    value: float | None = None
    text: str | None = None


@dataclass(frozen=True)
class InteractiveFilter:
    """Consumer-operable filter; its effect is a private per-viewer view."""

    kind: str  # dropdown | slider | macro
    column: str | None = None
    options: tuple = ()  # dropdown allowed values
    min: float | None = None  # slider bounds
    max: float | None = None
    name: str | None = None  # macro name
    filters: tuple[DataFilter, ...] = ()  # macro filter bundle

    def key(self) -> str:
        if self.kind == "macro":
            return f"macro:{self.name}"
        return f"{self.kind}:{self.column}"


@dataclass(frozen=True)
class TemplateConfig:
    """Mediation object binding a component to a template design.

    Measures, dimensions, time frame, and data filters are transferred from
    the component; scales from its original design. Only `parameters` is
    analyst-supplied.
    """

    measures: tuple[Measure, ...] = ()
    dimensions: tuple[Dimension, ...] = ()
    time_frame: TimeFrame | None = None
    data_filters: tuple[DataFilter, ...] = ()
    scales: tuple[Scale, ...] = ()
    parameters: dict = field(default_factory=dict)

    def __hash__(self):
        return hash((self.measures, self.dimensions, self.time_frame, self.data_filters, self.scales))


@dataclass(frozen=True)
class TemplateBinding:
    design_id: str
    config: TemplateConfig


@dataclass(frozen=True)
class ComponentSpec:
    id: str
    data_source: str
    measures: tuple[Measure, ...]
    time_frame: TimeFrame
    original_design: OriginalDesign
    appearance: str = "visual"  # visual | text | both
    data_filters: tuple[DataFilter, ...] = ()
    dimensions: tuple[Dimension, ...] = ()
    template: TemplateBinding | None = None
    caption: str | None = None
    custom_text: str | None = None
    annotations: tuple[Annotation, ...] = ()
    interactive_filters: tuple[InteractiveFilter, ...] = ()


@dataclass(frozen=True)
class DashboardSelection:
    """Descriptor of a selected dashboard panel/worksheet."""

    panel_id: str
    worksheet: str
    data_source: str
    measures: tuple[Measure, ...] = ()
    dimensions: tuple[Dimension, ...] = ()
    data_filters: tuple[DataFilter, ...] = ()
    original_design: OriginalDesign = OriginalDesign(mark="bar")


@dataclass(frozen=True)
class Curation:
    method: str  # stack | carousel | slideshow | mini-dashboard
    interval_seconds: int = DEFAULT_SLIDESHOW_INTERVAL  # slideshow only
    columns: int = DEFAULT_MINI_DASHBOARD_COLUMNS  # mini-dashboard only

    def __post_init__(self):
        # parameters of other methods collapse to defaults so equality and
        # serialization stay canonical
        if self.method != "slideshow":
            object.__setattr__(self, "interval_seconds", DEFAULT_SLIDESHOW_INTERVAL)
        if self.method != "mini-dashboard":
            object.__setattr__(self, "columns", DEFAULT_MINI_DASHBOARD_COLUMNS)


STACK = Curation("stack")
CAROUSEL = Curation("carousel")


@dataclass(frozen=True)
class UpdatePolicy:
    mode: str  # manual-author | manual-viewer | auto-recur
    period: Duration | None = None
    until: date | None = None
    publish_time: time | None = None


MANUAL_AUTHOR = UpdatePolicy("manual-author")
MANUAL_VIEWER = UpdatePolicy("manual-viewer")


def auto_recur(period: Duration, until: date, publish_time: time) -> UpdatePolicy:
    return UpdatePolicy("auto-recur", period=period, until=until, publish_time=publish_time)


@dataclass(frozen=True)
class Completeness:
    complete: bool
    note: str | None = None


@dataclass(frozen=True)
class SnapshotSpec:
    id: str
    title: str
    components: tuple[ComponentSpec, ...]
    curation: Curation
    freshness: date
    update_policy: UpdatePolicy
    created_at: datetime
    author: str
    completeness: Completeness | None = None
    text_message: str | None = None


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    path: str = ""
    span: tuple[int, int] | None = None  # (line, column), 1-based

    def render(self) -> str:
        loc = f"{self.span[0]}:{self.span[1]}: " if self.span else ""
        where = f" [{self.path}]" if self.path else ""
        return f"{loc}{self.code}: {self.message}{where}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, code: str, message: str, path: str = "") -> None:
        self.violations.append(Violation(code, message, path))

    def extend(self, other: "ValidationReport") -> None:
        self.violations.extend(other.violations)

    def with_spans(self, span_index: dict[str, tuple[int, int]]) -> "ValidationReport":
        """Attach source spans by longest-prefix match on violation paths."""
        out = ValidationReport()
        for v in self.violations:
            span = _lookup_span(span_index, v.path)
            out.violations.append(replace(v, span=span))
        return out


def _lookup_span(index: dict[str, tuple[int, int]], path: str) -> tuple[int, int] | None:
    probe = path
    while True:
        if probe in index:
            return index[probe]
        if not probe:
            return None
        # strip one trailing segment: ".key" or "[i]"
        cut = max(probe.rfind("."), probe.rfind("["))
        probe = probe[:cut] if cut > 0 else ""


@dataclass(frozen=True)
class ColumnType:
    name: str
    ctype: str  # number | string | date


@dataclass(frozen=True)
class DataSourceSchema:
    """Column names and types of a data source, for validation."""

    columns: tuple[ColumnType, ...]

    def type_of(self, column: str) -> str | None:
        for c in self.columns:
            if c.name == column:
                return c.ctype
        return None


def _check_filter(f: DataFilter, schema: DataSourceSchema, report: ValidationReport, path: str) -> None:
    ctype = schema.type_of(f.column)
    if ctype is None:
        report.add("UNKNOWN_COLUMN", f"filter column {f.column!r} not in data source", path)
        return
    if f.kind == "equals":
        if not _value_matches(f.value, ctype):
            report.add("FILTER_TYPE_MISMATCH", f"equals value {f.value!r} does not match {ctype} column {f.column!r}", path)
    elif f.kind == "one_of":
        for v in f.values:
            if not _value_matches(v, ctype):
                report.add("FILTER_TYPE_MISMATCH", f"one_of value {v!r} does not match {ctype} column {f.column!r}", path)
                break
    elif f.kind == "range":
        if ctype != "number":
            report.add("FILTER_TYPE_MISMATCH", f"range filter requires a number column, {f.column!r} is {ctype}", path)
    elif f.kind == "date_range":
        if ctype != "date":
            report.add("FILTER_TYPE_MISMATCH", f"date_range filter requires a date column, {f.column!r} is {ctype}", path)


def _value_matches(value: object, ctype: str) -> bool:
    if ctype == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if ctype == "date":
        return isinstance(value, date)
    return isinstance(value, str)


def _check_measures(measures: tuple[Measure, ...], schema: DataSourceSchema | None, report: ValidationReport, base: str) -> None:
    declared = {m.name for m in measures}
    refs_by_name: dict[str, set[str]] = {}
    for i, m in enumerate(measures):
        path = f"{base}[{i}]"
        if m.kind not in MEASURE_KINDS:
            report.add("MEASURE_KIND_INVALID", f"unknown measure kind {m.kind!r}", path)
            continue
        if m.kind == "column":
            if not m.source_column:
                report.add("MEASURE_SHAPE", "column measure requires a source column", path)
            if m.aggregate or m.expression:
                report.add("MEASURE_SHAPE", "column measure must not carry aggregate or expression", path)
        elif m.kind == "aggregated":
            if not m.source_column or not m.aggregate:
                report.add("MEASURE_SHAPE", "aggregated measure requires source column and aggregate", path)
            elif m.aggregate not in AGGREGATES:
                report.add("MEASURE_SHAPE", f"unknown aggregate {m.aggregate!r}", path)
        elif m.kind == "computed":
            if not m.expression:
                report.add("MEASURE_SHAPE", "computed measure requires an expression", path)
                continue
            try:
                refs = measure_expr.expr_refs(measure_expr.parse_expr(m.expression))
            except measure_expr.ExprError as e:
                report.add("MEASURE_EXPR_SYNTAX", str(e), path)
                continue
            refs_by_name[m.name] = refs
            for r in sorted(refs - declared):
                report.add("UNKNOWN_MEASURE_REF", f"expression references undeclared measure {r!r}", path)
        if m.kind in ("column", "aggregated") and m.source_column and schema is not None:
            ctype = schema.type_of(m.source_column)
            if ctype is None:
                report.add("UNKNOWN_COLUMN", f"measure column {m.source_column!r} not in data source", path)
            elif ctype != "number" and m.aggregate != "count":
                report.add("COLUMN_TYPE_MISMATCH", f"measure column {m.source_column!r} is {ctype}, expected number", path)
    _check_cycles(refs_by_name, declared, report, base)


def _check_cycles(refs_by_name: dict[str, set[str]], declared: set[str], report: ValidationReport, base: str) -> None:
    visiting: set[str] = set()
    done: set[str] = set()

    def visit(name: str, trail: list[str]) -> bool:
        if name in done:
            return False
        if name in visiting:
            cycle = " -> ".join(trail + [name])
            report.add("CYCLIC_MEASURE_REF", f"computed measures form a cycle: {cycle}", base)
            return True
        visiting.add(name)
        for ref in sorted(refs_by_name.get(name, ())):
            if ref in declared and visit(ref, trail + [name]):
                visiting.discard(name)
                return True
        visiting.discard(name)
        done.add(name)
        return False

    for name in sorted(refs_by_name):
        if visit(name, []):
            break


def validate_component(c: ComponentSpec, src: DataSourceSchema | None) -> ValidationReport:
    """Check every component invariant against a data-source schema.

    With src=None only schema-independent invariants run (useful for linting
    a document before any data source is resolvable).
    """
    report = ValidationReport()
    if not c.measures:
        report.add("EMPTY_MEASURES", "component declares no measures", "measures")
    _check_measures(c.measures, src, report, "measures")

    for i, d in enumerate(c.dimensions):
        path = f"dimensions[{i}]"
        if d.kind not in DIMENSION_KINDS:
            report.add("DIMENSION_KIND_INVALID", f"unknown dimension kind {d.kind!r}", path)
        if src is not None:
            ctype = src.type_of(d.source_column)
            if ctype is None:
                report.add("UNKNOWN_COLUMN", f"dimension column {d.source_column!r} not in data source", path)
            elif d.kind == "temporal" and ctype != "date":
                report.add("TEMPORAL_FIELD_REQUIRED", f"temporal dimension {d.name!r} must reference a date column, {d.source_column!r} is {ctype}", path)

    for i, f in enumerate(c.data_filters):
        path = f"data-filters[{i}]"
        if f.kind not in FILTER_KINDS:
            report.add("FILTER_KIND_INVALID", f"unknown filter kind {f.kind!r}", path)
        elif src is not None:
            _check_filter(f, src, report, path)

    tf = c.time_frame
    if tf.duration.count < 1:
        report.add("DURATION_INVALID", "time frame duration must be at least 1 unit", "time-frame")
    if src is not None:
        ctype = src.type_of(tf.field)
        if ctype is None:
            report.add("UNKNOWN_COLUMN", f"time frame field {tf.field!r} not in data source", "time-frame")
        elif ctype != "date":
            report.add("TEMPORAL_FIELD_REQUIRED", f"time frame field {tf.field!r} must be a date column, got {ctype}", "time-frame")

    field_names = {m.name for m in c.measures} | {d.name for d in c.dimensions}
    for channel, fname in sorted(c.original_design.encodings.items()):
        if fname not in field_names:
            report.add("ENCODED_FIELD_UNKNOWN", f"encoding {channel!r} references unknown field {fname!r}", "original-design")
    if c.original_design.mark not in MARKS:
        report.add("MARK_INVALID", f"unknown mark {c.original_design.mark!r}", "original-design")
    for i, s in enumerate(c.original_design.scales):
        if s.field not in field_names:
            report.add("ENCODED_FIELD_UNKNOWN", f"scale references unknown field {s.field!r}", f"original-design.scales[{i}]")

    if c.appearance not in APPEARANCES:
        report.add("APPEARANCE_INVALID", f"unknown appearance {c.appearance!r}", "appearance")
    if c.template is None and c.appearance == "text":
        report.add("APPEARANCE_REQUIRES_VISUAL", "a component without a template must show its original design", "appearance")

    for i, a in enumerate(c.annotations):
        path = f"annotations[{i}]"
        if a.kind not in ANNOTATION_KINDS:
            report.add("ANNOTATION_KIND_INVALID", f"unknown annotation kind {a.kind!r}", path)
        if a.measure is not None and a.measure not in {m.name for m in c.measures}:
            report.add("UNKNOWN_MEASURE_REF", f"annotation targets unknown measure {a.measure!r}", path)
        if a.kind == "reference-line" and a.value is None:
            report.add("ANNOTATION_TARGET_INVALID", "reference-line annotation requires a threshold value", path)
        if a.kind == "highlight" and a.category is None:
            report.add("ANNOTATION_TARGET_INVALID", "highlight annotation requires a dimension value", path)

    for i, fl in enumerate(c.interactive_filters):
        path = f"interactive-filters[{i}]"
        if fl.kind not in INTERACTIVE_KINDS:
            report.add("INTERACTIVE_KIND_INVALID", f"unknown interactive filter kind {fl.kind!r}", path)
            continue
        if fl.kind in ("dropdown", "slider"):
            if not fl.column:
                report.add("INTERACTIVE_FILTER_INVALID", f"{fl.kind} filter requires a column", path)
            elif src is not None:
                ctype = src.type_of(fl.column)
                if ctype is None:
                    report.add("UNKNOWN_COLUMN", f"interactive filter column {fl.column!r} not in data source", path)
                elif fl.kind == "slider" and ctype != "number":
                    report.add("FILTER_TYPE_MISMATCH", f"slider requires a number column, {fl.column!r} is {ctype}", path)
            if fl.kind == "slider" and (fl.min is None or fl.max is None or fl.min > fl.max):
                report.add("INTERACTIVE_FILTER_INVALID", "slider requires min <= max", path)
            if fl.kind == "dropdown" and not fl.options:
                report.add("INTERACTIVE_FILTER_INVALID", "dropdown requires allowed values", path)
        if fl.kind == "macro":
            if not fl.name:
                report.add("INTERACTIVE_FILTER_INVALID", "macro requires a name", path)
            if not fl.filters:
                report.add("MACRO_EMPTY", "macro filter list must be non-empty", path)
            elif src is not None:
                for j, mf in enumerate(fl.filters):
                    _check_filter(mf, src, report, f"{path}.filters[{j}]")

    if c.template is not None:
        _check_template_binding(c, report)
    if c.custom_text is not None:
        from .templates import check_text_expression  # deferred: templates imports this module

        for message in check_text_expression(c.custom_text):
            report.add("UNKNOWN_TOKEN", message, "custom-text")
    return report


def _check_template_binding(c: ComponentSpec, report: ValidationReport) -> None:
    from .templates import default_catalog  # deferred: templates imports this module

    design = default_catalog().get(c.template.design_id)
    if design is None:
        report.add("UNKNOWN_TEMPLATE", f"unknown template design {c.template.design_id!r}", "template")
        return
    missing = design.shape_gap(c.measures, c.dimensions)
    if missing:
        report.add("TEMPLATE_INAPPLICABLE", f"{design.id} not applicable: {missing}", "template")
    for message in design.check_parameters(c.template.config.parameters):
        report.add("PARAM_INVALID", message, "template.config.parameters")


class DataSourceRegistry:
    """Resolves data source ids to schemas (and, where loaded, tables)."""

    def __init__(self):
        self._schemas: dict[str, DataSourceSchema] = {}

    def register(self, source_id: str, schema: DataSourceSchema) -> None:
        self._schemas[source_id] = schema

    def resolve(self, source_id: str) -> DataSourceSchema | None:
        return self._schemas.get(source_id)

    def ids(self) -> list[str]:
        return sorted(self._schemas)


def validate_snapshot(s: SnapshotSpec, registry: DataSourceRegistry | None) -> ValidationReport:
    """Union of per-component reports plus snapshot-level checks."""
    report = ValidationReport()
    if not s.components:
        report.add("NO_COMPONENTS", "snapshot has no components", "components")

    seen_ids: set[str] = set()
    for i, c in enumerate(s.components):
        base = f"components[{i}]"
        if c.id in seen_ids:
            report.add("DUPLICATE_COMPONENT_ID", f"component id {c.id!r} appears more than once", base)
        seen_ids.add(c.id)
        schema = None
        if registry is not None:
            schema = registry.resolve(c.data_source)
            if schema is None:
                report.add("UNKNOWN_DATA_SOURCE", f"data source {c.data_source!r} is unresolvable", f"{base}.data-source")
        sub = validate_component(c, schema)
        for v in sub.violations:
            report.violations.append(replace(v, path=f"{base}.{v.path}" if v.path else base))

    cur = s.curation
    if cur.method not in CURATION_METHODS:
        report.add("CURATION_INVALID", f"unknown curation method {cur.method!r}", "curation")
    if cur.method == "slideshow" and cur.interval_seconds < 1:
        report.add("CURATION_PARAM_INVALID", "slideshow interval must be at least 1 second", "curation")
    if cur.method == "mini-dashboard" and cur.columns < 1:
        report.add("CURATION_PARAM_INVALID", "mini-dashboard needs at least 1 column", "curation")

    pol = s.update_policy
    if pol.mode not in UPDATE_MODES:
        report.add("UPDATE_POLICY_INVALID", f"unknown update mode {pol.mode!r}", "update-policy")
    if pol.mode == "auto-recur":
        if pol.period is None or pol.until is None or pol.publish_time is None:
            report.add("UPDATE_POLICY_INVALID", "auto-recur requires period, until, and publish-time", "update-policy")
        else:
            if pol.period.count < 1:
                report.add("DURATION_INVALID", "recurrence period must be at least 1 unit", "update-policy")
            if pol.until <= s.created_at.date():
                report.add("RECURRENCE_HORIZON_INVALID", f"recurrence horizon {pol.until} is not after creation {s.created_at.date()}", "update-policy")
    return report
