"""Parse, serialize, and canonicalize snapshot specifications (YAML surface).

Property names are the formal model's, lower-kebab-cased (`data-source`,
`time-frame`, `original-design`, `template-config`, `auto-recur`, ...).
Unknown keys are hard errors: silently ignoring a typo would hide an
analyst mistake behind a confusingly valid document.

Serialization is canonical: fixed key order, 2-space indentation, ISO-8601
dates, durations as "<count> <unit>" strings. parse(serialize(s)) equals s
structurally, and one canonicalization pass is a fixed point byte-for-byte.

The same decoding core accepts plain JSON-compatible dicts (used by the
HTTP API), in which case source spans are simply absent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date, datetime, time

import yaml
from yaml.resolver import Resolver

from .dates import Duration, DurationParseError, parse_duration
from .model import (
    AGGREGATES,
    ANNOTATION_KINDS,
    APPEARANCES,
    CURATION_METHODS,
    DIMENSION_KINDS,
    MARKS,
    MEASURE_KINDS,
    Annotation,
    ComponentSpec,
    Completeness,
    Curation,
    DashboardSelection,
    DataFilter,
    Dimension,
    InteractiveFilter,
    Measure,
    OriginalDesign,
    Scale,
    SnapshotSpec,
    TemplateBinding,
    TimeFrame,
    UpdatePolicy,
    ValidationReport,
    Violation,
)

SPEC_VERSION = 1

Span = tuple[int, int]  # (line, column), 1-based


class SpecParseError(Exception):
    """Syntax error, unknown key, type mismatch, or missing required field."""

    def __init__(self, code: str, message: str, line: int | None = None, column: int | None = None, path: str = ""):
        where = f" at {line}:{column}" if line is not None else ""
        super().__init__(f"{code}: {message}{where}")
        self.code = code
        self.reason = message
        self.line = line
        self.column = column
        self.path = path

    def as_violation(self) -> Violation:
        span = (self.line, self.column) if self.line is not None else None
        return Violation(self.code, self.reason, self.path, span)


@dataclass
class SpecDocument:
    raw_text: str
    parsed: SnapshotSpec | ComponentSpec
    source_span_index: dict[str, Span]


# ---------------------------------------------------------------------------
# YAML node tree -> plain data + span index


def _mark_span(mark) -> Span:
    return (mark.line + 1, mark.column + 1)


def _compose(text: str):
    try:
        return yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line, column = _mark_span(mark) if mark else (None, None)
        problem = getattr(e, "problem", None) or str(e)
        raise SpecParseError("SYNTAX", str(problem), line, column)


def _scalar_value(node):
    tag = node.tag
    value = node.value
    if tag.endswith(":null"):
        return None
    if tag.endswith(":bool"):
        return value.lower() in ("true", "yes", "on")
    if tag.endswith(":int"):
        try:
            return int(value.replace("_", ""), 0) if value.startswith(("0x", "0o")) else int(value.replace("_", ""))
        except ValueError:
            return value
    if tag.endswith(":float"):
        try:
            return float(value.replace("_", ""))
        except ValueError:
            return value
    # timestamps and everything else stay raw; field decoders own the parsing
    return value


def _node_to_data(node, path: str, spans: dict[str, Span]):
    spans.setdefault(path, _mark_span(node.start_mark))
    if isinstance(node, yaml.ScalarNode):
        return _scalar_value(node)
    if isinstance(node, yaml.SequenceNode):
        return [_node_to_data(child, f"{path}[{i}]", spans) for i, child in enumerate(node.value)]
    if isinstance(node, yaml.MappingNode):
        out = {}
        for key_node, value_node in node.value:
            if not isinstance(key_node, yaml.ScalarNode):
                raise SpecParseError("BAD_KEY", "mapping keys must be scalars", *_mark_span(key_node.start_mark), path=path)
            key = key_node.value
            child_path = f"{path}.{key}" if path else key
            if key in out:
                raise SpecParseError("DUPLICATE_KEY", f"duplicate key {key!r}", *_mark_span(key_node.start_mark), path=child_path)
            spans[child_path] = _mark_span(key_node.start_mark)
            out[key] = _node_to_data(value_node, child_path, spans)
        return out
    raise SpecParseError("SYNTAX", f"unsupported YAML node {type(node).__name__}", path=path)


def _load(text: str) -> tuple[object, dict[str, Span]]:
    node = _compose(text)
    if node is None:
        raise SpecParseError("EMPTY_DOCUMENT", "document is empty", 1, 1)
    spans: dict[str, Span] = {}
    return _node_to_data(node, "", spans), spans


# ---------------------------------------------------------------------------
# Decoding plain data into domain types


class _Decoder:
    def __init__(self, spans: dict[str, Span] | None):
        self.spans = spans or {}

    def fail(self, code: str, message: str, path: str):
        span = self.spans.get(path)
        if span is None and path:
            # fall back to the nearest recorded ancestor
            probe = path
            while span is None and probe:
                cut = max(probe.rfind("."), probe.rfind("["))
                probe = probe[:cut] if cut > 0 else ""
                span = self.spans.get(probe)
        line, column = span if span else (None, None)
        raise SpecParseError(code, message, line, column, path)

    def mapping(self, data, path: str, allowed: set[str], required: set[str]) -> dict:
        if not isinstance(data, dict):
            self.fail("TYPE_MISMATCH", f"expected a mapping, got {_typename(data)}", path)
        for key in data:
            if key not in allowed:
                self.fail("UNKNOWN_KEY", f"unknown key {key!r}", f"{path}.{key}" if path else key)
        for key in sorted(required):
            if key not in data:
                self.fail("MISSING_KEY", f"missing required key {key!r}", path)
        return data

    def str_(self, data, path: str) -> str:
        if isinstance(data, str):
            return data
        self.fail("TYPE_MISMATCH", f"expected a string, got {_typename(data)}", path)

    def bool_(self, data, path: str) -> bool:
        if isinstance(data, bool):
            return data
        self.fail("TYPE_MISMATCH", f"expected a boolean, got {_typename(data)}", path)

    def int_(self, data, path: str) -> int:
        if isinstance(data, int) and not isinstance(data, bool):
            return data
        self.fail("TYPE_MISMATCH", f"expected an integer, got {_typename(data)}", path)

    def number(self, data, path: str) -> int | float:
        if isinstance(data, (int, float)) and not isinstance(data, bool):
            return data
        self.fail("TYPE_MISMATCH", f"expected a number, got {_typename(data)}", path)

    def enum(self, data, path: str, values: tuple[str, ...]) -> str:
        text = self.str_(data, path)
        if text not in values:
            self.fail("BAD_VALUE", f"expected one of {', '.join(values)}; got {text!r}", path)
        return text

    def date_(self, data, path: str) -> date:
        if isinstance(data, datetime):
            return data.date()
        if isinstance(data, date):
            return data
        text = self.str_(data, path)
        try:
            return date.fromisoformat(text.strip())
        except ValueError:
            self.fail("BAD_VALUE", f"expected an ISO date (YYYY-MM-DD), got {text!r}", path)

    def datetime_(self, data, path: str) -> datetime:
        if isinstance(data, datetime):
            return data
        if isinstance(data, date):
            return datetime.combine(data, time(0, 0))
        text = self.str_(data, path)
        try:
            return datetime.fromisoformat(text.strip())
        except ValueError:
            self.fail("BAD_VALUE", f"expected an ISO timestamp, got {text!r}", path)

    def time_(self, data, path: str) -> time:
        if isinstance(data, time):
            return data
        text = self.str_(data, path)
        try:
            return time.fromisoformat(text.strip())
        except ValueError:
            self.fail("BAD_VALUE", f"expected a time of day (HH:MM), got {text!r}", path)

    def duration(self, data, path: str) -> Duration:
        if isinstance(data, Duration):
            return data
        text = self.str_(data, path)
        try:
            return parse_duration(text)
        except DurationParseError as e:
            self.fail("BAD_VALUE", str(e), path)

    def list_(self, data, path: str) -> list:
        if isinstance(data, list):
            return data
        self.fail("TYPE_MISMATCH", f"expected a list, got {_typename(data)}", path)

    def scalar(self, data, path: str):
        """A filter/parameter value: string, number, or date."""
        if isinstance(data, (str, int, float)) and not isinstance(data, bool):
            if isinstance(data, str):
                try:
                    return date.fromisoformat(data.strip())
                except ValueError:
                    return data
            return data
        if isinstance(data, date):
            return data
        self.fail("TYPE_MISMATCH", f"expected a scalar value, got {_typename(data)}", path)

    # -- domain structures --------------------------------------------------

    def measure(self, data, path: str) -> Measure:
        self.mapping(data, path, {"name", "kind", "column", "aggregate", "expression", "unit"}, {"name", "kind"})
        kind = self.enum(data["kind"], f"{path}.kind", MEASURE_KINDS)
        aggregate = None
        if "aggregate" in data:
            aggregate = self.enum(data["aggregate"], f"{path}.aggregate", AGGREGATES)
        return Measure(
            name=self.str_(data["name"], f"{path}.name"),
            kind=kind,
            source_column=self.str_(data["column"], f"{path}.column") if "column" in data else None,
            aggregate=aggregate,
            expression=self.str_(data["expression"], f"{path}.expression") if "expression" in data else None,
            unit=self.str_(data["unit"], f"{path}.unit") if "unit" in data else None,
        )

    def dimension(self, data, path: str) -> Dimension:
        self.mapping(data, path, {"name", "column", "kind"}, {"name", "column", "kind"})
        return Dimension(
            name=self.str_(data["name"], f"{path}.name"),
            source_column=self.str_(data["column"], f"{path}.column"),
            kind=self.enum(data["kind"], f"{path}.kind", DIMENSION_KINDS),
        )

    def data_filter(self, data, path: str) -> DataFilter:
        self.mapping(data, path, {"column", "equals", "one-of", "range", "date-range"}, {"column"})
        column = self.str_(data["column"], f"{path}.column")
        predicates = [k for k in ("equals", "one-of", "range", "date-range") if k in data]
        if len(predicates) != 1:
            self.fail("BAD_VALUE", "filter needs exactly one of equals, one-of, range, date-range", path)
        kind = predicates[0]
        if kind == "equals":
            return DataFilter(column, "equals", value=self.scalar(data["equals"], f"{path}.equals"))
        if kind == "one-of":
            values = self.list_(data["one-of"], f"{path}.one-of")
            return DataFilter(column, "one_of", values=tuple(self.scalar(v, f"{path}.one-of[{i}]") for i, v in enumerate(values)))
        if kind == "range":
            pair = self.list_(data["range"], f"{path}.range")
            if len(pair) != 2:
                self.fail("BAD_VALUE", "range expects [low, high]", f"{path}.range")
            return DataFilter(column, "range", low=self.number(pair[0], f"{path}.range[0]"), high=self.number(pair[1], f"{path}.range[1]"))
        pair = self.list_(data["date-range"], f"{path}.date-range")
        if len(pair) != 2:
            self.fail("BAD_VALUE", "date-range expects [start, end]", f"{path}.date-range")
        return DataFilter(
            column,
            "date_range",
            start=self.date_(pair[0], f"{path}.date-range[0]"),
            end=self.date_(pair[1], f"{path}.date-range[1]"),
        )

    def time_frame(self, data, path: str) -> TimeFrame:
        self.mapping(data, path, {"field", "start", "duration"}, {"field", "start", "duration"})
        return TimeFrame(
            field=self.str_(data["field"], f"{path}.field"),
            start=self.date_(data["start"], f"{path}.start"),
            duration=self.duration(data["duration"], f"{path}.duration"),
        )

    def scale(self, data, path: str) -> Scale:
        self.mapping(data, path, {"field", "kind", "domain", "range"}, {"field", "kind"})
        domain = tuple(self.scalar(v, f"{path}.domain[{i}]") for i, v in enumerate(self.list_(data["domain"], f"{path}.domain"))) if "domain" in data else ()
        range_ = tuple(self.scalar(v, f"{path}.range[{i}]") for i, v in enumerate(self.list_(data["range"], f"{path}.range"))) if "range" in data else ()
        return Scale(
            field=self.str_(data["field"], f"{path}.field"),
            kind=self.str_(data["kind"], f"{path}.kind"),
            domain=domain,
            range=range_,
        )

    def original_design(self, data, path: str) -> OriginalDesign:
        self.mapping(data, path, {"mark", "encodings", "scales"}, {"mark"})
        encodings = {}
        if "encodings" in data:
            enc = data["encodings"]
            if not isinstance(enc, dict):
                self.fail("TYPE_MISMATCH", "encodings must map channels to field names", f"{path}.encodings")
            for channel, fname in enc.items():
                if channel not in ("x", "y", "color"):
                    self.fail("UNKNOWN_KEY", f"unknown encoding channel {channel!r}", f"{path}.encodings.{channel}")
                encodings[channel] = self.str_(fname, f"{path}.encodings.{channel}")
        scales = ()
        if "scales" in data:
            scales = tuple(self.scale(s, f"{path}.scales[{i}]") for i, s in enumerate(self.list_(data["scales"], f"{path}.scales")))
        return OriginalDesign(mark=self.enum(data["mark"], f"{path}.mark", MARKS), encodings=encodings, scales=scales)

    def annotation(self, data, path: str) -> Annotation:
        self.mapping(data, path, {"kind", "category", "measure", "value", "text"}, {"kind"})
        return Annotation(
            kind=self.enum(data["kind"], f"{path}.kind", ANNOTATION_KINDS),
            category=self.str_(data["category"], f"{path}.category") if "category" in data else None,
            measure=self.str_(data["measure"], f"{path}.measure") if "measure" in data else None,
            value=self.number(data["value"], f"{path}.value") if "value" in data else None,
            text=self.str_(data["text"], f"{path}.text") if "text" in data else None,
        )

    def interactive_filter(self, data, path: str) -> InteractiveFilter:
        self.mapping(data, path, {"kind", "column", "options", "min", "max", "name", "filters"}, {"kind"})
        kind = self.enum(data["kind"], f"{path}.kind", ("dropdown", "slider", "macro"))
        if kind == "dropdown":
            self.mapping(data, path, {"kind", "column", "options"}, {"kind", "column", "options"})
            options = tuple(self.scalar(v, f"{path}.options[{i}]") for i, v in enumerate(self.list_(data["options"], f"{path}.options")))
            return InteractiveFilter(kind="dropdown", column=self.str_(data["column"], f"{path}.column"), options=options)
        if kind == "slider":
            self.mapping(data, path, {"kind", "column", "min", "max"}, {"kind", "column", "min", "max"})
            return InteractiveFilter(
                kind="slider",
                column=self.str_(data["column"], f"{path}.column"),
                min=self.number(data["min"], f"{path}.min"),
                max=self.number(data["max"], f"{path}.max"),
            )
        self.mapping(data, path, {"kind", "name", "filters"}, {"kind", "name", "filters"})
        filters = tuple(self.data_filter(f, f"{path}.filters[{i}]") for i, f in enumerate(self.list_(data["filters"], f"{path}.filters")))
        return InteractiveFilter(kind="macro", name=self.str_(data["name"], f"{path}.name"), filters=filters)

    def parameters(self, data, path: str) -> dict:
        if not isinstance(data, dict):
            self.fail("TYPE_MISMATCH", "parameters must be a mapping", path)
        out = {}
        for name, value in data.items():
            if isinstance(value, dict):
                out[name] = {str(k): self.scalar(v, f"{path}.{name}.{k}") for k, v in value.items()}
            else:
                out[name] = self.scalar(value, f"{path}.{name}")
        return out

    def component(self, data, path: str) -> ComponentSpec:
        allowed = {
            "spec-version", "id", "data-source", "data-filters", "measures", "dimensions",
            "time-frame", "original-design", "appearance", "template", "caption",
            "custom-text", "annotations", "interactive-filters",
        }
        required = {"id", "data-source", "measures", "time-frame", "original-design"}
        self.mapping(data, path, allowed, required)
        if "spec-version" in data and path == "":
            version = self.int_(data["spec-version"], "spec-version")
            if version != SPEC_VERSION:
                self.fail("VERSION_UNSUPPORTED", f"spec-version {version} is not supported (expected {SPEC_VERSION})", "spec-version")
        elif "spec-version" in data:
            self.fail("UNKNOWN_KEY", "spec-version belongs at the document root", f"{path}.spec-version")

        template = None
        if "template" in data:
            tpath = f"{path}.template" if path else "template"
            tdata = self.mapping(data["template"], tpath, {"design-id", "template-config"}, {"design-id"})
            params = {}
            if "template-config" in tdata:
                cdata = self.mapping(tdata["template-config"], f"{tpath}.template-config", {"parameters"}, set())
                if "parameters" in cdata:
                    params = self.parameters(cdata["parameters"], f"{tpath}.template-config.parameters")
            template = (self.str_(tdata["design-id"], f"{tpath}.design-id"), params)

        def sub(key: str) -> str:
            return f"{path}.{key}" if path else key

        component = ComponentSpec(
            id=self.str_(data["id"], sub("id")),
            data_source=self.str_(data["data-source"], sub("data-source")),
            measures=tuple(self.measure(m, f"{sub('measures')}[{i}]") for i, m in enumerate(self.list_(data["measures"], sub("measures")))),
            time_frame=self.time_frame(data["time-frame"], sub("time-frame")),
            original_design=self.original_design(data["original-design"], sub("original-design")),
            appearance=self.enum(data["appearance"], sub("appearance"), APPEARANCES) if "appearance" in data else "visual",
            data_filters=tuple(self.data_filter(f, f"{sub('data-filters')}[{i}]") for i, f in enumerate(self.list_(data["data-filters"], sub("data-filters")))) if "data-filters" in data else (),
            dimensions=tuple(self.dimension(d, f"{sub('dimensions')}[{i}]") for i, d in enumerate(self.list_(data["dimensions"], sub("dimensions")))) if "dimensions" in data else (),
            caption=self.str_(data["caption"], sub("caption")) if "caption" in data else None,
            custom_text=self.str_(data["custom-text"], sub("custom-text")) if "custom-text" in data else None,
            annotations=tuple(self.annotation(a, f"{sub('annotations')}[{i}]") for i, a in enumerate(self.list_(data["annotations"], sub("annotations")))) if "annotations" in data else (),
            interactive_filters=tuple(self.interactive_filter(f, f"{sub('interactive-filters')}[{i}]") for i, f in enumerate(self.list_(data["interactive-filters"], sub("interactive-filters")))) if "interactive-filters" in data else (),
        )
        if template is not None:
            from .templates import transfer_config

            design_id, params = template
            component = ComponentSpec(
                **{**_component_kwargs(component), "template": TemplateBinding(design_id, transfer_config(component, params))}
            )
        return component

    def curation(self, data, path: str) -> Curation:
        if isinstance(data, str):
            method = self.enum(data, path, CURATION_METHODS)
            return Curation(method)
        cdata = self.mapping(data, path, {"slideshow", "mini-dashboard"}, set())
        if len(cdata) != 1:
            self.fail("BAD_VALUE", "curation mapping needs exactly one method", path)
        method = next(iter(cdata))
        body = cdata[method] or {}
        if method == "slideshow":
            body = self.mapping(body, f"{path}.slideshow", {"interval"}, set())
            interval = self.int_(body["interval"], f"{path}.slideshow.interval") if "interval" in body else 5
            return Curation("slideshow", interval_seconds=interval)
        body = self.mapping(body, f"{path}.mini-dashboard", {"columns"}, set())
        columns = self.int_(body["columns"], f"{path}.mini-dashboard.columns") if "columns" in body else 2
        return Curation("mini-dashboard", columns=columns)

    def update_policy(self, data, path: str) -> UpdatePolicy:
        if isinstance(data, str):
            mode = self.enum(data, path, ("manual-author", "manual-viewer"))
            return UpdatePolicy(mode)
        pdata = self.mapping(data, path, {"auto-recur"}, {"auto-recur"})
        body = self.mapping(pdata["auto-recur"], f"{path}.auto-recur", {"period", "until", "publish-time"}, {"period", "until", "publish-time"})
        return UpdatePolicy(
            mode="auto-recur",
            period=self.duration(body["period"], f"{path}.auto-recur.period"),
            until=self.date_(body["until"], f"{path}.auto-recur.until"),
            publish_time=self.time_(body["publish-time"], f"{path}.auto-recur.publish-time"),
        )

    def snapshot(self, data) -> SnapshotSpec:
        allowed = {
            "spec-version", "id", "title", "components", "curation", "freshness",
            "completeness", "text-message", "update-policy", "created-at", "author",
        }
        required = {"id", "title", "components", "curation", "update-policy", "created-at", "author"}
        self.mapping(data, "", allowed, required)
        if "spec-version" in data:
            version = self.int_(data["spec-version"], "spec-version")
            if version != SPEC_VERSION:
                self.fail("VERSION_UNSUPPORTED", f"spec-version {version} is not supported (expected {SPEC_VERSION})", "spec-version")
        components = tuple(
            self.component(c, f"components[{i}]") for i, c in enumerate(self.list_(data["components"], "components"))
        )
        completeness = None
        if "completeness" in data:
            cdata = self.mapping(data["completeness"], "completeness", {"complete", "note"}, {"complete"})
            completeness = Completeness(
                complete=self.bool_(cdata["complete"], "completeness.complete"),
                note=self.str_(cdata["note"], "completeness.note") if "note" in cdata else None,
            )
        if "freshness" in data:
            freshness = self.date_(data["freshness"], "freshness")
        else:
            if not components:
                self.fail("MISSING_KEY", "freshness cannot be inferred without components", "")
            from .lifecycle import infer_freshness_from_components

            freshness = infer_freshness_from_components(components)
        return SnapshotSpec(
            id=self.str_(data["id"], "id"),
            title=self.str_(data["title"], "title"),
            components=components,
            curation=self.curation(data["curation"], "curation"),
            freshness=freshness,
            update_policy=self.update_policy(data["update-policy"], "update-policy"),
            created_at=self.datetime_(data["created-at"], "created-at"),
            author=self.str_(data["author"], "author"),
            completeness=completeness,
            text_message=self.str_(data["text-message"], "text-message") if "text-message" in data else None,
        )

    def selection(self, data, path: str) -> DashboardSelection:
        allowed = {"panel-id", "worksheet", "data-source", "measures", "dimensions", "data-filters", "original-design"}
        self.mapping(data, path, allowed, {"panel-id", "worksheet", "data-source", "measures", "original-design"})

        def sub(key: str) -> str:
            return f"{path}.{key}" if path else key

        return DashboardSelection(
            panel_id=self.str_(data["panel-id"], sub("panel-id")),
            worksheet=self.str_(data["worksheet"], sub("worksheet")),
            data_source=self.str_(data["data-source"], sub("data-source")),
            measures=tuple(self.measure(m, f"{sub('measures')}[{i}]") for i, m in enumerate(self.list_(data["measures"], sub("measures")))),
            dimensions=tuple(self.dimension(d, f"{sub('dimensions')}[{i}]") for i, d in enumerate(self.list_(data["dimensions"], sub("dimensions")))) if "dimensions" in data else (),
            data_filters=tuple(self.data_filter(f, f"{sub('data-filters')}[{i}]") for i, f in enumerate(self.list_(data["data-filters"], sub("data-filters")))) if "data-filters" in data else (),
            original_design=self.original_design(data["original-design"], sub("original-design")),
        )


def _component_kwargs(c: ComponentSpec) -> dict:
    return {
        "id": c.id, "data_source": c.data_source, "measures": c.measures,
        "time_frame": c.time_frame, "original_design": c.original_design,
        "appearance": c.appearance, "data_filters": c.data_filters,
        "dimensions": c.dimensions, "template": c.template, "caption": c.caption,
        "custom_text": c.custom_text, "annotations": c.annotations,
        "interactive_filters": c.interactive_filters,
    }


def _typename(data) -> str:
    return {dict: "mapping", list: "list", str: "string", bool: "boolean", int: "integer", float: "number", type(None): "null"}.get(type(data), type(data).__name__)


# ---------------------------------------------------------------------------
# Public parse API


def snapshot_from_data(data, spans: dict[str, Span] | None = None) -> SnapshotSpec:
    return _Decoder(spans).snapshot(data)


def component_from_data(data, spans: dict[str, Span] | None = None, path: str = "") -> ComponentSpec:
    return _Decoder(spans).component(data, path)


def selection_from_data(data, spans: dict[str, Span] | None = None, path: str = "") -> DashboardSelection:
    return _Decoder(spans).selection(data, path)


def parse_snapshot_document(text: str) -> SpecDocument:
    data, spans = _load(text)
    return SpecDocument(text, snapshot_from_data(data, spans), spans)


def parse_snapshot(text: str) -> SnapshotSpec:
    return parse_snapshot_document(text).parsed


def parse_component_document(text: str) -> SpecDocument:
    data, spans = _load(text)
    return SpecDocument(text, component_from_data(data, spans), spans)


def parse_component(text: str) -> ComponentSpec:
    return parse_component_document(text).parsed


def parse_any_document(text: str) -> SpecDocument:
    """A snapshot document or a single-component document."""
    data, spans = _load(text)
    if isinstance(data, dict) and "components" in data:
        return SpecDocument(text, snapshot_from_data(data, spans), spans)
    return SpecDocument(text, component_from_data(data, spans), spans)


# ---------------------------------------------------------------------------
# Canonical data form (kebab keys, fixed order)


def measure_to_data(m: Measure) -> dict:
    out = {"name": m.name, "kind": m.kind}
    if m.source_column is not None:
        out["column"] = m.source_column
    if m.aggregate is not None:
        out["aggregate"] = m.aggregate
    if m.expression is not None:
        out["expression"] = m.expression
    if m.unit is not None:
        out["unit"] = m.unit
    return out


def dimension_to_data(d: Dimension) -> dict:
    return {"name": d.name, "column": d.source_column, "kind": d.kind}


def filter_to_data(f: DataFilter) -> dict:
    out = {"column": f.column}
    if f.kind == "equals":
        out["equals"] = f.value
    elif f.kind == "one_of":
        out["one-of"] = list(f.values)
    elif f.kind == "range":
        out["range"] = [f.low, f.high]
    else:
        out["date-range"] = [f.start, f.end]
    return out


def time_frame_to_data(tf: TimeFrame) -> dict:
    return {"field": tf.field, "start": tf.start, "duration": tf.duration}


def scale_to_data(s: Scale) -> dict:
    out = {"field": s.field, "kind": s.kind}
    if s.domain:
        out["domain"] = list(s.domain)
    if s.range:
        out["range"] = list(s.range)
    return out


def design_to_data(d: OriginalDesign) -> dict:
    out = {"mark": d.mark}
    if d.encodings:
        out["encodings"] = {k: d.encodings[k] for k in sorted(d.encodings)}
    if d.scales:
        out["scales"] = [scale_to_data(s) for s in d.scales]
    return out


def annotation_to_data(a: Annotation) -> dict:
    out = {"kind": a.kind}
    if a.category is not None:
        out["category"] = a.category
    if a.measure is not None:
        out["measure"] = a.measure
    if a.value is not None:
        out["value"] = a.value
    if a.text is not None:
        out["text"] = a.text
    return out


def interactive_filter_to_data(f: InteractiveFilter) -> dict:
    if f.kind == "dropdown":
        return {"kind": "dropdown", "column": f.column, "options": list(f.options)}
    if f.kind == "slider":
        return {"kind": "slider", "column": f.column, "min": f.min, "max": f.max}
    return {"kind": "macro", "name": f.name, "filters": [filter_to_data(x) for x in f.filters]}


def _sorted_params(params: dict) -> dict:
    out = {}
    for name in sorted(params):
        value = params[name]
        out[name] = {k: value[k] for k in sorted(value)} if isinstance(value, dict) else value
    return out


def component_to_data(c: ComponentSpec, root: bool = False) -> dict:
    out: dict = {}
    if root:
        out["spec-version"] = SPEC_VERSION
    out["id"] = c.id
    out["data-source"] = c.data_source
    if c.data_filters:
        out["data-filters"] = [filter_to_data(f) for f in c.data_filters]
    out["measures"] = [measure_to_data(m) for m in c.measures]
    if c.dimensions:
        out["dimensions"] = [dimension_to_data(d) for d in c.dimensions]
    out["time-frame"] = time_frame_to_data(c.time_frame)
    out["original-design"] = design_to_data(c.original_design)
    out["appearance"] = c.appearance
    if c.template is not None:
        out["template"] = {
            "design-id": c.template.design_id,
            "template-config": {"parameters": _sorted_params(c.template.config.parameters)},
        }
    if c.caption is not None:
        out["caption"] = c.caption
    if c.custom_text is not None:
        out["custom-text"] = c.custom_text
    if c.annotations:
        out["annotations"] = [annotation_to_data(a) for a in c.annotations]
    if c.interactive_filters:
        out["interactive-filters"] = [interactive_filter_to_data(f) for f in c.interactive_filters]
    return out


def curation_to_data(cur: Curation):
    if cur.method == "slideshow":
        return {"slideshow": {"interval": cur.interval_seconds}}
    if cur.method == "mini-dashboard":
        return {"mini-dashboard": {"columns": cur.columns}}
    return cur.method


def policy_to_data(pol: UpdatePolicy):
    if pol.mode != "auto-recur":
        return pol.mode
    return {"auto-recur": {"period": pol.period, "until": pol.until, "publish-time": pol.publish_time}}


def snapshot_to_data(s: SnapshotSpec) -> dict:
    out: dict = {"spec-version": SPEC_VERSION, "id": s.id, "title": s.title}
    out["components"] = [component_to_data(c) for c in s.components]
    out["curation"] = curation_to_data(s.curation)
    out["freshness"] = s.freshness
    if s.completeness is not None:
        cdata: dict = {"complete": s.completeness.complete}
        if s.completeness.note is not None:
            cdata["note"] = s.completeness.note
        out["completeness"] = cdata
    if s.text_message is not None:
        out["text-message"] = s.text_message
    out["update-policy"] = policy_to_data(s.update_policy)
    out["created-at"] = s.created_at
    out["author"] = s.author
    return out


def selection_to_data(sel: DashboardSelection) -> dict:
    out: dict = {
        "panel-id": sel.panel_id,
        "worksheet": sel.worksheet,
        "data-source": sel.data_source,
    }
    if sel.data_filters:
        out["data-filters"] = [filter_to_data(f) for f in sel.data_filters]
    out["measures"] = [measure_to_data(m) for m in sel.measures]
    if sel.dimensions:
        out["dimensions"] = [dimension_to_data(d) for d in sel.dimensions]
    out["original-design"] = design_to_data(sel.original_design)
    return out


def jsonify(value):
    """Convert canonical data to JSON-compatible values (dates -> ISO)."""
    if isinstance(value, dict):
        return {k: jsonify(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonify(v) for v in value]
    if isinstance(value, Duration):
        return str(value)
    if isinstance(value, datetime):
        return value.isoformat()
    if isinstance(value, (date, time)):
        return value.isoformat()
    return value


# ---------------------------------------------------------------------------
# Canonical YAML emitter

_resolver = Resolver()


def _plain_would_retag(text: str) -> bool:
    tag = _resolver.resolve(yaml.nodes.ScalarNode, text, (True, False))
    return tag != "tag:yaml.org,2002:str"


def _needs_quote(text: str) -> bool:
    if text == "" or text != text.strip():
        return True
    if "\n" in text or '"' in text or "\\" in text:
        return True
    if text[0] in "!&*?|>%@`'\"#[]{},-":
        return True
    if ": " in text or text.endswith(":") or " #" in text:
        return True
    return _plain_would_retag(text)


def _emit_scalar(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, datetime):
        return value.isoformat()
    if isinstance(value, date):
        return value.isoformat()
    if isinstance(value, time):
        return '"' + value.isoformat("minutes" if value.second == 0 and value.microsecond == 0 else "auto") + '"'
    if isinstance(value, Duration):
        return str(value)
    text = str(value)
    return json.dumps(text, ensure_ascii=False) if _needs_quote(text) else text


def _is_scalar(value) -> bool:
    return not isinstance(value, (dict, list, tuple))


def _emit(value, indent: int, lines: list[str]) -> None:
    pad = "  " * indent
    if isinstance(value, dict):
        for key, item in value.items():
            key_text = _emit_scalar(key) if not isinstance(key, str) else (json.dumps(key, ensure_ascii=False) if _needs_quote(key) else key)
            if _is_scalar(item):
                lines.append(f"{pad}{key_text}: {_emit_scalar(item)}")
            elif not item:
                lines.append(f"{pad}{key_text}: {'{}' if isinstance(item, dict) else '[]'}")
            elif isinstance(item, (list, tuple)) and all(_is_scalar(v) for v in item):
                flow = ", ".join(_emit_scalar(v) for v in item)
                lines.append(f"{pad}{key_text}: [{flow}]")
            else:
                lines.append(f"{pad}{key_text}:")
                _emit(item, indent + 1, lines)
    elif isinstance(value, (list, tuple)):
        for item in value:
            if _is_scalar(item):
                lines.append(f"{pad}- {_emit_scalar(item)}")
            elif isinstance(item, dict) and item:
                sub: list[str] = []
                _emit(item, indent + 1, sub)
                first = sub[0].lstrip()
                lines.append(f"{pad}- {first}")
                lines.extend(sub[1:])
            else:
                lines.append(f"{pad}-")
                _emit(item, indent + 1, lines)
    else:
        lines.append(f"{pad}{_emit_scalar(value)}")


def emit_yaml(data) -> str:
    lines: list[str] = []
    _emit(data, 0, lines)
    return "\n".join(lines) + "\n"


def serialize_snapshot(s: SnapshotSpec) -> str:
    return emit_yaml(snapshot_to_data(s))


def serialize_component(c: ComponentSpec) -> str:
    return emit_yaml(component_to_data(c, root=True))


# ---------------------------------------------------------------------------
# Lint


def lint(text: str, registry=None) -> ValidationReport:
    """Parse + validate with source spans attached.

    Unparseable text yields a single syntax entry and no validation entries.
    Without a registry only schema-independent checks run.
    """
    from .model import validate_snapshot

    try:
        doc = parse_any_document(text)
    except SpecParseError as e:
        return ValidationReport([e.as_violation()])
    if isinstance(doc.parsed, SnapshotSpec):
        report = validate_snapshot(doc.parsed, registry)
    else:
        from .model import validate_component

        schema = registry.resolve(doc.parsed.data_source) if registry is not None else None
        report = validate_component(doc.parsed, schema)
    return report.with_spans(doc.source_span_index)


# ---------------------------------------------------------------------------
# Dashboard descriptors (panels provided to the system as YAML files)


@dataclass(frozen=True)
class DataSourceDecl:
    id: str
    csv: str  # path, relative to the descriptor file
    schema: dict | None = None  # column -> declared type


@dataclass(frozen=True)
class DashboardDescriptor:
    id: str
    title: str
    data_sources: tuple[DataSourceDecl, ...]
    panels: tuple[DashboardSelection, ...]

    def panel(self, panel_id: str) -> DashboardSelection | None:
        for p in self.panels:
            if p.panel_id == panel_id:
                return p
        return None


def dashboard_from_data(data, spans: dict[str, Span] | None = None) -> DashboardDescriptor:
    dec = _Decoder(spans)
    dec.mapping(data, "", {"dashboard", "data-sources", "panels"}, {"dashboard", "data-sources", "panels"})
    head = dec.mapping(data["dashboard"], "dashboard", {"id", "title"}, {"id", "title"})
    sources = []
    for i, s in enumerate(dec.list_(data["data-sources"], "data-sources")):
        path = f"data-sources[{i}]"
        sdata = dec.mapping(s, path, {"id", "csv", "schema"}, {"id", "csv"})
        schema = None
        if "schema" in sdata:
            if not isinstance(sdata["schema"], dict):
                dec.fail("TYPE_MISMATCH", "schema must map columns to types", f"{path}.schema")
            schema = {str(k): dec.enum(v, f"{path}.schema.{k}", ("number", "string", "date")) for k, v in sdata["schema"].items()}
        sources.append(DataSourceDecl(dec.str_(sdata["id"], f"{path}.id"), dec.str_(sdata["csv"], f"{path}.csv"), schema))
    seen: set[str] = set()
    panels = []
    for i, p in enumerate(dec.list_(data["panels"], "panels")):
        sel = dec.selection(p, f"panels[{i}]")
        if sel.panel_id in seen:
            dec.fail("DUPLICATE_PANEL_ID", f"panel id {sel.panel_id!r} appears more than once", f"panels[{i}].panel-id")
        seen.add(sel.panel_id)
        panels.append(sel)
    return DashboardDescriptor(
        id=dec.str_(head["id"], "dashboard.id"),
        title=dec.str_(head["title"], "dashboard.title"),
        data_sources=tuple(sources),
        panels=tuple(panels),
    )


def parse_dashboard(text: str) -> DashboardDescriptor:
    data, spans = _load(text)
    return dashboard_from_data(data, spans)


def dashboard_to_data(d: DashboardDescriptor) -> dict:
    sources = []
    for s in d.data_sources:
        sdata: dict = {"id": s.id, "csv": s.csv}
        if s.schema:
            sdata["schema"] = {k: s.schema[k] for k in sorted(s.schema)}
        sources.append(sdata)
    return {
        "dashboard": {"id": d.id, "title": d.title},
        "data-sources": sources,
        "panels": [selection_to_data(p) for p in d.panels],
    }
