"""Template catalog, applicability validation, mediation, and rendering.

Three built-in designs ship with the catalog: a simple breakdown of one
measure by one dimension, the same breakdown with per-category goals, and a
time series with optional thresholds and optional disaggregation.

Applicability is shape-driven, Show-Me style: a template is offered exactly
when the component (or raw dashboard selection) satisfies its shape
requirements; designs whose only unmet needs are parameter values are
offered with those parameters flagged for the analyst to supply.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import date

from .data import ResultTable
from .errors import TemplateError
from .fmt import format_number, format_percent, format_value
from .model import (
    ComponentSpec,
    DashboardSelection,
    Dimension,
    Measure,
    Scale,
    TemplateConfig,
)
from .svg import DEFAULT_PALETTE, GOAL_GRAY, SvgBuilder, nice_ceiling

DEFAULT_CATEGORY_CAP = 12

PARAM_TYPES = ("number", "number-per-category", "text")


@dataclass(frozen=True)
class ShapeRequirements:
    """What a component must look like for a template to communicate."""

    measure_count: int = 1
    nominal_min: int = 0
    nominal_max: int = 0
    temporal_count: int = 0
    category_cap: int = DEFAULT_CATEGORY_CAP


@dataclass(frozen=True)
class ParameterDefinition:
    name: str
    type: str  # number | number-per-category | text
    required: bool = False


@dataclass(frozen=True)
class TemplateDesign:
    id: str
    intent: str
    requirements: ShapeRequirements
    parameter_definitions: tuple[ParameterDefinition, ...] = ()
    visual_design: str = ""  # render recipe id
    text_template: str = ""  # text recipe id

    def required_params(self) -> list[str]:
        return [p.name for p in self.parameter_definitions if p.required]

    def param(self, name: str) -> ParameterDefinition | None:
        for p in self.parameter_definitions:
            if p.name == name:
                return p
        return None

    def shape_gap(self, measures: tuple[Measure, ...], dims: tuple[Dimension, ...]) -> str:
        """Empty string when requirements are met, else what is missing."""
        req = self.requirements
        nominal = [d for d in dims if d.kind == "nominal"]
        temporal = [d for d in dims if d.kind == "temporal"]
        if len(measures) != req.measure_count:
            return f"needs exactly {req.measure_count} measure(s), has {len(measures)}"
        if not (req.nominal_min <= len(nominal) <= req.nominal_max):
            if req.nominal_min == req.nominal_max:
                return f"needs exactly {req.nominal_min} nominal dimension(s), has {len(nominal)}"
            return f"needs {req.nominal_min}..{req.nominal_max} nominal dimension(s), has {len(nominal)}"
        if len(temporal) != req.temporal_count:
            return f"needs exactly {req.temporal_count} temporal dimension(s), has {len(temporal)}"
        return ""

    def check_parameters(self, params: dict, categories: list[str] | None = None) -> list[str]:
        """Violation messages for a parameter map (empty list = valid)."""
        problems = []
        for name in sorted(params):
            if self.param(name) is None:
                problems.append(f"unknown parameter {name!r} for template {self.id}")
        for p in self.parameter_definitions:
            if p.name not in params:
                if p.required:
                    problems.append(f"missing required parameter {p.name!r}")
                continue
            value = params[p.name]
            if p.type == "number":
                if not _is_number(value):
                    problems.append(f"parameter {p.name!r} must be a number")
            elif p.type == "text":
                if not isinstance(value, str):
                    problems.append(f"parameter {p.name!r} must be text")
            elif p.type == "number-per-category":
                if not isinstance(value, dict) or not all(_is_number(v) for v in value.values()):
                    problems.append(f"parameter {p.name!r} must map categories to numbers")
                elif categories is not None:
                    known = set(categories)
                    for key in sorted(set(value) - known):
                        problems.append(f"parameter {p.name!r} names unknown category {key!r}")
                    gaps = sorted(known - set(value))
                    if gaps:
                        problems.append(f"parameter {p.name!r} missing categories: {', '.join(gaps)}")
        return problems


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


SIMPLE_BREAKDOWN = TemplateDesign(
    id="simple-breakdown",
    intent="break one measure down by one dimension",
    requirements=ShapeRequirements(measure_count=1, nominal_min=1, nominal_max=1, temporal_count=0),
    parameter_definitions=(),
    visual_design="breakdown-bars",
    text_template="breakdown-sentences",
)

BREAKDOWN_WITH_GOAL = TemplateDesign(
    id="breakdown-with-goal",
    intent="show progress of one measure against per-category goals",
    requirements=ShapeRequirements(measure_count=1, nominal_min=1, nominal_max=1, temporal_count=0),
    parameter_definitions=(
        ParameterDefinition("goal", "number-per-category", required=True),
        ParameterDefinition("total-goal", "number", required=False),
    ),
    visual_design="breakdown-bars",
    text_template="breakdown-sentences",
)

TIME_SERIES_WITH_THRESHOLD = TemplateDesign(
    id="time-series-with-threshold",
    intent="show the trend of one measure over time, optionally against thresholds",
    requirements=ShapeRequirements(measure_count=1, nominal_min=0, nominal_max=1, temporal_count=1),
    parameter_definitions=(
        ParameterDefinition("upper-threshold", "number", required=False),
        ParameterDefinition("lower-threshold", "number", required=False),
    ),
    visual_design="time-series",
    text_template="trend-sentence",
)


class TemplateCatalog:
    """Ordered, immutable collection of template designs."""

    def __init__(self, designs: list[TemplateDesign]):
        self._designs = tuple(designs)
        self._by_id = {d.id: d for d in designs}

    def get(self, design_id: str) -> TemplateDesign | None:
        return self._by_id.get(design_id)

    def require(self, design_id: str) -> TemplateDesign:
        d = self.get(design_id)
        if d is None:
            raise TemplateError(f"unknown template design {design_id!r}", code="UNKNOWN_TEMPLATE")
        return d

    def __iter__(self):
        return iter(self._designs)

    def __len__(self):
        return len(self._designs)


_DEFAULT = TemplateCatalog([SIMPLE_BREAKDOWN, BREAKDOWN_WITH_GOAL, TIME_SERIES_WITH_THRESHOLD])


def default_catalog() -> TemplateCatalog:
    return _DEFAULT


def load_catalog(data: dict) -> TemplateCatalog:
    """Build a catalog from the YAML catalog file structure."""
    designs = []
    for entry in data.get("templates", []):
        req = entry.get("requirements", {})
        nominal = req.get("nominal-dimensions", 0)
        if isinstance(nominal, list):
            nominal_min, nominal_max = nominal
        else:
            nominal_min = nominal_max = int(nominal)
        params = tuple(
            ParameterDefinition(p["name"], p["type"], bool(p.get("required", False)))
            for p in entry.get("parameters", [])
        )
        for p in params:
            if p.type not in PARAM_TYPES:
                raise TemplateError(f"unknown parameter type {p.type!r}", code="CATALOG_INVALID")
        designs.append(
            TemplateDesign(
                id=entry["id"],
                intent=entry.get("intent", ""),
                requirements=ShapeRequirements(
                    measure_count=int(req.get("measures", 1)),
                    nominal_min=int(nominal_min),
                    nominal_max=int(nominal_max),
                    temporal_count=int(req.get("temporal-dimensions", 0)),
                    category_cap=int(req.get("category-cap", DEFAULT_CATEGORY_CAP)),
                ),
                parameter_definitions=params,
                visual_design=entry.get("visual-design", ""),
                text_template=entry.get("text-template", ""),
            )
        )
    return TemplateCatalog(designs)


def catalog_to_data(catalog: TemplateCatalog) -> dict:
    templates = []
    for d in catalog:
        req = d.requirements
        nominal = req.nominal_min if req.nominal_min == req.nominal_max else [req.nominal_min, req.nominal_max]
        templates.append(
            {
                "id": d.id,
                "intent": d.intent,
                "requirements": {
                    "measures": req.measure_count,
                    "nominal-dimensions": nominal,
                    "temporal-dimensions": req.temporal_count,
                    "category-cap": req.category_cap,
                },
                "parameters": [
                    {"name": p.name, "type": p.type, "required": p.required}
                    for p in d.parameter_definitions
                ],
                "visual-design": d.visual_design,
                "text-template": d.text_template,
            }
        )
    return {"templates": templates}


@dataclass(frozen=True)
class TemplateMatch:
    template_id: str
    missing_params: tuple[str, ...] = ()


def applicable_templates(
    subject: ComponentSpec | DashboardSelection,
    category_counts: dict[str, int] | None = None,
    catalog: TemplateCatalog | None = None,
) -> list[TemplateMatch]:
    """Templates whose shape requirements the subject meets, in catalog order
    (breakdown family before time series).

    `category_counts` maps dimension name -> observed category count; without
    it the category cap cannot be checked and is assumed satisfied, so the
    offer list can only shrink once data is known. Required parameters not
    yet supplied are flagged, never disqualifying.
    """
    catalog = catalog or default_catalog()
    provided: dict = {}
    if isinstance(subject, ComponentSpec) and subject.template is not None:
        provided = subject.template.config.parameters
    matches = []
    for design in catalog:
        if design.shape_gap(subject.measures, subject.dimensions):
            continue
        if category_counts is not None and _over_cap(design, subject.dimensions, category_counts):
            continue
        known = provided if isinstance(subject, ComponentSpec) and subject.template and subject.template.design_id == design.id else {}
        missing = tuple(name for name in design.required_params() if name not in known)
        matches.append(TemplateMatch(design.id, missing))
    return matches


def _over_cap(design: TemplateDesign, dims: tuple[Dimension, ...], counts: dict[str, int]) -> bool:
    cap = design.requirements.category_cap
    for d in dims:
        if d.kind == "nominal" and counts.get(d.name, 0) > cap:
            return True
    return False


def transfer_config(c: ComponentSpec, params: dict) -> TemplateConfig:
    """The mediation transfer: component attributes and original-design
    scales copied into a config; parameters attached as given."""
    return TemplateConfig(
        measures=c.measures,
        dimensions=c.dimensions,
        time_frame=c.time_frame,
        data_filters=c.data_filters,
        scales=c.original_design.scales,
        parameters=dict(params),
    )


def mediate_config(
    c: ComponentSpec,
    design: TemplateDesign,
    params: dict,
    categories: list[str] | None = None,
) -> TemplateConfig:
    """Validate and bind: raises TemplateError if the design is inapplicable
    or the parameters are missing/ill-typed/not covering the categories."""
    gap = design.shape_gap(c.measures, c.dimensions)
    if gap:
        raise TemplateError(f"{design.id} not applicable: {gap}", code="TEMPLATE_INAPPLICABLE")
    problems = design.check_parameters(params, categories)
    if problems:
        code = "PARAM_INVALID"
        if any("missing categories" in p for p in problems):
            code = "PARAM_CATEGORY_GAP"
        elif any("missing required" in p for p in problems):
            code = "PARAM_MISSING"
        elif any("unknown category" in p for p in problems):
            code = "PARAM_UNKNOWN_CATEGORY"
        raise TemplateError("; ".join(problems), code=code)
    return transfer_config(c, params)


# ---------------------------------------------------------------------------
# Render nodes


@dataclass(frozen=True)
class RenderNode:
    kind: str  # svg-chart | caption-text | badge | group
    content: str = ""
    width: int | None = None
    height: int | None = None
    children: tuple["RenderNode", ...] = ()
    meta: dict = field(default_factory=dict)

    def __hash__(self):
        return hash((self.kind, self.content, self.width, self.height, self.children))

    def find(self, kind: str) -> list["RenderNode"]:
        found = [self] if self.kind == kind else []
        for child in self.children:
            found.extend(child.find(kind))
        return found


def group(*children: RenderNode, meta: dict | None = None) -> RenderNode:
    return RenderNode(kind="group", children=tuple(children), meta=meta or {})


def badge(text: str, badge_kind: str) -> RenderNode:
    return RenderNode(kind="badge", content=text, meta={"badge": badge_kind})


def caption(text: str) -> RenderNode:
    return RenderNode(kind="caption-text", content=text)


NO_DATA_BADGE = "no data in time frame"

BAR_ROW_HEIGHT = 64  # fixed row height keeps breakdown golden files stable
BREAKDOWN_WIDTH = 480
TS_WIDTH, TS_HEIGHT = 480, 240


def _color_map(scales: tuple[Scale, ...], dim_name: str | None, categories: list) -> dict:
    """Category -> color, honoring a transferred ordinal scale when present."""
    for s in scales:
        if dim_name is not None and s.field == dim_name and s.range:
            mapping = {}
            domain = list(s.domain) if s.domain else categories
            for i, cat in enumerate(domain):
                mapping[cat] = s.range[i % len(s.range)]
            for cat in categories:
                if cat not in mapping:
                    mapping[cat] = DEFAULT_PALETTE[len(mapping) % len(DEFAULT_PALETTE)]
            return mapping
    return {cat: DEFAULT_PALETTE[i % len(DEFAULT_PALETTE)] for i, cat in enumerate(categories)}


def _split_dims(cfg: TemplateConfig) -> tuple[Dimension | None, Dimension | None]:
    temporal = next((d for d in cfg.dimensions if d.kind == "temporal"), None)
    nominal = next((d for d in cfg.dimensions if d.kind == "nominal"), None)
    return temporal, nominal


def render_template(
    design: TemplateDesign,
    cfg: TemplateConfig,
    result: ResultTable,
    appearance: str,
) -> RenderNode:
    """Materialize a bound template as SVG, caption text, or both.

    Identical inputs produce byte-identical SVG. An empty result yields a
    "no data" badge rather than an error. A per-category goal missing a
    newly observed category renders that category without its goal overlay
    and records a warning in the node metadata (auto-updates must not fail
    because the data grew a category).
    """
    if not result.rows:
        return group(badge(NO_DATA_BADGE, "no-data"))
    children = []
    warnings: list[str] = []
    if appearance in ("visual", "both"):
        if design.visual_design == "time-series":
            svg_node = _render_time_series_svg(cfg, result, warnings)
        else:
            svg_node = _render_breakdown_svg(design, cfg, result, warnings)
        children.append(svg_node)
    if appearance in ("text", "both"):
        if design.text_template == "trend-sentence":
            text = _trend_sentences(cfg, result)
        else:
            text = _breakdown_sentences(design, cfg, result, warnings)
        children.append(caption(text))
    meta = {"template": design.id}
    if warnings:
        meta["warnings"] = tuple(dict.fromkeys(warnings))
    return group(*children, meta=meta)


def _goal_map(cfg: TemplateConfig) -> dict:
    goal = cfg.parameters.get("goal")
    return goal if isinstance(goal, dict) else {}


def _breakdown_rows(cfg: TemplateConfig, result: ResultTable) -> list[tuple[str, float | int | None]]:
    measure = cfg.measures[0].name
    return [(key[0] if key else "", vals[result.value_columns.index(measure)]) for key, vals in result.rows]


def _breakdown_sentences(design: TemplateDesign, cfg: TemplateConfig, result: ResultTable, warnings: list[str]) -> str:
    rows = _breakdown_rows(cfg, result)
    goals = _goal_map(cfg)
    with_goal = design.id == "breakdown-with-goal"
    sentences = []
    for cat, value in rows:
        label = format_value(cat)
        if with_goal:
            if cat in goals:
                goal = goals[cat]
                ratio = None if not goal else (value / goal if value is not None else None)
                met = value is not None and value >= goal
                suffix = ", met" if met else ""
                sentences.append(f"{label}: {format_number(value)} ({format_percent(ratio)} of goal {format_number(goal)}{suffix}).")
            else:
                warnings.append(f"no goal parameter for category {label!r}")
                sentences.append(f"{label}: {format_number(value)}.")
        else:
            sentences.append(f"{label}: {format_number(value)}.")
    if with_goal and _is_number(cfg.parameters.get("total-goal")):
        total_goal = cfg.parameters["total-goal"]
        total = sum(v for _, v in rows if v is not None)
        ratio = None if not total_goal else total / total_goal
        met = total >= total_goal
        suffix = ", met" if met else ""
        sentences.append(f"Total: {format_number(total)} ({format_percent(ratio)} of goal {format_number(total_goal)}{suffix}).")
    return " ".join(sentences)


def _render_breakdown_svg(design: TemplateDesign, cfg: TemplateConfig, result: ResultTable, warnings: list[str]) -> RenderNode:
    rows = _breakdown_rows(cfg, result)
    goals = _goal_map(cfg) if design.id == "breakdown-with-goal" else {}
    total_goal = cfg.parameters.get("total-goal") if design.id == "breakdown-with-goal" else None
    show_total = _is_number(total_goal)

    display: list[tuple[str, float | int | None, float | int | None, bool]] = []
    for cat, value in rows:
        goal = goals.get(cat)
        if design.id == "breakdown-with-goal" and goal is None:
            warnings.append(f"no goal parameter for category {format_value(cat)!r}")
        met = goal is not None and value is not None and value >= goal
        display.append((format_value(cat), value, goal, met))
    if show_total:
        total = sum(v for _, v in rows if v is not None)
        display.append(("Total", total, total_goal, total >= total_goal))

    width = BREAKDOWN_WIDTH
    height = BAR_ROW_HEIGHT * len(display)
    label_gutter, value_gutter = 150, 74
    plot_w = width - label_gutter - value_gutter
    peak = max(
        [abs(v) for _, v, _, _ in display if v is not None]
        + [abs(g) for _, _, g, _ in display if g is not None]
        + [1]
    )
    scale_max = nice_ceiling(peak)

    def bar_width(v) -> float:
        return max(0.0, min(1.0, (v or 0) / scale_max)) * plot_w

    b = SvgBuilder(width, height)
    nominal_name = cfg.dimensions[0].name if cfg.dimensions else None
    colors = _color_map(cfg.scales, nominal_name, [cat for cat, *_ in display])
    for i, (cat, value, goal, met) in enumerate(display):
        y0 = i * BAR_ROW_HEIGHT
        cy = y0 + BAR_ROW_HEIGHT / 2
        with b.group(data_category=cat):
            b.text(8, cy + 4, cat, font_size=12)
            if goal is not None:
                b.rect(label_gutter, cy - 14, bar_width(goal), 28, fill=GOAL_GRAY, data_role="goal")
            bw = bar_width(value)
            attrs = {"fill": colors.get(cat, DEFAULT_PALETTE[0]), "data_role": "value", "data_met": "true" if met else None}
            if met:
                attrs["stroke"] = "#2f2f2f"
            b.rect(label_gutter, cy - 9, bw, 18, **attrs)
            label_x = label_gutter + max(bw, bar_width(goal) if goal is not None else 0) + 6
            value_text = format_number(value)
            if goal is not None:
                ratio = None if not goal else (value / goal if value is not None else None)
                value_text += f" ({format_percent(ratio)})"
            b.text(label_x, cy + 4, value_text, font_size=12)
    return RenderNode(kind="svg-chart", content=b.render(), width=width, height=height)


def _series_points(result: ResultTable, measure: str, t_idx: int, n_idx: int | None) -> dict:
    """series label -> [(date, value)] sorted by date."""
    col = result.value_columns.index(measure)
    series: dict = {}
    for key, vals in result.rows:
        label = key[n_idx] if n_idx is not None else ""
        series.setdefault(label, []).append((key[t_idx], vals[col]))
    for pts in series.values():
        pts.sort(key=lambda p: p[0])
    return dict(sorted(series.items(), key=lambda kv: str(kv[0])))


def _render_time_series_svg(cfg: TemplateConfig, result: ResultTable, warnings: list[str]) -> RenderNode:
    temporal, nominal = _split_dims(cfg)
    if temporal is None:
        raise TemplateError("time-series template requires a temporal dimension", code="TEMPLATE_INAPPLICABLE")
    measure = cfg.measures[0].name
    t_idx = result.key_columns.index(temporal.name)
    n_idx = result.key_columns.index(nominal.name) if nominal else None
    series = _series_points(result, measure, t_idx, n_idx)

    upper = cfg.parameters.get("upper-threshold")
    lower = cfg.parameters.get("lower-threshold")

    all_points = [p for pts in series.values() for p in pts if p[1] is not None]
    values = [v for _, v in all_points] + [t for t in (upper, lower) if t is not None]
    v_max = nice_ceiling(max([abs(v) for v in values] + [1]))
    dates = [d for d, _ in all_points]
    d_min, d_max = min(dates), max(dates)
    span = max((d_max - d_min).days, 1)

    width, height = TS_WIDTH, TS_HEIGHT
    ml, mr, mt, mb = 48, 16, 16, 32
    plot_w, plot_h = width - ml - mr, height - mt - mb

    def x(d: date) -> float:
        return ml + ((d - d_min).days / span) * plot_w

    def y(v: float) -> float:
        return mt + plot_h - (v / v_max) * plot_h

    b = SvgBuilder(width, height)
    b.line(ml, mt + plot_h, ml + plot_w, mt + plot_h, stroke="#777", data_role="axis-x")
    b.line(ml, mt, ml, mt + plot_h, stroke="#777", data_role="axis-y")
    b.text(ml - 6, mt + plot_h + 4, "0", font_size=10, text_anchor="end")
    b.text(ml - 6, mt + 4, format_number(v_max), font_size=10, text_anchor="end")
    b.text(ml, mt + plot_h + 16, d_min.isoformat(), font_size=10)
    b.text(ml + plot_w, mt + plot_h + 16, d_max.isoformat(), font_size=10, text_anchor="end")

    colors = _color_map(cfg.scales, nominal.name if nominal else None, list(series))
    for label, pts in series.items():
        clean = [(d, v) for d, v in pts if v is not None]
        if not clean:
            continue
        color = colors.get(label, DEFAULT_PALETTE[0])
        with b.group(data_series=str(label)):
            if len(clean) == 1:
                b.circle(x(clean[0][0]), y(clean[0][1]), 3, fill=color)
            else:
                b.polyline([(x(d), y(v)) for d, v in clean], fill="none", stroke=color, stroke_width=2)
            for d, v in clean:
                breach = (upper is not None and v > upper) or (lower is not None and v < lower)
                if breach:
                    b.circle(x(d), y(v), 4, fill="none", stroke="#e45756", stroke_width=2, data_role="breach")
    for threshold, role in ((upper, "upper-threshold"), (lower, "lower-threshold")):
        if threshold is None:
            continue
        ty = y(threshold)
        b.line(ml, ty, ml + plot_w, ty, stroke="#555", stroke_dasharray="6,4", data_role=role)
        b.text(ml + plot_w, ty - 4, format_number(threshold), font_size=10, text_anchor="end")
    return RenderNode(kind="svg-chart", content=b.render(), width=width, height=height)


def _trend_sentences(cfg: TemplateConfig, result: ResultTable) -> str:
    temporal, nominal = _split_dims(cfg)
    measure = cfg.measures[0].name
    t_idx = result.key_columns.index(temporal.name)
    n_idx = result.key_columns.index(nominal.name) if nominal else None
    series = _series_points(result, measure, t_idx, n_idx)
    upper = cfg.parameters.get("upper-threshold")
    lower = cfg.parameters.get("lower-threshold")
    tf = cfg.time_frame
    start = tf.start.isoformat() if tf else ""
    end = tf.end.isoformat() if tf else ""

    sentences = []
    for label, pts in series.items():
        clean = [(d, v) for d, v in pts if v is not None]
        if not clean:
            continue
        first, last = clean[0][1], clean[-1][1]
        if last > first:
            verb = "rose"
        elif last < first:
            verb = "fell"
        else:
            verb = "held steady"
        subject = f"{measure} for {format_value(label)}" if nominal else measure
        if verb == "held steady":
            sentences.append(f"Between {start} and {end}, {subject} held steady at {format_number(first)}.")
        else:
            sentences.append(f"Between {start} and {end}, {subject} {verb} from {format_number(first)} to {format_number(last)}.")
        breaches_up = sum(1 for _, v in clean if upper is not None and v > upper)
        breaches_down = sum(1 for _, v in clean if lower is not None and v < lower)
        if breaches_up:
            sentences.append(f"{breaches_up} of {len(clean)} points exceeded the upper threshold {format_number(upper)}.")
        if breaches_down:
            sentences.append(f"{breaches_down} of {len(clean)} points fell below the lower threshold {format_number(lower)}.")
    return " ".join(sentences)


# ---------------------------------------------------------------------------
# Original-design rendering (minimal responsive transformations only)

SMALL_WIDTH = 360  # below this, tick labels drop and the font steps down


def render_original(c: ComponentSpec, result: ResultTable, width: int = 480, height: int = 280) -> RenderNode:
    """Render the component's original design at the given constraints.

    Adaptation never exceeds aspect ratio, font size, and tick-label removal;
    data, mark geometry, and transferred scales are unchanged.
    """
    mark = c.original_design.mark
    if not result.rows:
        return badge(NO_DATA_BADGE, "no-data")
    if mark == "text-metric":
        return _render_text_metric(c, result, width, height)
    if mark in ("bar",):
        return _render_original_bars(c, result, width, height)
    if mark in ("line", "area", "point"):
        return _render_original_series(c, result, width, height)
    raise TemplateError(f"unsupported mark kind {mark!r}", code="MARK_INVALID")


def _design_fields(c: ComponentSpec) -> tuple[str | None, str | None, str | None]:
    enc = c.original_design.encodings
    measure_names = {m.name for m in c.measures}
    x_field, y_field, color_field = enc.get("x"), enc.get("y"), enc.get("color")
    if x_field in measure_names or y_field in measure_names:
        return x_field, y_field, color_field
    measure = c.measures[0].name if c.measures else None
    return x_field, y_field or measure, color_field


def _font(width: int) -> int:
    return 10 if width < SMALL_WIDTH else 12


def _render_text_metric(c: ComponentSpec, result: ResultTable, width: int, height: int) -> RenderNode:
    measure = c.measures[0]
    value = result.rows[0][1][result.value_columns.index(measure.name)]
    small = width < SMALL_WIDTH
    b = SvgBuilder(width, height)
    big = 28 if small else 36
    text = format_number(value)
    if measure.unit:
        text = f"{text} {measure.unit}"
    b.text(width / 2, height / 2, text, font_size=big, text_anchor="middle", font_weight="bold", data_role="metric")
    b.text(width / 2, height / 2 + big, measure.name, font_size=_font(width), text_anchor="middle", fill="#555")
    return RenderNode(kind="svg-chart", content=b.render(), width=width, height=height)


def _render_original_bars(c: ComponentSpec, result: ResultTable, width: int, height: int) -> RenderNode:
    x_field, y_field, _ = _design_fields(c)
    measure_names = {m.name for m in c.measures}
    horizontal = x_field in measure_names
    measure = x_field if horizontal else (y_field if y_field in measure_names else c.measures[0].name)
    col = result.value_columns.index(measure)
    cats = [key[0] if key else "" for key, _ in result.rows]
    vals = [vals_[col] for _, vals_ in result.rows]
    v_max = nice_ceiling(max([abs(v) for v in vals if v is not None] + [1]))
    small = width < SMALL_WIDTH
    font = _font(width)
    dim_name = result.key_columns[0] if result.key_columns else None
    colors = _color_map(c.original_design.scales, dim_name, cats)

    ml, mr, mt, mb = (40 if not small else 28), 12, 12, (30 if not small else 16)
    plot_w, plot_h = width - ml - mr, height - mt - mb
    b = SvgBuilder(width, height)
    b.line(ml, mt + plot_h, ml + plot_w, mt + plot_h, stroke="#777", data_role="axis-x")
    n = len(cats)
    slot = plot_w / max(n, 1)
    bar_w = slot * 0.7
    for i, (cat, v) in enumerate(zip(cats, vals)):
        if v is None:
            continue
        h = (v / v_max) * plot_h
        x0 = ml + i * slot + (slot - bar_w) / 2
        b.rect(x0, mt + plot_h - h, bar_w, h, fill=colors.get(cat, DEFAULT_PALETTE[0]), data_category=format_value(cat), data_role="bar")
        if not small:
            b.text(x0 + bar_w / 2, mt + plot_h + 14, format_value(cat), font_size=font, text_anchor="middle", data_role="tick-label")
    if not small:
        b.text(ml - 4, mt + 4, format_number(v_max), font_size=font, text_anchor="end", data_role="tick-label")
        b.text(ml - 4, mt + plot_h + 4, "0", font_size=font, text_anchor="end", data_role="tick-label")
    return RenderNode(kind="svg-chart", content=b.render(), width=width, height=height)


def _render_original_series(c: ComponentSpec, result: ResultTable, width: int, height: int) -> RenderNode:
    mark = c.original_design.mark
    _, y_field, color_field = _design_fields(c)
    measure_names = {m.name for m in c.measures}
    measure = y_field if y_field in measure_names else c.measures[0].name
    col = result.value_columns.index(measure)

    axis_idx = 0
    series_idx = None
    if color_field is not None and color_field in result.key_columns:
        series_idx = result.key_columns.index(color_field)
        axis_idx = 0 if series_idx != 0 else (1 if len(result.key_columns) > 1 else 0)
    series: dict = {}
    for key, vals in result.rows:
        label = key[series_idx] if series_idx is not None and series_idx != axis_idx else ""
        series.setdefault(label, []).append((key[axis_idx] if key else 0, vals[col]))
    for pts in series.values():
        pts.sort(key=lambda p: (str(type(p[0])), p[0]) if not isinstance(p[0], date) else ("", p[0]))

    all_vals = [v for pts in series.values() for _, v in pts if v is not None]
    v_max = nice_ceiling(max([abs(v) for v in all_vals] + [1]))
    axis_values = sorted({p[0] for pts in series.values() for p in pts})
    positions = {v: i for i, v in enumerate(axis_values)}
    span = max(len(axis_values) - 1, 1)

    small = width < SMALL_WIDTH
    font = _font(width)
    ml, mr, mt, mb = (40 if not small else 28), 12, 12, (30 if not small else 16)
    plot_w, plot_h = width - ml - mr, height - mt - mb

    def x(v) -> float:
        return ml + (positions[v] / span) * plot_w if span else ml + plot_w / 2

    def y(v: float) -> float:
        return mt + plot_h - (v / v_max) * plot_h

    colors = _color_map(c.original_design.scales, color_field, sorted(series, key=str))
    b = SvgBuilder(width, height)
    b.line(ml, mt + plot_h, ml + plot_w, mt + plot_h, stroke="#777", data_role="axis-x")
    for label, pts in sorted(series.items(), key=lambda kv: str(kv[0])):
        clean = [(a, v) for a, v in pts if v is not None]
        if not clean:
            continue
        color = colors.get(label, DEFAULT_PALETTE[0])
        with b.group(data_series=format_value(label)):
            coords = [(x(a), y(v)) for a, v in clean]
            if mark == "point" or len(coords) == 1:
                for cx, cy in coords:
                    b.circle(cx, cy, 3, fill=color, data_role="point")
            elif mark == "area":
                base = mt + plot_h
                poly = [(coords[0][0], base)] + coords + [(coords[-1][0], base)]
                b.polygon(poly, fill=color, fill_opacity=0.4, stroke=color, data_role="area")
            else:
                b.polyline(coords, fill="none", stroke=color, stroke_width=2, data_role="line")
    if not small and axis_values:
        b.text(ml, mt + plot_h + 14, format_value(axis_values[0]), font_size=font, data_role="tick-label")
        b.text(ml + plot_w, mt + plot_h + 14, format_value(axis_values[-1]), font_size=font, text_anchor="end", data_role="tick-label")
        b.text(ml - 4, mt + 4, format_number(v_max), font_size=font, text_anchor="end", data_role="tick-label")
    return RenderNode(kind="svg-chart", content=b.render(), width=width, height=height)


# ---------------------------------------------------------------------------
# Custom text expressions

TOKEN_RE = re.compile(r"\{([^{}]+)\}")
_TOKEN_NAMES = ("measure", "dimension", "value", "total", "goal", "pct_of_goal", "time-frame")
_TOKEN_CALL_RE = re.compile(r"^([a-z_-]+)\((.*)\)$")


def _parse_token(raw: str) -> tuple[str, str | None] | None:
    token = raw.strip()
    m = _TOKEN_CALL_RE.match(token)
    if m:
        name, arg = m.group(1), m.group(2).strip()
        return (name, arg) if name in _TOKEN_NAMES else None
    return (token, None) if token in _TOKEN_NAMES else None


def check_text_expression(text: str) -> list[str]:
    """Unknown-token messages for a parameterized text expression."""
    problems = []
    for raw in TOKEN_RE.findall(text):
        if _parse_token(raw) is None:
            problems.append(f"unknown token {{{raw}}}")
    return problems


def render_text_expression(expr: str, cfg: TemplateConfig | None, result: ResultTable) -> RenderNode:
    """Substitute `{token}` occurrences; plain text passes through verbatim.

    Tokens: {measure}, {dimension}, {value(<group>)}, {total},
    {goal(<group>)}, {pct_of_goal(<group>)}, {time-frame}.
    """

    def substitute(match: re.Match) -> str:
        parsed = _parse_token(match.group(1))
        if parsed is None:
            raise TemplateError(f"unknown token {{{match.group(1)}}}", code="UNKNOWN_TOKEN")
        name, arg = parsed
        measure = result.value_columns[0] if result.value_columns else None
        if name == "measure":
            return measure or ""
        if name == "dimension":
            return result.key_columns[0] if result.key_columns else ""
        if name == "total":
            return format_number(result.total(measure) if measure else None)
        if name == "time-frame":
            return cfg.time_frame.display() if cfg and cfg.time_frame else ""
        if arg is None or arg == "":
            raise TemplateError(f"token {name} requires a group argument", code="UNKNOWN_TOKEN")
        if name == "value":
            for key, vals in result.rows:
                if key and format_value(key[0]) == arg:
                    return format_number(vals[0])
            raise TemplateError(f"no group {arg!r} in result", code="UNKNOWN_TOKEN")
        goals = _goal_map(cfg) if cfg else {}
        if name == "goal":
            if arg not in goals:
                raise TemplateError(f"no goal for group {arg!r}", code="UNKNOWN_TOKEN")
            return format_number(goals[arg])
        if name == "pct_of_goal":
            if arg not in goals:
                raise TemplateError(f"no goal for group {arg!r}", code="UNKNOWN_TOKEN")
            value = None
            for key, vals in result.rows:
                if key and format_value(key[0]) == arg:
                    value = vals[0]
                    break
            goal = goals[arg]
            return format_percent(value / goal if goal and value is not None else None)
        raise TemplateError(f"unknown token {{{match.group(1)}}}", code="UNKNOWN_TOKEN")

    return caption(TOKEN_RE.sub(substitute, expr))
