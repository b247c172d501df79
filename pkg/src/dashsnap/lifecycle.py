"""Snapshot lifecycle: build components from selections, compose and curate
snapshots, infer freshness, materialize renders, and run updates.

Updates never mutate a published snapshot: each one produces a new spec
version (the store retains history and marks earlier versions superseded),
so threads can reference what was actually shown at the time.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import date, datetime

from .clock import Clock, FrozenClock, today
from .data import CompletenessReport, TableRegistry, apply_filters, apply_time_frame, detect_completeness, evaluate
from .dates import Duration, add_duration, duration_between
from .errors import ConflictError, LifecycleError, SnapError, UnknownIdError
from .fmt import format_value
from .model import (
    Annotation,
    ComponentSpec,
    Completeness,
    Curation,
    DashboardSelection,
    DataFilter,
    SnapshotSpec,
    TemplateBinding,
    TimeFrame,
    UpdatePolicy,
    validate_snapshot,
)
from .templates import (
    RenderNode,
    TemplateCatalog,
    badge,
    caption,
    default_catalog,
    group,
    mediate_config,
    render_original,
    render_template,
    render_text_expression,
)

# ---------------------------------------------------------------------------
# Render artifacts


@dataclass(frozen=True)
class TransparencyBlock:
    """The displayed filters and time frame of one component (always shown)."""

    filters: tuple[str, ...]
    time_frame: str


@dataclass(frozen=True)
class FreshnessBadge:
    fresh_until: date
    stale: bool


@dataclass(frozen=True)
class CompletenessBadge:
    complete: bool
    note: str | None = None
    source: str = "asserted"  # asserted | detected


@dataclass(frozen=True)
class ComponentRender:
    component_id: str
    body: RenderNode
    transparency: TransparencyBlock
    error: str | None = None
    interactive_filters: tuple[dict, ...] = ()  # declared controls, for viewers


@dataclass(frozen=True)
class SnapshotRender:
    snapshot_id: str
    version: int
    curation: Curation
    components: tuple[ComponentRender, ...]
    freshness_badge: FreshnessBadge
    completeness_badge: CompletenessBadge | None
    text_message: str | None
    produced_at: datetime

    def layout(self) -> RenderNode:
        """The curation node over per-component render groups."""
        meta: dict = {"curation": self.curation.method}
        if self.curation.method == "slideshow":
            meta["interval"] = self.curation.interval_seconds
        if self.curation.method == "mini-dashboard":
            meta["columns"] = self.curation.columns
        return group(*(c.body for c in self.components), meta=meta)


def filter_display(f: DataFilter) -> str:
    if f.kind == "equals":
        return f"{f.column} = {format_value(f.value)}"
    if f.kind == "one_of":
        return f"{f.column} in [{', '.join(format_value(v) for v in f.values)}]"
    if f.kind == "range":
        return f"{f.column} between {format_value(f.low)} and {format_value(f.high)}"
    return f"{f.column} between {f.start.isoformat()} and {f.end.isoformat()}"


def transparency_block(c: ComponentSpec) -> TransparencyBlock:
    return TransparencyBlock(
        filters=tuple(filter_display(f) for f in c.data_filters),
        time_frame=c.time_frame.display(),
    )


# ---------------------------------------------------------------------------
# Component creation (from a dashboard selection)


@dataclass(frozen=True)
class ComponentOptions:
    id: str | None = None
    appearance: str = "visual"
    imposed_time_frame: TimeFrame | None = None
    template_id: str | None = None
    template_params: dict = field(default_factory=dict)
    caption: str | None = None
    custom_text: str | None = None
    annotations: tuple[Annotation, ...] = ()
    interactive_filters: tuple = ()

    def __hash__(self):
        return hash((self.id, self.appearance, self.imposed_time_frame, self.template_id))


def _frame_from_selection(sel: DashboardSelection) -> TimeFrame | None:
    """Derive a time frame from the selection's temporal (date-range) filter."""
    for f in sel.data_filters:
        if f.kind == "date_range" and f.start is not None and f.end is not None and f.end > f.start:
            return TimeFrame(field=f.column, start=f.start, duration=duration_between(f.start, f.end))
    return None


def create_component(
    sel: DashboardSelection,
    opts: ComponentOptions,
    categories: list[str] | None = None,
    catalog: TemplateCatalog | None = None,
) -> ComponentSpec:
    """Import a selection into a component.

    Data source, filters, measures, dimensions, and original design carry
    over verbatim. The time frame comes from the selection's temporal filter
    when it has one, else from opts.imposed_time_frame; lacking both is an
    error (every component needs a frame to anchor freshness).
    """
    frame = _frame_from_selection(sel) or opts.imposed_time_frame
    if frame is None:
        raise LifecycleError(
            f"selection {sel.panel_id!r} has no temporal filter and no imposed time frame",
            code="NO_TIME_FRAME",
        )
    component = ComponentSpec(
        id=opts.id or f"c-{sel.panel_id}",
        data_source=sel.data_source,
        measures=sel.measures,
        time_frame=frame,
        original_design=sel.original_design,
        appearance=opts.appearance,
        data_filters=sel.data_filters,
        dimensions=sel.dimensions,
        caption=opts.caption,
        custom_text=opts.custom_text,
        annotations=tuple(opts.annotations),
        interactive_filters=tuple(opts.interactive_filters),
    )
    if opts.template_id is not None:
        catalog = catalog or default_catalog()
        design = catalog.require(opts.template_id)
        cfg = mediate_config(component, design, dict(opts.template_params), categories)
        component = replace(component, template=TemplateBinding(design.id, cfg))
    return component


# ---------------------------------------------------------------------------
# Composition and freshness


def infer_freshness_from_components(components: tuple[ComponentSpec, ...]) -> date:
    """Latest frame end, plus that frame's duration: the snapshot stays fresh
    until the next period's data could be fully collected.

    Ties on end: the longer duration (later end+duration) wins; remaining
    ties fall back to the lexicographically first component id.
    """
    if not components:
        raise LifecycleError("cannot infer freshness without components", code="NO_COMPONENTS")
    best = None
    best_key = None
    for c in components:
        tf = c.time_frame
        end = tf.end
        key = (end, add_duration(end, tf.duration))
        if best is None or key > best_key or (key == best_key and c.id < best.id):
            best, best_key = c, key
    return add_duration(best.time_frame.end, best.time_frame.duration)


def infer_freshness(s: SnapshotSpec) -> date:
    return infer_freshness_from_components(s.components)


@dataclass(frozen=True)
class SnapshotOverrides:
    freshness: date | None = None
    completeness: Completeness | None = None
    text_message: str | None = None


def compose_snapshot(
    components: tuple[ComponentSpec, ...] | list[ComponentSpec],
    curation: Curation,
    policy: UpdatePolicy,
    clock: Clock,
    *,
    snapshot_id: str,
    title: str,
    author: str,
    overrides: SnapshotOverrides = SnapshotOverrides(),
    registry: TableRegistry | None = None,
) -> SnapshotSpec:
    """Assemble a snapshot; explicit freshness wins over inference."""
    components = tuple(components)
    spec = SnapshotSpec(
        id=snapshot_id,
        title=title,
        components=components,
        curation=curation,
        freshness=overrides.freshness or (infer_freshness_from_components(components) if components else today(clock)),
        update_policy=policy,
        created_at=clock.now(),
        author=author,
        completeness=overrides.completeness,
        text_message=overrides.text_message,
    )
    report = validate_snapshot(spec, registry)
    if not report.ok:
        first = report.violations[0]
        raise LifecycleError(f"snapshot invalid: {first.render()}", code=first.code)
    return spec


# ---------------------------------------------------------------------------
# Materialization


def is_stale(s: SnapshotSpec, clock: Clock) -> bool:
    return today(clock) > s.freshness


def _annotation_display(a: Annotation) -> str:
    parts = [a.kind]
    target = []
    if a.category is not None:
        target.append(a.category)
    if a.measure is not None:
        target.append(a.measure)
    if a.value is not None:
        target.append(format_value(a.value))
    if target:
        parts.append("@ " + " ".join(target))
    if a.text:
        parts.append(f"— {a.text}")
    return " ".join(parts)


def render_component_body(
    c: ComponentSpec,
    result,
    catalog: TemplateCatalog | None = None,
    width: int = 480,
    height: int = 280,
) -> RenderNode:
    """The component's visual/text body (no transparency or badges)."""
    catalog = catalog or default_catalog()
    children: list[RenderNode] = []
    if c.template is not None:
        design = catalog.require(c.template.design_id)
        cfg = c.template.config
        rendered = render_template(design, cfg, result, c.appearance)
        kids = list(rendered.children)
        if c.custom_text is not None and c.appearance in ("text", "both") and result.rows:
            kids = [k for k in kids if k.kind != "caption-text"]
            kids.append(render_text_expression(c.custom_text, cfg, result))
        children.extend(kids)
        meta = dict(rendered.meta)
    else:
        children.append(render_original(c, result, width, height))
        if c.custom_text is not None and result.rows:
            children.append(render_text_expression(c.custom_text, None, result))
        meta = {}
    if c.caption is not None:
        children.append(RenderNode(kind="caption-text", content=c.caption, meta={"role": "caption"}))
    for a in c.annotations:
        children.append(RenderNode(kind="badge", content=_annotation_display(a), meta={"role": "annotation", "annotation-kind": a.kind}))
    if result.warnings:
        meta = {**meta, "data-warnings": tuple(result.warnings)}
    return group(*children, meta=meta)


def materialize_component(
    c: ComponentSpec,
    registry: TableRegistry,
    extra_filters: tuple[DataFilter, ...] = (),
    catalog: TemplateCatalog | None = None,
) -> ComponentRender:
    """Load -> filters -> time frame -> evaluate -> render; failures become
    an error badge so sibling components still materialize."""
    try:
        table = registry.table(c.data_source)
        if table is None:
            raise UnknownIdError(f"data source {c.data_source!r} is not loaded", code="UNKNOWN_DATA_SOURCE")
        filtered = apply_filters(table, c.data_filters + tuple(extra_filters))
        framed = apply_time_frame(filtered, c.time_frame)
        result = evaluate(framed, c.measures, c.dimensions)
        body = render_component_body(c, result, catalog)
        error = None
    except SnapError as e:
        body = group(badge(f"component failed: {e}", "error"))
        error = str(e)
    from .specio import interactive_filter_to_data, jsonify

    return ComponentRender(
        component_id=c.id,
        body=body,
        transparency=transparency_block(c),
        error=error,
        interactive_filters=tuple(jsonify(interactive_filter_to_data(f)) for f in c.interactive_filters),
    )


def _detected_completeness(s: SnapshotSpec, registry: TableRegistry, granularity: str) -> CompletenessBadge:
    reports: list[tuple[str, CompletenessReport]] = []
    for c in s.components:
        table = registry.table(c.data_source)
        if table is None:
            continue
        framed = apply_filters(table, c.data_filters)
        reports.append((c.id, detect_completeness(framed, c.time_frame, granularity)))
    complete = all(r.complete for _, r in reports) if reports else False
    notes = [f"{cid}: missing {len(r.missing)} of {r.expected_buckets} {granularity} bucket(s)" for cid, r in reports if not r.complete]
    return CompletenessBadge(complete=complete, note="; ".join(notes) or None, source="detected")


def materialize(
    s: SnapshotSpec,
    registry: TableRegistry,
    clock: Clock,
    version: int = 1,
    completeness_granularity: str | None = None,
    catalog: TemplateCatalog | None = None,
) -> SnapshotRender:
    """Render every component and assemble the curated snapshot.

    The staleness flag compares the clock's date against the spec's
    freshness; completeness comes from the author's assertion or, when a
    granularity is requested, from bucket detection over each component.
    """
    components = tuple(materialize_component(c, registry, catalog=catalog) for c in s.components)
    if s.completeness is not None:
        completeness = CompletenessBadge(complete=s.completeness.complete, note=s.completeness.note, source="asserted")
    elif completeness_granularity is not None:
        completeness = _detected_completeness(s, registry, completeness_granularity)
    else:
        completeness = None
    return SnapshotRender(
        snapshot_id=s.id,
        version=version,
        curation=s.curation,
        components=components,
        freshness_badge=FreshnessBadge(fresh_until=s.freshness, stale=is_stale(s, clock)),
        completeness_badge=completeness,
        text_message=s.text_message,
        produced_at=clock.now(),
    )


# ---------------------------------------------------------------------------
# Updates


@dataclass(frozen=True)
class ManualEdits:
    """Author-supplied changes for a manual update.

    Old annotations are always dropped (stale emphasis misleads); the author
    may add fresh ones here. Captions and custom text persist unless edited.
    """

    time_frames: dict = field(default_factory=dict)  # component id -> TimeFrame
    annotations: dict = field(default_factory=dict)  # component id -> tuple[Annotation, ...]
    captions: dict = field(default_factory=dict)  # component id -> str | None
    custom_texts: dict = field(default_factory=dict)  # component id -> str | None
    freshness: date | None = None
    text_message: str | None = None

    def __hash__(self):
        return hash((self.freshness, self.text_message))


def _shift_component(c: ComponentSpec, period: Duration) -> ComponentSpec:
    old = c.time_frame
    new_frame = replace(old, start=add_duration(old.start, period))
    filters = []
    for f in c.data_filters:
        if f.kind == "date_range" and f.start == old.start and f.end == old.end:
            filters.append(replace(f, start=new_frame.start, end=new_frame.end))
        else:
            filters.append(f)
    template = c.template
    if template is not None:
        template = replace(template, config=replace(template.config, time_frame=new_frame, data_filters=tuple(filters)))
    return replace(c, time_frame=new_frame, data_filters=tuple(filters), template=template)


def _retarget_component(c: ComponentSpec, new_frame: TimeFrame) -> ComponentSpec:
    old = c.time_frame
    filters = []
    for f in c.data_filters:
        if f.kind == "date_range" and f.start == old.start and f.end == old.end:
            filters.append(replace(f, start=new_frame.start, end=new_frame.end))
        else:
            filters.append(f)
    template = c.template
    if template is not None:
        template = replace(template, config=replace(template.config, time_frame=new_frame, data_filters=tuple(filters)))
    return replace(c, time_frame=new_frame, data_filters=tuple(filters), template=template)


def update_snapshot(s: SnapshotSpec, mode: str | ManualEdits, clock: Clock) -> SnapshotSpec:
    """Produce the next spec version.

    mode="auto": requires an auto-recur policy and a clock within its
    horizon; every frame start shifts forward one period, congruent
    date-range filters shift with it, and annotations, captions, and custom
    text are stripped (text templates re-render over the new data).

    mode=ManualEdits: frames move to the author-specified frames; old
    annotations are dropped and the author's edits are applied verbatim.
    """
    if mode == "auto":
        pol = s.update_policy
        if pol.mode != "auto-recur":
            raise LifecycleError("snapshot has no auto-recur policy", code="NOT_AUTO_RECUR")
        if today(clock) > pol.until:
            raise ConflictError(
                f"recurrence expired: {today(clock)} is past {pol.until}",
                code="RECURRENCE_EXPIRED",
            )
        components = tuple(
            replace(_shift_component(c, pol.period), annotations=(), caption=None, custom_text=None)
            for c in s.components
        )
        return replace(
            s,
            components=components,
            freshness=infer_freshness_from_components(components),
            created_at=clock.now(),
        )
    if not isinstance(mode, ManualEdits):
        raise LifecycleError(f"unknown update mode {mode!r}", code="UPDATE_MODE")
    edits = mode
    components = []
    for c in s.components:
        if c.id in edits.time_frames:
            c = _retarget_component(c, edits.time_frames[c.id])
        c = replace(c, annotations=tuple(edits.annotations.get(c.id, ())))
        if c.id in edits.captions:
            c = replace(c, caption=edits.captions[c.id])
        if c.id in edits.custom_texts:
            c = replace(c, custom_text=edits.custom_texts[c.id])
        components.append(c)
    components = tuple(components)
    return replace(
        s,
        components=components,
        freshness=edits.freshness or infer_freshness_from_components(components),
        created_at=clock.now(),
        text_message=edits.text_message if edits.text_message is not None else s.text_message,
    )


# ---------------------------------------------------------------------------
# Scheduler


@dataclass
class TickResult:
    published: list[tuple[str, int, SnapshotRender]] = field(default_factory=list)
    failures: list[tuple[str, str]] = field(default_factory=list)


def next_due(last_published: datetime, policy: UpdatePolicy) -> datetime:
    """The next publish instant: previous publish date + period, at the
    policy's publish time."""
    due_date = add_duration(last_published.date(), policy.period)
    return datetime.combine(due_date, policy.publish_time)


def scheduler_tick(store, clock: Clock) -> TickResult:
    """Publish every auto-recur snapshot whose due instant has passed.

    At most one update per snapshot per tick; a second tick at the same
    virtual instant publishes nothing. Failures are reported per snapshot
    and never abort the tick. Updates are timestamped at their scheduled
    due instant so late ticks do not drift the schedule.
    """
    result = TickResult()
    with store.lock:
        for record in store.snapshot_records():
            spec = record.latest().spec
            pol = spec.update_policy
            if pol.mode != "auto-recur":
                continue
            due = next_due(record.latest().last_published, pol)
            if due > clock.now() or due.date() > pol.until:
                continue
            try:
                new_spec = update_snapshot(spec, "auto", FrozenClock(due))
                version = store.add_version(record.id, new_spec, last_published=due)
                render = materialize(
                    new_spec,
                    store.registry,
                    clock,
                    version=version,
                    completeness_granularity=record.completeness_granularity,
                )
                store.set_render(record.id, version, render)
                from .platform import post_update_replies

                post_update_replies(store, record.id, version, clock)
                result.published.append((record.id, version, render))
            except SnapError as e:
                result.failures.append((record.id, str(e)))
    return result
