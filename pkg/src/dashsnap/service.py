"""HTTP service exposing the snapshot engine.

Every behavior is a thin wrapper over library calls; mutating routes
validate first and answer 422 with machine-coded violations. All times flow
from the injected clock: `serve` defaults to wall time, tests and the
demonstration scenario drive a virtual clock through the clock routes.
"""

from __future__ import annotations

import os
from datetime import datetime

from fastapi import FastAPI, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import platform
from .clock import Clock, VirtualClock, WallClock, today
from .data import distinct_categories
from .errors import ConflictError, SnapError, StoreError, UnknownIdError
from .lifecycle import (
    ComponentOptions,
    ManualEdits,
    create_component,
    infer_freshness,
    materialize,
    materialize_component,
    scheduler_tick,
    update_snapshot,
)
from .model import Annotation, SnapshotSpec, TimeFrame, validate_component, validate_snapshot
from .platform import FilterAction, MessageView
from .schemas import (
    ChannelOut,
    ClockAdvanceRequest,
    ClockOut,
    ComponentOut,
    ComposeSnapshotRequest,
    CreateChannelRequest,
    CreateComponentRequest,
    DashboardSummary,
    DisseminationRow,
    DraftRequest,
    FreshnessOut,
    LintOut,
    LintRequest,
    MessageOut,
    MessageViewOut,
    PublishRequest,
    ReactionRequest,
    RefreshRequest,
    RenderComponentRequest,
    RenderOut,
    SnapshotOut,
    SnapshotSummary,
    TemplateMatchOut,
    TemplateOut,
    TickOut,
    UpdateRequest,
    ViewerFilterOut,
    ViewerFilterRequest,
    ViolationOut,
)
from .specio import (
    SpecParseError,
    component_from_data,
    component_to_data,
    dashboard_to_data,
    jsonify,
    lint as lint_text,
    selection_to_data,
    snapshot_from_data,
    snapshot_to_data,
)
from .store import RenderRef, Store, save_store
from .dates import parse_duration
from .lifecycle import FreshnessBadge
from .store import render_to_data
from .templates import applicable_templates, catalog_to_data, default_catalog
from .model import ValidationReport


def _violations_out(report: ValidationReport) -> list[dict]:
    return [ViolationOut(code=v.code, message=v.message, path=v.path, span=v.span).model_dump() for v in report.violations]


def _validation_response(report: ValidationReport, message: str = "validation failed") -> JSONResponse:
    return JSONResponse(
        status_code=422,
        content={"status": 422, "code": "VALIDATION", "message": message, "violations": _violations_out(report)},
    )


def _message_out(m) -> MessageOut:
    body = m.body
    return MessageOut(
        id=m.id,
        channel=m.channel_id,
        author=m.author,
        timestamp=m.timestamp,
        reply_to=m.reply_to,
        text=body if isinstance(body, str) else None,
        snapshot=body.snapshot_id if isinstance(body, RenderRef) else None,
        version=body.version if isinstance(body, RenderRef) else None,
        reactions=dict(m.reactions),
    )


def _view_out(view: MessageView, store: Store) -> MessageViewOut:
    return MessageViewOut(
        message=_message_out(store.message(view.message_id)),
        render=render_to_data(view.render) if view.render is not None else None,
        superseded=view.superseded,
        superseded_by=view.superseded_by,
        active_filters=view.active_filters,
    )


def create_app(
    store: Store,
    clock: Clock | None = None,
    clock_mode: str = "virtual",
    store_path: str | None = None,
) -> FastAPI:
    if clock is None:
        clock = WallClock() if clock_mode == "wall" else VirtualClock(datetime(2022, 1, 1, 0, 0))
    app = FastAPI(title="dashsnap", version="0.1.0", description="Dashboard snapshot service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.store = store
    app.state.clock = clock
    app.state.clock_mode = clock_mode
    app.state.store_path = store_path

    def persist() -> None:
        if app.state.store_path:
            save_store(store, app.state.store_path)

    # -- error mapping ------------------------------------------------------

    @app.exception_handler(SnapError)
    async def snap_error_handler(request: Request, exc: SnapError):
        status = 422
        if isinstance(exc, UnknownIdError):
            status = 404
        elif isinstance(exc, ConflictError):
            status = 409
        elif isinstance(exc, StoreError):
            status = 500
        return JSONResponse(
            status_code=status,
            content={"status": status, "code": exc.code, "message": str(exc), "span": None},
        )

    @app.exception_handler(SpecParseError)
    async def parse_error_handler(request: Request, exc: SpecParseError):
        span = [exc.line, exc.column] if exc.line is not None else None
        return JSONResponse(
            status_code=422,
            content={"status": 422, "code": exc.code, "message": exc.reason, "span": span},
        )

    # -- clock and scheduler -------------------------------------------------

    @app.get("/clock", response_model=ClockOut)
    def get_clock():
        return ClockOut(now=clock.now(), mode=app.state.clock_mode)

    @app.post("/clock/advance", response_model=TickOut)
    def advance_clock(req: ClockAdvanceRequest):
        if app.state.clock_mode != "virtual":
            raise ConflictError("clock advance is only available in virtual clock mode", code="CLOCK_MODE")
        if req.to is not None:
            clock.set(req.to)
        elif req.by is not None:
            clock.advance(parse_duration(req.by))
        else:
            raise SnapError("advance requires 'by' or 'to'", code="BAD_REQUEST")
        result = scheduler_tick(store, clock)
        persist()
        return TickOut(
            now=clock.now(),
            published=[{"snapshot": sid, "version": v} for sid, v, _ in result.published],
            failures=[{"snapshot": sid, "error": err} for sid, err in result.failures],
        )

    @app.post("/tick", response_model=TickOut)
    def tick():
        result = scheduler_tick(store, clock)
        persist()
        return TickOut(
            now=clock.now(),
            published=[{"snapshot": sid, "version": v} for sid, v, _ in result.published],
            failures=[{"snapshot": sid, "error": err} for sid, err in result.failures],
        )

    # -- dashboards ----------------------------------------------------------

    @app.get("/dashboards", response_model=list[DashboardSummary])
    def list_dashboards():
        return [
            DashboardSummary(id=d.id, title=d.title, panels=[p.panel_id for p in d.panels])
            for d in store.dashboards.values()
        ]

    @app.get("/dashboards/{dashboard_id}")
    def get_dashboard(dashboard_id: str):
        return jsonify(dashboard_to_data(store.dashboard(dashboard_id)))

    @app.get("/dashboards/{dashboard_id}/panels/{panel_id}")
    def get_panel(dashboard_id: str, panel_id: str):
        sel = store.dashboard(dashboard_id).panel(panel_id)
        if sel is None:
            raise UnknownIdError(f"unknown panel {panel_id!r}", code="UNKNOWN_PANEL")
        return jsonify(selection_to_data(sel))

    @app.get("/dashboards/{dashboard_id}/panels/{panel_id}/applicable-templates", response_model=list[TemplateMatchOut])
    def panel_templates(dashboard_id: str, panel_id: str):
        sel = store.dashboard(dashboard_id).panel(panel_id)
        if sel is None:
            raise UnknownIdError(f"unknown panel {panel_id!r}", code="UNKNOWN_PANEL")
        counts = distinct_categories(store.registry, sel)
        return [
            TemplateMatchOut(template_id=m.template_id, missing_params=list(m.missing_params))
            for m in applicable_templates(sel, category_counts=counts)
        ]

    @app.post("/applicable-templates", response_model=list[TemplateMatchOut])
    def draft_templates(req: DraftRequest):
        component = component_from_data(req.component)
        counts = distinct_categories(store.registry, component)
        return [
            TemplateMatchOut(template_id=m.template_id, missing_params=list(m.missing_params))
            for m in applicable_templates(component, category_counts=counts)
        ]

    @app.get("/templates", response_model=list[TemplateOut])
    def list_templates():
        return [TemplateOut(**t) for t in catalog_to_data(default_catalog())["templates"]]

    # -- component drafting --------------------------------------------------

    @app.post("/components", response_model=ComponentOut)
    def build_component(req: CreateComponentRequest):
        sel = store.dashboard(req.dashboard).panel(req.panel)
        if sel is None:
            raise UnknownIdError(f"unknown panel {req.panel!r}", code="UNKNOWN_PANEL")
        imposed = None
        if req.imposed_time_frame is not None:
            from datetime import date as _date

            imposed = TimeFrame(
                field=req.imposed_time_frame.field,
                start=_date.fromisoformat(req.imposed_time_frame.start),
                duration=parse_duration(req.imposed_time_frame.duration),
            )
        annotations = tuple(
            Annotation(
                kind=a.get("kind", "note"),
                category=a.get("category"),
                measure=a.get("measure"),
                value=a.get("value"),
                text=a.get("text"),
            )
            for a in req.annotations
        )
        from .specio import _Decoder

        dec = _Decoder(None)
        interactive = tuple(
            dec.interactive_filter(f, f"interactive-filters[{i}]") for i, f in enumerate(req.interactive_filters)
        )
        categories = None
        table = store.registry.table(sel.data_source)
        nominal = next((d for d in sel.dimensions if d.kind == "nominal"), None)
        if table is not None and nominal is not None:
            categories = [str(v) for v in table.distinct(nominal.source_column)]
        component = create_component(
            sel,
            ComponentOptions(
                id=req.id,
                appearance=req.appearance,
                imposed_time_frame=imposed,
                template_id=req.template.design_id if req.template else None,
                template_params=dict(req.template.parameters) if req.template else {},
                caption=req.caption,
                custom_text=req.custom_text,
                annotations=annotations,
                interactive_filters=interactive,
            ),
            categories=categories,
        )
        report = validate_component(component, store.registry.resolve(component.data_source))
        return ComponentOut(
            component=jsonify(component_to_data(component)),
            violations=[ViolationOut(code=v.code, message=v.message, path=v.path) for v in report.violations],
        )

    @app.post("/components/render", response_model=RenderOut)
    def render_draft(req: RenderComponentRequest):
        component = component_from_data(req.component)
        report = validate_component(component, store.registry.resolve(component.data_source))
        if not report.ok:
            return _validation_response(report, "component invalid")
        cr = materialize_component(component, store.registry)
        from .store import render_node_to_data

        return RenderOut(
            render={
                "component": cr.component_id,
                "body": render_node_to_data(cr.body),
                "transparency": {"filters": list(cr.transparency.filters), "time-frame": cr.transparency.time_frame},
                "error": cr.error,
                "interactive-filters": [dict(f) for f in cr.interactive_filters],
            },
            stale=False,
        )

    # -- snapshots -----------------------------------------------------------

    @app.get("/snapshots", response_model=list[SnapshotSummary])
    def list_snapshots():
        out = []
        for record in store.snapshot_records():
            latest = record.latest()
            out.append(
                SnapshotSummary(
                    id=record.id,
                    title=latest.spec.title,
                    author=latest.spec.author,
                    latest_version=latest.version,
                    freshness=latest.spec.freshness.isoformat(),
                    update_mode=latest.spec.update_policy.mode,
                )
            )
        return out

    @app.post("/snapshots", response_model=SnapshotOut, status_code=201)
    def compose(req: ComposeSnapshotRequest):
        data = dict(req.snapshot)
        data.setdefault("id", store.next_id("snap"))
        data.setdefault("created-at", clock.now().isoformat())
        spec = snapshot_from_data(data)
        report = validate_snapshot(spec, store.registry)
        if not report.ok:
            return _validation_response(report, "snapshot invalid")
        record = store.put_snapshot(spec, completeness_granularity=req.completeness_granularity)
        render = materialize(
            spec, store.registry, clock, version=1, completeness_granularity=req.completeness_granularity
        )
        store.set_render(spec.id, 1, render)
        persist()
        return SnapshotOut(snapshot=jsonify(snapshot_to_data(spec)), version=record.latest().version, superseded=False)

    @app.get("/snapshots/{snapshot_id}", response_model=SnapshotOut)
    def get_snapshot(snapshot_id: str, version: int | None = Query(default=None)):
        record = store.snapshot(snapshot_id)
        rec = record.get(version) if version is not None else record.latest()
        return SnapshotOut(snapshot=jsonify(snapshot_to_data(rec.spec)), version=rec.version, superseded=rec.superseded)

    @app.get("/snapshots/{snapshot_id}/render", response_model=RenderOut)
    def get_render(snapshot_id: str, version: int | None = Query(default=None)):
        record = store.snapshot(snapshot_id)
        rec = record.get(version) if version is not None else record.latest()
        render = rec.render
        if render is None:
            render = materialize(rec.spec, store.registry, clock, version=rec.version)
            store.set_render(snapshot_id, rec.version, render)
        stale = today(clock) > rec.spec.freshness
        data = render_to_data(render)
        data["freshness"]["stale"] = stale  # staleness is a view-time fact
        return RenderOut(render=data, stale=stale)

    @app.get("/snapshots/{snapshot_id}/freshness", response_model=FreshnessOut)
    def get_freshness(snapshot_id: str):
        spec = store.snapshot(snapshot_id).latest().spec
        return FreshnessOut(
            snapshot=snapshot_id,
            explicit=spec.freshness.isoformat(),
            inferred=infer_freshness(spec).isoformat(),
        )

    @app.post("/snapshots/{snapshot_id}/publish", response_model=MessageOut, status_code=201)
    def publish(snapshot_id: str, req: PublishRequest):
        record = store.snapshot(snapshot_id)
        latest = record.latest()
        if latest.render is None:
            render = materialize(latest.spec, store.registry, clock, version=latest.version)
            store.set_render(snapshot_id, latest.version, render)
        message = platform.post_snapshot(
            store,
            req.channel,
            latest.render,
            req.author or latest.spec.author,
            clock,
            thread=req.thread,
        )
        persist()
        return _message_out(message)

    @app.post("/snapshots/{snapshot_id}/update", response_model=RenderOut)
    def update(snapshot_id: str, req: UpdateRequest):
        record = store.snapshot(snapshot_id)
        spec = record.latest().spec
        if req.mode == "auto":
            new_spec = update_snapshot(spec, "auto", clock)
        else:
            edits_data = req.edits or {}
            from .specio import _Decoder

            dec = _Decoder(None)
            frames = {
                cid: dec.time_frame(tf, f"edits.time-frames.{cid}")
                for cid, tf in edits_data.get("time-frames", {}).items()
            }
            annotations = {
                cid: tuple(dec.annotation(a, f"edits.annotations.{cid}[{i}]") for i, a in enumerate(items))
                for cid, items in edits_data.get("annotations", {}).items()
            }
            from datetime import date as _date

            edits = ManualEdits(
                time_frames=frames,
                annotations=annotations,
                captions=edits_data.get("captions", {}),
                custom_texts=edits_data.get("custom-texts", {}),
                freshness=_date.fromisoformat(edits_data["freshness"]) if "freshness" in edits_data else None,
                text_message=edits_data.get("text-message"),
            )
            new_spec = update_snapshot(spec, edits, clock)
        version = store.add_version(snapshot_id, new_spec, last_published=clock.now())
        render = materialize(
            new_spec, store.registry, clock, version=version,
            completeness_granularity=record.completeness_granularity,
        )
        store.set_render(snapshot_id, version, render)
        platform.post_update_replies(store, snapshot_id, version, clock)
        persist()
        return RenderOut(render=render_to_data(render), stale=today(clock) > new_spec.freshness)

    # -- channels and messages -----------------------------------------------

    @app.get("/channels", response_model=list[ChannelOut])
    def list_channels():
        return [ChannelOut(id=c.id, name=c.name, members=list(c.members)) for c in store.channels.values()]

    @app.post("/channels", response_model=ChannelOut, status_code=201)
    def create_channel(req: CreateChannelRequest):
        channel = platform.create_channel(store, req.name, tuple(req.members), channel_id=req.id)
        persist()
        return ChannelOut(id=channel.id, name=channel.name, members=list(channel.members))

    @app.get("/channels/{channel_id}/messages", response_model=list[MessageViewOut])
    def channel_messages(channel_id: str, viewer: str = Query(default="anonymous")):
        store.channel(channel_id)
        return [
            _view_out(platform.view_message(store, m.id, viewer, clock), store)
            for m in store.messages
            if m.channel_id == channel_id
        ]

    @app.get("/messages/{message_id}/view", response_model=MessageViewOut)
    def view_message(message_id: str, viewer: str = Query(default="anonymous")):
        return _view_out(platform.view_message(store, message_id, viewer, clock), store)

    @app.post("/messages/{message_id}/viewer-filter", response_model=ViewerFilterOut)
    def viewer_filter(message_id: str, req: ViewerFilterRequest):
        action = FilterAction(
            kind=req.action.kind,
            column=req.action.column,
            value=req.action.value,
            low=req.action.low,
            high=req.action.high,
            name=req.action.name,
            target=req.action.target,
        )
        state = platform.apply_interactive_filter(store, message_id, req.component, req.viewer, action)
        persist()
        return ViewerFilterOut(viewer=req.viewer, component=req.component, state=state)

    @app.post("/messages/{message_id}/refresh", response_model=MessageViewOut)
    def refresh_message(message_id: str, req: RefreshRequest):
        """Viewer-triggered re-materialization at the current clock, posted
        as a thread reply attributed to the viewer (no spec change)."""
        message = store.message(message_id)
        if not isinstance(message.body, RenderRef):
            raise UnknownIdError("message carries no snapshot", code="NOT_A_SNAPSHOT_MESSAGE")
        record = store.snapshot(message.body.snapshot_id)
        rec = record.get(message.body.version)
        render = materialize(
            rec.spec, store.registry, clock, version=rec.version,
            completeness_granularity=record.completeness_granularity,
        )
        store.set_render(rec.spec.id, rec.version, render)
        reply = platform.post_snapshot(store, message.channel_id, render, req.viewer, clock, thread=message.id)
        persist()
        return _view_out(platform.view_message(store, reply.id, req.viewer, clock), store)

    @app.post("/messages/{message_id}/reactions")
    def react(message_id: str, req: ReactionRequest):
        reactions = platform.add_reaction(store, message_id, req.emoji)
        persist()
        return {"message": message_id, "reactions": reactions}

    # -- reports and linting ---------------------------------------------------

    @app.get("/dissemination", response_model=list[DisseminationRow])
    def dissemination():
        return [DisseminationRow(**row) for row in platform.dissemination_report(store)]

    @app.post("/lint", response_model=LintOut)
    def lint_endpoint(req: LintRequest):
        report = lint_text(req.text, store.registry)
        return LintOut(
            ok=report.ok,
            violations=[ViolationOut(code=v.code, message=v.message, path=v.path, span=v.span) for v in report.violations],
        )

    @app.get("/health")
    def health():
        return {"ok": True}

    return app


def app_from_env() -> FastAPI:
    """Entry point for `uvicorn dashsnap.service:app_from_env --factory`."""
    from .store import load_store

    store_path = os.environ.get("STORE_PATH")
    store = load_store(store_path) if store_path and os.path.exists(store_path) else Store()
    mode = os.environ.get("CLOCK_MODE", "wall")
    return create_app(store, clock_mode=mode, store_path=store_path)
