"""Scripted scenario runner.

Replays a months-long collaboration story from a YAML script against a
fresh store and a virtual clock: load a dashboard, build components, compose
and publish a snapshot, let consumers filter privately, advance time, and
watch the scheduler post updates. Everything is deterministic.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from datetime import datetime

import yaml

from . import platform
from .clock import VirtualClock
from .data import distinct_categories, load_table
from .dates import parse_duration
from .errors import SnapError, UnknownIdError
from .lifecycle import ComponentOptions, ManualEdits, create_component, materialize, scheduler_tick, update_snapshot
from .model import ComponentSpec, SnapshotSpec, validate_snapshot
from .specio import _Decoder, jsonify, parse_dashboard, snapshot_from_data
from .store import Store, render_to_data, save_store


@dataclass
class ScenarioRun:
    store: Store
    clock: VirtualClock
    log: list[str] = field(default_factory=list)
    drafts: dict[str, ComponentSpec] = field(default_factory=dict)
    published: list[tuple[str, int]] = field(default_factory=list)

    def note(self, line: str) -> None:
        self.log.append(f"[{self.clock.now().isoformat()}] {line}")


def _load_dashboard(run: ScenarioRun, path: str, base_dir: str) -> None:
    full = os.path.join(base_dir, path)
    with open(full, encoding="utf-8") as f:
        descriptor = parse_dashboard(f.read())
    run.store.add_dashboard(descriptor)
    for src in descriptor.data_sources:
        csv_path = os.path.join(os.path.dirname(full), src.csv)
        with open(csv_path, "rb") as f:
            table = load_table(f.read(), schema=src.schema)
        run.store.register_table(src.id, table, path=csv_path)
    run.note(f"loaded dashboard {descriptor.id!r} with {len(descriptor.panels)} panel(s)")


def _create_component(run: ScenarioRun, args: dict) -> None:
    dec = _Decoder(None)
    dashboard = run.store.dashboard(args["dashboard"])
    sel = dashboard.panel(args["panel"])
    if sel is None:
        raise UnknownIdError(f"unknown panel {args['panel']!r}", code="UNKNOWN_PANEL")
    imposed = dec.time_frame(args["imposed-time-frame"], "imposed-time-frame") if "imposed-time-frame" in args else None
    annotations = tuple(dec.annotation(a, f"annotations[{i}]") for i, a in enumerate(args.get("annotations", [])))
    interactive = tuple(
        dec.interactive_filter(f, f"interactive-filters[{i}]") for i, f in enumerate(args.get("interactive-filters", []))
    )
    template = args.get("template")
    categories = None
    nominal = next((d for d in sel.dimensions if d.kind == "nominal"), None)
    table = run.store.registry.table(sel.data_source)
    if nominal is not None and table is not None:
        categories = [str(v) for v in table.distinct(nominal.source_column)]
    component = create_component(
        sel,
        ComponentOptions(
            id=args.get("id"),
            appearance=args.get("appearance", "visual"),
            imposed_time_frame=imposed,
            template_id=template.get("design-id") if template else None,
            template_params=dict(template.get("parameters", {})) if template else {},
            caption=args.get("caption"),
            custom_text=args.get("custom-text"),
            annotations=annotations,
            interactive_filters=interactive,
        ),
        categories=categories,
    )
    run.drafts[component.id] = component
    run.note(f"created component {component.id!r} from panel {sel.panel_id!r}")


def _compose_snapshot(run: ScenarioRun, args: dict) -> None:
    from .specio import component_to_data

    data = dict(args)
    granularity = data.pop("completeness-granularity", None)
    components = []
    for entry in data.get("components", []):
        if isinstance(entry, str):
            if entry not in run.drafts:
                raise UnknownIdError(f"no component draft {entry!r}", code="UNKNOWN_COMPONENT")
            components.append(component_to_data(run.drafts[entry]))
        else:
            components.append(entry)
    data["components"] = components
    data.setdefault("id", run.store.next_id("snap"))
    data.setdefault("created-at", run.clock.now().isoformat())
    spec = snapshot_from_data(jsonify(data))
    report = validate_snapshot(spec, run.store.registry)
    if not report.ok:
        raise SnapError(
            "snapshot invalid: " + "; ".join(v.render() for v in report.violations),
            code="VALIDATION",
        )
    run.store.put_snapshot(spec, completeness_granularity=granularity)
    render = materialize(spec, run.store.registry, run.clock, version=1, completeness_granularity=granularity)
    run.store.set_render(spec.id, 1, render)
    run.note(f"composed snapshot {spec.id!r} ({len(spec.components)} component(s), freshness {spec.freshness})")


def _resolve_root_message(run: ScenarioRun, snapshot_id: str):
    from .store import RenderRef

    for m in run.store.messages:
        if m.reply_to is None and isinstance(m.body, RenderRef) and m.body.snapshot_id == snapshot_id:
            return m
    raise UnknownIdError(f"snapshot {snapshot_id!r} has no root message", code="UNKNOWN_MESSAGE")


def run_scenario(text: str, base_dir: str = ".", out_dir: str | None = None) -> ScenarioRun:
    script = yaml.safe_load(text)
    if not isinstance(script, dict) or "steps" not in script:
        raise SnapError("scenario script needs a top-level 'steps' list", code="SCENARIO_INVALID")
    start = script.get("start-clock", "2022-01-01T00:00:00")
    if isinstance(start, str):
        start = datetime.fromisoformat(start)
    run = ScenarioRun(store=Store(), clock=VirtualClock(start))
    title = script.get("title")
    if title:
        run.note(f"scenario: {title}")

    for i, step in enumerate(script["steps"]):
        if not isinstance(step, dict) or len(step) != 1:
            raise SnapError(f"step {i} must be a single-key mapping", code="SCENARIO_INVALID")
        name, args = next(iter(step.items()))
        args = args if args is not None else {}
        _run_step(run, name, args, base_dir, out_dir)
    return run


def _run_step(run: ScenarioRun, name: str, args, base_dir: str, out_dir: str | None) -> None:
    dec = _Decoder(None)
    if name == "set-clock":
        to = args if not isinstance(args, dict) else args["to"]
        if isinstance(to, str):
            to = datetime.fromisoformat(to)
        run.clock.set(to)
        run.note("clock set")
    elif name == "advance-clock":
        by = args if not isinstance(args, dict) else args["by"]
        run.clock.advance(parse_duration(str(by)))
        run.note(f"clock advanced by {by}")
        result = scheduler_tick(run.store, run.clock)
        _log_tick(run, result)
    elif name == "tick":
        result = scheduler_tick(run.store, run.clock)
        _log_tick(run, result)
    elif name == "load-dashboard":
        path = args if isinstance(args, str) else args["file"]
        _load_dashboard(run, path, base_dir)
    elif name == "create-channel":
        channel = platform.create_channel(
            run.store, args["name"], tuple(args.get("members", ())), channel_id=args.get("id")
        )
        run.note(f"created channel {channel.id!r}")
    elif name == "create-component":
        _create_component(run, args)
    elif name == "compose-snapshot":
        _compose_snapshot(run, args)
    elif name == "publish":
        record = run.store.snapshot(args["snapshot"])
        latest = record.latest()
        message = platform.post_snapshot(
            run.store, args["channel"], latest.render, args.get("author", latest.spec.author), run.clock
        )
        run.note(f"published {record.id!r} v{latest.version} to {args['channel']!r} as {message.id}")
    elif name == "post-text":
        thread = None
        if "in-thread-of" in args:
            thread = _resolve_root_message(run, args["in-thread-of"]).id
        message = platform.post_text(run.store, args["channel"], args["author"], args["text"], run.clock, thread=thread)
        run.note(f"{args['author']} posted {message.id}")
    elif name == "viewer-filter":
        root = _resolve_root_message(run, args["snapshot"])
        action_data = args["action"]
        action = platform.FilterAction(
            kind=action_data["kind"],
            column=action_data.get("column"),
            value=action_data.get("value"),
            low=action_data.get("low"),
            high=action_data.get("high"),
            name=action_data.get("name"),
            target=action_data.get("target"),
        )
        platform.apply_interactive_filter(run.store, root.id, args["component"], args["viewer"], action)
        run.note(f"viewer {args['viewer']!r} applied {action.kind} filter on {args['component']!r}")
    elif name == "manual-update":
        record = run.store.snapshot(args["snapshot"])
        spec = record.latest().spec
        annotations = {
            cid: tuple(dec.annotation(a, f"annotations[{i}]") for i, a in enumerate(items))
            for cid, items in args.get("annotations", {}).items()
        }
        frames = {cid: dec.time_frame(tf, "time-frame") for cid, tf in args.get("time-frames", {}).items()}
        edits = ManualEdits(
            time_frames=frames,
            annotations=annotations,
            captions=args.get("captions", {}),
            custom_texts=args.get("custom-texts", {}),
            text_message=args.get("text-message"),
        )
        new_spec = update_snapshot(spec, edits, run.clock)
        version = run.store.add_version(record.id, new_spec, last_published=run.clock.now())
        render = materialize(new_spec, run.store.registry, run.clock, version=version,
                             completeness_granularity=record.completeness_granularity)
        run.store.set_render(record.id, version, render)
        platform.post_update_replies(run.store, record.id, version, run.clock)
        run.note(f"manually updated {record.id!r} to v{version}")
    elif name == "save-store":
        path = args if isinstance(args, str) else args["file"]
        target = os.path.join(out_dir or base_dir, path)
        os.makedirs(os.path.dirname(target) or ".", exist_ok=True)
        save_store(run.store, target)
        run.note(f"store saved to {target}")
    elif name == "render-out":
        _render_out(run, args, out_dir or base_dir)
    else:
        raise SnapError(f"unknown scenario step {name!r}", code="SCENARIO_INVALID")


def _log_tick(run: ScenarioRun, result) -> None:
    for sid, version, _ in result.published:
        run.published.append((sid, version))
        run.note(f"scheduler published {sid!r} v{version} as a thread reply")
    for sid, error in result.failures:
        run.note(f"scheduler failed on {sid!r}: {error}")
    if not result.published and not result.failures:
        run.note("scheduler tick: nothing due")


def _render_out(run: ScenarioRun, args: dict, out_base: str) -> None:
    import json

    record = run.store.snapshot(args["snapshot"])
    rec = record.latest()
    render = rec.render
    target = os.path.join(out_base, args.get("dir", "renders"), f"{record.id}-v{rec.version}")
    os.makedirs(target, exist_ok=True)
    manifest = render_to_data(render)
    for component in render.components:
        for j, node in enumerate(component.body.find("svg-chart")):
            with open(os.path.join(target, f"{component.component_id}-{j}.svg"), "w", encoding="utf-8") as f:
                f.write(node.content)
        captions = [n.content for n in component.body.find("caption-text")]
        if captions:
            with open(os.path.join(target, f"{component.component_id}.txt"), "w", encoding="utf-8") as f:
                f.write("\n".join(captions) + "\n")
    with open(os.path.join(target, "manifest.json"), "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2)
    run.note(f"renders written to {target}")
