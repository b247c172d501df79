"""The single document store: data sources, dashboards, snapshot versions,
renders, channels, messages, and per-viewer filter state.

Persists as one versioned JSON file. Mutations go through a single writer
lock; reads of distinct snapshots and per-viewer state never contend.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field, replace
from datetime import date, datetime, time

from .data import Table, TableRegistry
from .errors import StoreError, UnknownIdError
from .lifecycle import (
    CompletenessBadge,
    ComponentRender,
    FreshnessBadge,
    SnapshotRender,
    TransparencyBlock,
)
from .model import Curation, SnapshotSpec
from .specio import (
    DashboardDescriptor,
    dashboard_from_data,
    dashboard_to_data,
    jsonify,
    parse_snapshot,
    serialize_snapshot,
)
from .templates import RenderNode

STORE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class RenderRef:
    snapshot_id: str
    version: int


@dataclass
class Message:
    id: str
    channel_id: str
    author: str
    timestamp: datetime
    body: str | RenderRef
    reply_to: str | None = None
    reactions: dict = field(default_factory=dict)  # emoji -> count


@dataclass
class Channel:
    id: str
    name: str
    members: tuple[str, ...] = ()


@dataclass
class VersionRecord:
    version: int
    spec: SnapshotSpec
    last_published: datetime
    render: SnapshotRender | None = None
    superseded: bool = False


@dataclass
class SnapshotRecord:
    id: str
    versions: list[VersionRecord] = field(default_factory=list)
    completeness_granularity: str | None = None  # re-run detection on update

    def latest(self) -> VersionRecord:
        return self.versions[-1]

    def get(self, version: int) -> VersionRecord:
        for v in self.versions:
            if v.version == version:
                return v
        raise UnknownIdError(f"snapshot {self.id!r} has no version {version}", code="UNKNOWN_VERSION")


class Store:
    def __init__(self):
        self.lock = threading.RLock()
        self.registry = TableRegistry()
        self.source_paths: dict[str, str] = {}
        self.dashboards: dict[str, DashboardDescriptor] = {}
        self._snapshots: dict[str, SnapshotRecord] = {}
        self.channels: dict[str, Channel] = {}
        self.messages: list[Message] = []
        self.viewer_states: dict[tuple[str, str, str], dict] = {}
        self.counters: dict[str, int] = {}

    # -- ids ----------------------------------------------------------------

    def next_id(self, prefix: str) -> str:
        with self.lock:
            n = self.counters.get(prefix, 0) + 1
            self.counters[prefix] = n
            return f"{prefix}-{n}"

    # -- snapshots ----------------------------------------------------------

    def snapshot_records(self) -> list[SnapshotRecord]:
        return sorted(self._snapshots.values(), key=lambda r: r.id)

    def snapshot(self, snapshot_id: str) -> SnapshotRecord:
        record = self._snapshots.get(snapshot_id)
        if record is None:
            raise UnknownIdError(f"unknown snapshot {snapshot_id!r}", code="UNKNOWN_SNAPSHOT")
        return record

    def has_snapshot(self, snapshot_id: str) -> bool:
        return snapshot_id in self._snapshots

    def put_snapshot(self, spec: SnapshotSpec, completeness_granularity: str | None = None) -> SnapshotRecord:
        with self.lock:
            if spec.id in self._snapshots:
                raise StoreError(f"snapshot {spec.id!r} already exists", code="DUPLICATE_SNAPSHOT")
            record = SnapshotRecord(
                id=spec.id,
                versions=[VersionRecord(version=1, spec=spec, last_published=spec.created_at)],
                completeness_granularity=completeness_granularity,
            )
            self._snapshots[spec.id] = record
            return record

    def add_version(self, snapshot_id: str, spec: SnapshotSpec, last_published: datetime) -> int:
        with self.lock:
            record = self.snapshot(snapshot_id)
            previous = record.latest()
            previous.superseded = True
            version = previous.version + 1
            record.versions.append(VersionRecord(version=version, spec=spec, last_published=last_published))
            return version

    def set_render(self, snapshot_id: str, version: int, render: SnapshotRender) -> None:
        with self.lock:
            self.snapshot(snapshot_id).get(version).render = render

    def render(self, snapshot_id: str, version: int) -> SnapshotRender:
        rec = self.snapshot(snapshot_id).get(version)
        if rec.render is None:
            raise UnknownIdError(f"snapshot {snapshot_id!r} v{version} has no stored render", code="UNKNOWN_RENDER")
        return rec.render

    # -- data sources / dashboards ------------------------------------------

    def register_table(self, source_id: str, table: Table, path: str | None = None) -> None:
        with self.lock:
            self.registry.register_table(source_id, table)
            if path is not None:
                self.source_paths[source_id] = path

    def add_dashboard(self, descriptor: DashboardDescriptor) -> None:
        with self.lock:
            self.dashboards[descriptor.id] = descriptor

    def dashboard(self, dashboard_id: str) -> DashboardDescriptor:
        d = self.dashboards.get(dashboard_id)
        if d is None:
            raise UnknownIdError(f"unknown dashboard {dashboard_id!r}", code="UNKNOWN_DASHBOARD")
        return d

    # -- platform -----------------------------------------------------------

    def channel(self, channel_id: str) -> Channel:
        ch = self.channels.get(channel_id)
        if ch is None:
            raise UnknownIdError(f"unknown channel {channel_id!r}", code="UNKNOWN_CHANNEL")
        return ch

    def message(self, message_id: str) -> Message:
        for m in self.messages:
            if m.id == message_id:
                return m
        raise UnknownIdError(f"unknown message {message_id!r}", code="UNKNOWN_MESSAGE")


# ---------------------------------------------------------------------------
# Render (de)serialization


def render_node_to_data(node: RenderNode) -> dict:
    out: dict = {"kind": node.kind}
    if node.content:
        out["content"] = node.content
    if node.width is not None:
        out["width"] = node.width
    if node.height is not None:
        out["height"] = node.height
    if node.meta:
        out["meta"] = jsonify({k: list(v) if isinstance(v, tuple) else v for k, v in node.meta.items()})
    if node.children:
        out["children"] = [render_node_to_data(c) for c in node.children]
    return out


def render_node_from_data(data: dict) -> RenderNode:
    meta = data.get("meta", {})
    return RenderNode(
        kind=data["kind"],
        content=data.get("content", ""),
        width=data.get("width"),
        height=data.get("height"),
        children=tuple(render_node_from_data(c) for c in data.get("children", [])),
        meta={k: tuple(v) if isinstance(v, list) else v for k, v in meta.items()},
    )


def render_to_data(r: SnapshotRender) -> dict:
    out: dict = {
        "snapshot": r.snapshot_id,
        "version": r.version,
        "curation": {"method": r.curation.method, "interval": r.curation.interval_seconds, "columns": r.curation.columns},
        "components": [
            {
                "component": c.component_id,
                "body": render_node_to_data(c.body),
                "transparency": {"filters": list(c.transparency.filters), "time-frame": c.transparency.time_frame},
                "error": c.error,
                "interactive-filters": [dict(f) for f in c.interactive_filters],
            }
            for c in r.components
        ],
        "freshness": {"fresh-until": r.freshness_badge.fresh_until.isoformat(), "stale": r.freshness_badge.stale},
        "text-message": r.text_message,
        "produced-at": r.produced_at.isoformat(),
    }
    if r.completeness_badge is not None:
        out["completeness"] = {
            "complete": r.completeness_badge.complete,
            "note": r.completeness_badge.note,
            "source": r.completeness_badge.source,
        }
    return out


def render_from_data(data: dict) -> SnapshotRender:
    completeness = None
    if "completeness" in data:
        c = data["completeness"]
        completeness = CompletenessBadge(complete=c["complete"], note=c.get("note"), source=c.get("source", "asserted"))
    cur = data["curation"]
    return SnapshotRender(
        snapshot_id=data["snapshot"],
        version=data["version"],
        curation=Curation(cur["method"], interval_seconds=cur.get("interval", 5), columns=cur.get("columns", 2)),
        components=tuple(
            ComponentRender(
                component_id=c["component"],
                body=render_node_from_data(c["body"]),
                transparency=TransparencyBlock(
                    filters=tuple(c["transparency"]["filters"]),
                    time_frame=c["transparency"]["time-frame"],
                ),
                error=c.get("error"),
                interactive_filters=tuple(c.get("interactive-filters", [])),
            )
            for c in data["components"]
        ),
        freshness_badge=FreshnessBadge(
            fresh_until=date.fromisoformat(data["freshness"]["fresh-until"]),
            stale=data["freshness"]["stale"],
        ),
        completeness_badge=completeness,
        text_message=data.get("text-message"),
        produced_at=datetime.fromisoformat(data["produced-at"]),
    )


# ---------------------------------------------------------------------------
# Store persistence


def _table_to_data(t: Table) -> dict:
    return {"columns": [[n, ct] for n, ct in t.columns], "rows": jsonify([list(r) for r in t.rows])}


def _table_from_data(data: dict) -> Table:
    columns = tuple((n, ct) for n, ct in data["columns"])
    rows = []
    for raw in data["rows"]:
        row = []
        for cell, (_, ctype) in zip(raw, columns):
            if cell is not None and ctype == "date":
                cell = date.fromisoformat(cell)
            row.append(cell)
        rows.append(tuple(row))
    return Table(columns=columns, rows=tuple(rows))


def store_to_data(store: Store) -> dict:
    with store.lock:
        return {
            "format-version": STORE_FORMAT_VERSION,
            "counters": dict(store.counters),
            "data-sources": [
                {"id": sid, "path": store.source_paths.get(sid), "table": _table_to_data(store.registry.table(sid))}
                for sid in store.registry.ids()
                if store.registry.table(sid) is not None
            ],
            "dashboards": [jsonify(dashboard_to_data(d)) for d in store.dashboards.values()],
            "snapshots": [
                {
                    "id": record.id,
                    "completeness-granularity": record.completeness_granularity,
                    "versions": [
                        {
                            "version": v.version,
                            "spec-yaml": serialize_snapshot(v.spec),
                            "last-published": v.last_published.isoformat(),
                            "superseded": v.superseded,
                            "render": render_to_data(v.render) if v.render is not None else None,
                        }
                        for v in record.versions
                    ],
                }
                for record in store.snapshot_records()
            ],
            "channels": [
                {"id": c.id, "name": c.name, "members": list(c.members)} for c in store.channels.values()
            ],
            "messages": [
                {
                    "id": m.id,
                    "channel": m.channel_id,
                    "author": m.author,
                    "timestamp": m.timestamp.isoformat(),
                    "reply-to": m.reply_to,
                    "reactions": dict(m.reactions),
                    "body": {"text": m.body} if isinstance(m.body, str) else {"snapshot": {"id": m.body.snapshot_id, "version": m.body.version}},
                }
                for m in store.messages
            ],
            "viewer-states": [
                {"viewer": viewer, "message": message_id, "component": component_id, "filters": filters}
                for (viewer, message_id, component_id), filters in sorted(store.viewer_states.items())
            ],
        }


def store_from_data(data: dict) -> Store:
    version = data.get("format-version")
    if version != STORE_FORMAT_VERSION:
        raise StoreError(
            f"store format version {version!r} is not supported (expected {STORE_FORMAT_VERSION})",
            code="STORE_VERSION",
        )
    store = Store()
    store.counters = dict(data.get("counters", {}))
    for s in data.get("data-sources", []):
        store.register_table(s["id"], _table_from_data(s["table"]), s.get("path"))
    for d in data.get("dashboards", []):
        store.add_dashboard(dashboard_from_data(d))
    for s in data.get("snapshots", []):
        record = SnapshotRecord(id=s["id"], completeness_granularity=s.get("completeness-granularity"))
        for v in s["versions"]:
            record.versions.append(
                VersionRecord(
                    version=v["version"],
                    spec=parse_snapshot(v["spec-yaml"]),
                    last_published=datetime.fromisoformat(v["last-published"]),
                    superseded=v["superseded"],
                    render=render_from_data(v["render"]) if v.get("render") else None,
                )
            )
        store._snapshots[record.id] = record
    for c in data.get("channels", []):
        store.channels[c["id"]] = Channel(id=c["id"], name=c["name"], members=tuple(c.get("members", ())))
    for m in data.get("messages", []):
        body = m["body"]
        store.messages.append(
            Message(
                id=m["id"],
                channel_id=m["channel"],
                author=m["author"],
                timestamp=datetime.fromisoformat(m["timestamp"]),
                body=body["text"] if "text" in body else RenderRef(body["snapshot"]["id"], body["snapshot"]["version"]),
                reply_to=m.get("reply-to"),
                reactions=dict(m.get("reactions", {})),
            )
        )
    for vs in data.get("viewer-states", []):
        store.viewer_states[(vs["viewer"], vs["message"], vs["component"])] = dict(vs["filters"])
    return store


def save_store(store: Store, path: str) -> None:
    payload = json.dumps(store_to_data(store), indent=2, sort_keys=False)
    with open(path, "w", encoding="utf-8") as f:
        f.write(payload + "\n")


def load_store(path: str) -> Store:
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise StoreError(f"corrupt store file {path}: {e}", code="STORE_CORRUPT")
    if not isinstance(data, dict):
        raise StoreError(f"corrupt store file {path}: not a JSON object", code="STORE_CORRUPT")
    return store_from_data(data)
