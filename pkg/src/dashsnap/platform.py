"""Simulated threaded collaboration platform.

Channels hold messages; a thread is a root message plus its replies.
Snapshot messages reference a stored render version; auto-recur updates
arrive as replies under the original message's thread, and earlier versions
are marked superseded rather than deleted (history is append-only).

A consumer's interactive-filter choices live in per-viewer state and are
applied at view time by re-evaluating the affected component only for that
viewer — the stored render and every other viewer's view never change.
"""

from __future__ import annotations

from dataclasses import dataclass, replace as dc_replace
from datetime import datetime

from .clock import Clock, today
from .errors import SnapError, UnknownIdError
from .lifecycle import FreshnessBadge, SnapshotRender, materialize_component
from .model import ComponentSpec, DataFilter, InteractiveFilter
from .store import Channel, Message, RenderRef, Store


def create_channel(store: Store, name: str, members: tuple[str, ...] = (), channel_id: str | None = None) -> Channel:
    with store.lock:
        cid = channel_id or store.next_id("ch")
        if cid in store.channels:
            raise SnapError(f"channel {cid!r} already exists", code="DUPLICATE_CHANNEL")
        channel = Channel(id=cid, name=name, members=members)
        store.channels[cid] = channel
        return channel


def post_text(store: Store, channel_id: str, author: str, text: str, clock: Clock, thread: str | None = None) -> Message:
    return _post(store, channel_id, author, text, clock, thread)


def post_snapshot(
    store: Store,
    channel_id: str,
    render: SnapshotRender,
    author: str,
    clock: Clock,
    thread: str | None = None,
) -> Message:
    """Post a stored snapshot render to a channel (optionally as a reply)."""
    stored = store.snapshot(render.snapshot_id).get(render.version)
    if stored.render is None:
        raise UnknownIdError(
            f"render for {render.snapshot_id} v{render.version} is not stored",
            code="UNKNOWN_RENDER",
        )
    return _post(store, channel_id, author, RenderRef(render.snapshot_id, render.version), clock, thread)


def _post(store: Store, channel_id: str, author: str, body, clock: Clock, thread: str | None) -> Message:
    with store.lock:
        store.channel(channel_id)
        if thread is not None:
            root = store.message(thread)
            if root.reply_to is not None:
                thread = root.reply_to  # replies always attach to the thread root
        message = Message(
            id=store.next_id("msg"),
            channel_id=channel_id,
            author=author,
            timestamp=clock.now(),
            body=body,
            reply_to=thread,
        )
        store.messages.append(message)
        return message


def post_update_replies(store: Store, snapshot_id: str, version: int, clock: Clock) -> list[Message]:
    """Post a new snapshot version as a reply under every thread whose root
    message references that snapshot."""
    record = store.snapshot(snapshot_id)
    spec = record.get(version).spec
    roots = [
        m for m in store.messages
        if m.reply_to is None and isinstance(m.body, RenderRef) and m.body.snapshot_id == snapshot_id
    ]
    replies = []
    for root in roots:
        replies.append(
            _post(store, root.channel_id, spec.author, RenderRef(snapshot_id, version), clock, thread=root.id)
        )
    return replies


@dataclass(frozen=True)
class Thread:
    root: Message
    replies: tuple[Message, ...]


def thread_of(store: Store, root_id: str) -> Thread:
    root = store.message(root_id)
    if root.reply_to is not None:
        root = store.message(root.reply_to)
    replies = tuple(m for m in store.messages if m.reply_to == root.id)
    return Thread(root=root, replies=replies)


# ---------------------------------------------------------------------------
# Per-viewer interactive filters


@dataclass(frozen=True)
class FilterAction:
    """One viewer interaction: pick a dropdown value, set a slider range,
    toggle a macro, or clear."""

    kind: str  # dropdown | slider | macro | clear
    column: str | None = None
    value: object = None  # dropdown choice
    low: float | None = None  # slider range
    high: float | None = None
    name: str | None = None  # macro name
    target: str | None = None  # clear: specific filter key, else everything


def _declared(component: ComponentSpec, key: str) -> InteractiveFilter | None:
    for f in component.interactive_filters:
        if f.key() == key:
            return f
    return None


def _component_in(store: Store, message: Message, component_id: str) -> ComponentSpec:
    if not isinstance(message.body, RenderRef):
        raise UnknownIdError(f"message {message.id!r} carries no snapshot", code="NOT_A_SNAPSHOT_MESSAGE")
    spec = store.snapshot(message.body.snapshot_id).get(message.body.version).spec
    for c in spec.components:
        if c.id == component_id:
            return c
    raise UnknownIdError(f"no component {component_id!r} in snapshot {spec.id!r}", code="UNKNOWN_COMPONENT")


def apply_interactive_filter(
    store: Store,
    message_id: str,
    component_id: str,
    viewer: str,
    action: FilterAction,
) -> dict:
    """Update the viewer's private filter state; returns the active state.

    The filter or macro must be declared on the component; dropdown values
    must come from the allowed set and slider ranges must fit the declared
    bounds.
    """
    message = store.message(message_id)
    component = _component_in(store, message, component_id)
    key = (viewer, message_id, component_id)
    state = dict(store.viewer_states.get(key, {}))

    if action.kind == "clear":
        if action.target is None:
            state = {}
        else:
            state.pop(action.target, None)
    elif action.kind == "dropdown":
        declared = _declared(component, f"dropdown:{action.column}")
        if declared is None:
            raise SnapError(f"no dropdown filter on column {action.column!r}", code="FILTER_UNDECLARED")
        if action.value not in declared.options:
            raise SnapError(
                f"value {action.value!r} is not among the allowed values {list(declared.options)}",
                code="FILTER_VALUE_INVALID",
            )
        state[declared.key()] = {"kind": "dropdown", "column": action.column, "value": action.value}
    elif action.kind == "slider":
        declared = _declared(component, f"slider:{action.column}")
        if declared is None:
            raise SnapError(f"no slider filter on column {action.column!r}", code="FILTER_UNDECLARED")
        low = declared.min if action.low is None else action.low
        high = declared.max if action.high is None else action.high
        if low > high or low < declared.min or high > declared.max:
            raise SnapError(
                f"range [{low}, {high}] is outside the slider bounds [{declared.min}, {declared.max}]",
                code="FILTER_VALUE_INVALID",
            )
        state[declared.key()] = {"kind": "slider", "column": action.column, "low": low, "high": high}
    elif action.kind == "macro":
        declared = _declared(component, f"macro:{action.name}")
        if declared is None:
            raise SnapError(f"no macro named {action.name!r}", code="FILTER_UNDECLARED")
        state[declared.key()] = {"kind": "macro", "name": action.name}
    else:
        raise SnapError(f"unknown filter action {action.kind!r}", code="FILTER_ACTION")

    with store.lock:
        if state:
            store.viewer_states[key] = state
        else:
            store.viewer_states.pop(key, None)
    return state


def _filters_from_state(component: ComponentSpec, state: dict) -> tuple[DataFilter, ...]:
    from datetime import date as _date

    filters: list[DataFilter] = []
    for key, entry in sorted(state.items()):
        if entry["kind"] == "dropdown":
            value = entry["value"]
            if isinstance(value, str):
                try:
                    value = _date.fromisoformat(value)
                except ValueError:
                    pass
            filters.append(DataFilter(entry["column"], "equals", value=value))
        elif entry["kind"] == "slider":
            filters.append(DataFilter(entry["column"], "range", low=entry["low"], high=entry["high"]))
        elif entry["kind"] == "macro":
            declared = _declared(component, key)
            if declared is not None:
                filters.extend(declared.filters)
    return tuple(filters)


@dataclass(frozen=True)
class MessageView:
    """What one viewer sees: the message plus its snapshot render (if any)
    with staleness recomputed at view time and the viewer's private filters
    applied."""

    message_id: str
    channel_id: str
    author: str
    timestamp: datetime
    text: str | None
    render: SnapshotRender | None
    superseded: bool
    superseded_by: int | None
    active_filters: dict  # component id -> filter state


def view_message(store: Store, message_id: str, viewer: str, clock: Clock) -> MessageView:
    """The viewer's private rendering of a message at the current clock."""
    message = store.message(message_id)
    if isinstance(message.body, str):
        return MessageView(
            message_id=message.id,
            channel_id=message.channel_id,
            author=message.author,
            timestamp=message.timestamp,
            text=message.body,
            render=None,
            superseded=False,
            superseded_by=None,
            active_filters={},
        )
    record = store.snapshot(message.body.snapshot_id)
    version = record.get(message.body.version)
    spec = version.spec
    base = version.render
    if base is None:
        raise UnknownIdError(f"render for {spec.id} v{version.version} is not stored", code="UNKNOWN_RENDER")

    active: dict = {}
    components = []
    for cr in base.components:
        state = store.viewer_states.get((viewer, message_id, cr.component_id), {})
        if state:
            component = next(c for c in spec.components if c.id == cr.component_id)
            extra = _filters_from_state(component, state)
            refreshed = materialize_component(component, store.registry, extra_filters=extra)
            refreshed = dc_replace(refreshed, transparency=cr.transparency)
            components.append(refreshed)
            active[cr.component_id] = state
        else:
            components.append(cr)

    render = dc_replace(
        base,
        components=tuple(components),
        freshness_badge=FreshnessBadge(fresh_until=spec.freshness, stale=today(clock) > spec.freshness),
    )
    return MessageView(
        message_id=message.id,
        channel_id=message.channel_id,
        author=message.author,
        timestamp=message.timestamp,
        text=None,
        render=render,
        superseded=version.superseded,
        superseded_by=record.latest().version if version.superseded else None,
        active_filters=active,
    )


def add_reaction(store: Store, message_id: str, emoji: str) -> dict:
    with store.lock:
        message = store.message(message_id)
        message.reactions[emoji] = message.reactions.get(emoji, 0) + 1
        return dict(message.reactions)


def dissemination_report(store: Store) -> list[dict]:
    """Where each snapshot landed: channel, thread root, version, status."""
    rows = []
    for record in store.snapshot_records():
        for m in store.messages:
            if isinstance(m.body, RenderRef) and m.body.snapshot_id == record.id:
                rows.append(
                    {
                        "snapshot": record.id,
                        "version": m.body.version,
                        "channel": m.channel_id,
                        "message": m.id,
                        "thread-root": m.reply_to or m.id,
                        "superseded": record.get(m.body.version).superseded,
                    }
                )
    return rows
