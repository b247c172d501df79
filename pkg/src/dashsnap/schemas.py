"""Pydantic request/response envelopes for the HTTP API.

Spec payloads (components, snapshots, renders) travel as plain JSON objects
mirroring the YAML surface form; the engine is their validator and returns
422 with machine-coded violations, so the envelope models stay thin.
"""

from __future__ import annotations

from datetime import datetime
from typing import Any, Optional

from pydantic import BaseModel, Field


class ApiError(BaseModel):
    status: int
    code: str
    message: str
    span: Optional[tuple[int, int]] = None


class ViolationOut(BaseModel):
    code: str
    message: str
    path: str = ""
    span: Optional[tuple[int, int]] = None


class ValidationErrorOut(BaseModel):
    status: int = 422
    code: str = "VALIDATION"
    message: str
    violations: list[ViolationOut]


class ClockOut(BaseModel):
    now: datetime
    mode: str


class ClockAdvanceRequest(BaseModel):
    by: Optional[str] = Field(default=None, description='duration string, e.g. "1 month"')
    to: Optional[datetime] = None


class TickPublishOut(BaseModel):
    snapshot: str
    version: int


class TickOut(BaseModel):
    now: datetime
    published: list[TickPublishOut]
    failures: list[dict[str, str]]


class DashboardSummary(BaseModel):
    id: str
    title: str
    panels: list[str]


class TemplateMatchOut(BaseModel):
    template_id: str
    missing_params: list[str]


class TemplateParamOut(BaseModel):
    name: str
    type: str
    required: bool


class TemplateOut(BaseModel):
    id: str
    intent: str
    requirements: dict[str, Any]
    parameters: list[TemplateParamOut]


class ImposedTimeFrame(BaseModel):
    field: str
    start: str
    duration: str


class TemplateChoice(BaseModel):
    design_id: str = Field(alias="design-id")
    parameters: dict[str, Any] = Field(default_factory=dict)

    model_config = {"populate_by_name": True}


class CreateComponentRequest(BaseModel):
    dashboard: str
    panel: str
    id: Optional[str] = None
    appearance: str = "visual"
    imposed_time_frame: Optional[ImposedTimeFrame] = Field(default=None, alias="imposed-time-frame")
    template: Optional[TemplateChoice] = None
    caption: Optional[str] = None
    custom_text: Optional[str] = Field(default=None, alias="custom-text")
    annotations: list[dict[str, Any]] = Field(default_factory=list)
    interactive_filters: list[dict[str, Any]] = Field(default_factory=list, alias="interactive-filters")

    model_config = {"populate_by_name": True}


class ComponentOut(BaseModel):
    component: dict[str, Any]
    violations: list[ViolationOut] = Field(default_factory=list)


class DraftRequest(BaseModel):
    component: dict[str, Any]


class RenderComponentRequest(BaseModel):
    component: dict[str, Any]
    width: int = 480
    height: int = 280


class ComposeSnapshotRequest(BaseModel):
    snapshot: dict[str, Any]
    completeness_granularity: Optional[str] = Field(default=None, alias="completeness-granularity")

    model_config = {"populate_by_name": True}


class SnapshotSummary(BaseModel):
    id: str
    title: str
    author: str
    latest_version: int
    freshness: str
    update_mode: str


class SnapshotOut(BaseModel):
    snapshot: dict[str, Any]
    version: int
    superseded: bool


class RenderOut(BaseModel):
    render: dict[str, Any]
    stale: bool


class FreshnessOut(BaseModel):
    snapshot: str
    explicit: str
    inferred: str


class PublishRequest(BaseModel):
    channel: str
    thread: Optional[str] = None
    author: Optional[str] = None


class MessageOut(BaseModel):
    id: str
    channel: str
    author: str
    timestamp: datetime
    reply_to: Optional[str] = None
    text: Optional[str] = None
    snapshot: Optional[str] = None
    version: Optional[int] = None
    reactions: dict[str, int] = Field(default_factory=dict)


class UpdateRequest(BaseModel):
    mode: str = "auto"  # auto | manual
    edits: Optional[dict[str, Any]] = None


class CreateChannelRequest(BaseModel):
    name: str
    id: Optional[str] = None
    members: list[str] = Field(default_factory=list)


class ChannelOut(BaseModel):
    id: str
    name: str
    members: list[str]


class FilterActionModel(BaseModel):
    kind: str  # dropdown | slider | macro | clear
    column: Optional[str] = None
    value: Optional[Any] = None
    low: Optional[float] = None
    high: Optional[float] = None
    name: Optional[str] = None
    target: Optional[str] = None


class ViewerFilterRequest(BaseModel):
    viewer: str
    component: str
    action: FilterActionModel


class ViewerFilterOut(BaseModel):
    viewer: str
    component: str
    state: dict[str, Any]


class MessageViewOut(BaseModel):
    message: MessageOut
    render: Optional[dict[str, Any]] = None
    superseded: bool = False
    superseded_by: Optional[int] = None
    active_filters: dict[str, Any] = Field(default_factory=dict)


class RefreshRequest(BaseModel):
    viewer: str


class ReactionRequest(BaseModel):
    emoji: str


class LintRequest(BaseModel):
    text: str


class LintOut(BaseModel):
    ok: bool
    violations: list[ViolationOut]


class DisseminationRow(BaseModel):
    snapshot: str
    version: int
    channel: str
    message: str
    thread_root: str = Field(alias="thread-root")
    superseded: bool

    model_config = {"populate_by_name": True}
