import os
import re
import xml.dom.minidom
from datetime import date

import pytest
import yaml

from dashsnap.data import ResultTable, evaluate, load_table
from dashsnap.dates import Duration
from dashsnap.errors import TemplateError
from dashsnap.fmt import format_number
from dashsnap.model import (
    ComponentSpec,
    DashboardSelection,
    Dimension,
    Measure,
    OriginalDesign,
    Scale,
    TimeFrame,
)
from dashsnap.templates import (
    applicable_templates,
    catalog_to_data,
    default_catalog,
    load_catalog,
    mediate_config,
    render_original,
    render_template,
    render_text_expression,
    transfer_config,
)

from conftest import DOCS_DIR, GOLDEN_DIR

CSV = b"Order Date,Category,Sales\n2022-03-02,Furniture,10\n2022-03-05,Furniture,20\n2022-03-07,Technology,5\n"
TABLE = load_table(CSV)
SALES = Measure("Sales", "aggregated", source_column="Sales", aggregate="sum")
CATEGORY = Dimension("Category", "Category", "nominal")
ORDER_DATE = Dimension("Order Date", "Order Date", "temporal")
MARCH = TimeFrame("Order Date", date(2022, 3, 2), Duration(1, "month"))
SCALES = (Scale("Category", "ordinal", ("Furniture", "Technology"), ("#4c78a8", "#f58518")),)


def component(measures=(SALES,), dims=(CATEGORY,), mark="bar", scales=SCALES) -> ComponentSpec:
    encodings = {"y": measures[0].name}
    if dims:
        encodings["x"] = dims[0].name
    return ComponentSpec(
        id="c",
        data_source="s",
        measures=tuple(measures),
        time_frame=MARCH,
        original_design=OriginalDesign(mark, encodings, scales if dims and dims[0].kind == "nominal" else ()),
        dimensions=tuple(dims),
    )


def ids(matches) -> list[str]:
    return [m.template_id for m in matches]


class TestApplicability:
    def test_one_measure_one_nominal_offers_breakdowns(self):
        matches = applicable_templates(component())
        assert ids(matches) == ["simple-breakdown", "breakdown-with-goal"]
        assert matches[0].missing_params == ()
        assert matches[1].missing_params == ("goal",)

    def test_one_measure_temporal_dimension_offers_time_series_only(self):
        matches = applicable_templates(component(dims=(ORDER_DATE,), mark="line"))
        assert ids(matches) == ["time-series-with-threshold"]

    def test_no_dimensions_offers_nothing(self):
        matches = applicable_templates(component(dims=(), mark="text-metric"))
        assert matches == []

    def test_requirement_matrix(self):
        # the documented requirement table, enumerated shape by shape
        nominal = [Dimension(f"N{i}", "Category", "nominal") for i in range(2)]
        temporal = [Dimension(f"T{i}", "Order Date", "temporal") for i in range(2)]
        measures = [
            Measure(f"M{i}", "aggregated", source_column="Sales", aggregate="sum") for i in range(3)
        ]
        for m_count in (1, 2):
            for n_count in (0, 1, 2):
                for t_count in (0, 1):
                    for cats in (3, 13):
                        dims = tuple(nominal[:n_count] + temporal[:t_count])
                        subject = DashboardSelection(
                            panel_id="p", worksheet="w", data_source="s",
                            measures=tuple(measures[:m_count]), dimensions=dims,
                        )
                        counts = {d.name: cats for d in dims if d.kind == "nominal"}
                        got = set(ids(applicable_templates(subject, category_counts=counts)))
                        expected = set()
                        if m_count == 1 and n_count == 1 and t_count == 0 and cats <= 12:
                            expected |= {"simple-breakdown", "breakdown-with-goal"}
                        if m_count == 1 and t_count == 1 and n_count <= 1 and (n_count == 0 or cats <= 12):
                            expected.add("time-series-with-threshold")
                        assert got == expected, (m_count, n_count, t_count, cats)

    def test_category_cap_excludes_wide_breakdowns(self):
        matches = applicable_templates(component(), category_counts={"Category": 13})
        assert ids(matches) == []
        matches = applicable_templates(component(), category_counts={"Category": 12})
        assert ids(matches) == ["simple-breakdown", "breakdown-with-goal"]

    def test_monotone_in_parameter_information(self):
        bare = component()
        offered_before = ids(applicable_templates(bare))
        design = default_catalog().require("breakdown-with-goal")
        cfg = transfer_config(bare, {"goal": {"Furniture": 50, "Technology": 20}})
        from dashsnap.model import TemplateBinding

        bound = ComponentSpec(**{**_kw(bare), "template": TemplateBinding(design.id, cfg)})
        matches = applicable_templates(bound)
        assert ids(matches) == offered_before  # nothing removed
        assert next(m for m in matches if m.template_id == design.id).missing_params == ()

    def test_ordering_breakdowns_before_time_series(self):
        subject = component(dims=(CATEGORY, ORDER_DATE))
        # 1 nominal + 1 temporal: only time-series matches (breakdowns need 0 temporal)
        assert ids(applicable_templates(subject)) == ["time-series-with-threshold"]


def _kw(c: ComponentSpec) -> dict:
    return {
        "id": c.id, "data_source": c.data_source, "measures": c.measures,
        "time_frame": c.time_frame, "original_design": c.original_design,
        "appearance": c.appearance, "data_filters": c.data_filters,
        "dimensions": c.dimensions, "template": c.template, "caption": c.caption,
        "custom_text": c.custom_text, "annotations": c.annotations,
        "interactive_filters": c.interactive_filters,
    }


class TestMediation:
    def test_transfer_and_bind(self):
        design = default_catalog().require("breakdown-with-goal")
        cfg = mediate_config(
            component(), design,
            {"goal": {"Furniture": 50, "Technology": 20}, "total-goal": 70},
            categories=["Furniture", "Technology"],
        )
        assert cfg.measures == (SALES,)
        assert cfg.time_frame == MARCH
        assert cfg.scales == SCALES  # transferred from the original design
        assert cfg.parameters["goal"]["Furniture"] == 50

    def test_goal_map_category_gap(self):
        design = default_catalog().require("breakdown-with-goal")
        with pytest.raises(TemplateError) as err:
            mediate_config(component(), design, {"goal": {"Furniture": 50}}, categories=["Furniture", "Technology"])
        assert err.value.code == "PARAM_CATEGORY_GAP"

    def test_unknown_category_key(self):
        design = default_catalog().require("breakdown-with-goal")
        with pytest.raises(TemplateError) as err:
            mediate_config(
                component(), design,
                {"goal": {"Furniture": 50, "Technology": 20, "Ghost": 1}},
                categories=["Furniture", "Technology"],
            )
        assert err.value.code == "PARAM_UNKNOWN_CATEGORY"

    def test_missing_required_parameter(self):
        design = default_catalog().require("breakdown-with-goal")
        with pytest.raises(TemplateError) as err:
            mediate_config(component(), design, {}, categories=["Furniture", "Technology"])
        assert err.value.code == "PARAM_MISSING"

    def test_wrong_parameter_type(self):
        design = default_catalog().require("breakdown-with-goal")
        with pytest.raises(TemplateError):
            mediate_config(component(), design, {"goal": 50}, categories=["Furniture"])

    def test_simple_breakdown_takes_no_params(self):
        design = default_catalog().require("simple-breakdown")
        cfg = mediate_config(component(), design, {}, categories=["Furniture", "Technology"])
        assert cfg.parameters == {}

    def test_inapplicable_shape_rejected(self):
        design = default_catalog().require("simple-breakdown")
        with pytest.raises(TemplateError) as err:
            mediate_config(component(dims=()), design, {})
        assert err.value.code == "TEMPLATE_INAPPLICABLE"


def _golden(name: str) -> str:
    with open(os.path.join(GOLDEN_DIR, name), encoding="utf-8") as f:
        return f.read()


def _result() -> ResultTable:
    return evaluate(TABLE, [SALES], [CATEGORY])


class TestRenderTemplate:
    def test_simple_breakdown_matches_golden(self):
        design = default_catalog().require("simple-breakdown")
        cfg = mediate_config(component(), design, {}, ["Furniture", "Technology"])
        node = render_template(design, cfg, _result(), "both")
        assert node.find("svg-chart")[0].content == _golden("breakdown-simple.svg")
        assert node.find("caption-text")[0].content == _golden("breakdown-simple.txt")

    def test_breakdown_with_goal_matches_golden(self):
        design = default_catalog().require("breakdown-with-goal")
        cfg = mediate_config(component(), design, {"goal": {"Furniture": 50, "Technology": 20}, "total-goal": 70},
                             ["Furniture", "Technology"])
        node = render_template(design, cfg, _result(), "both")
        svg = node.find("svg-chart")[0].content
        caption = node.find("caption-text")[0].content
        assert svg == _golden("breakdown-goal.svg")
        assert caption == _golden("breakdown-goal.txt")
        # hand arithmetic: 30/50 -> 60%, 5/20 -> 25%, 35/70 -> 50%
        assert "(60% of goal 50)" in caption
        assert "(25% of goal 20)" in caption
        assert "(50% of goal 70)" in caption
        assert svg.count('data-role="goal"') == 3  # two categories + total row

    def test_time_series_matches_golden_with_dashed_rule(self):
        design = default_catalog().require("time-series-with-threshold")
        comp = component(dims=(ORDER_DATE,), mark="line")
        cfg = mediate_config(comp, design, {"upper-threshold": 100})
        result = evaluate(TABLE, [SALES], [ORDER_DATE])
        node = render_template(design, cfg, result, "both")
        svg = node.find("svg-chart")[0].content
        assert svg == _golden("time-series.svg")
        assert 'stroke-dasharray="6,4"' in svg
        assert 'data-role="breach"' not in svg  # all values below the threshold
        assert node.find("caption-text")[0].content == _golden("time-series.txt")

    def test_threshold_breach_emphasis(self):
        design = default_catalog().require("time-series-with-threshold")
        comp = component(dims=(ORDER_DATE,), mark="line")
        cfg = mediate_config(comp, design, {"upper-threshold": 15})
        result = evaluate(TABLE, [SALES], [ORDER_DATE])
        node = render_template(design, cfg, result, "both")
        svg = node.find("svg-chart")[0].content
        assert svg.count('data-role="breach"') == 1  # only the 20 exceeds 15
        assert "1 of 3 points exceeded the upper threshold 15" in node.find("caption-text")[0].content

    def test_rendering_is_deterministic(self):
        design = default_catalog().require("breakdown-with-goal")
        cfg = mediate_config(component(), design, {"goal": {"Furniture": 50, "Technology": 20}}, ["Furniture", "Technology"])
        a = render_template(design, cfg, _result(), "visual")
        b = render_template(design, cfg, _result(), "visual")
        assert a.find("svg-chart")[0].content == b.find("svg-chart")[0].content

    def test_empty_result_yields_no_data_badge(self):
        design = default_catalog().require("simple-breakdown")
        cfg = mediate_config(component(), design, {}, [])
        empty = ResultTable(key_columns=("Category",), value_columns=("Sales",), rows=())
        node = render_template(design, cfg, empty, "both")
        badges = node.find("badge")
        assert len(badges) == 1
        assert badges[0].content == "no data in time frame"

    def test_met_marker_iff_value_reaches_goal(self):
        design = default_catalog().require("breakdown-with-goal")
        cfg = mediate_config(component(), design, {"goal": {"Furniture": 30, "Technology": 20}}, ["Furniture", "Technology"])
        node = render_template(design, cfg, _result(), "both")
        svg = node.find("svg-chart")[0].content
        caption = node.find("caption-text")[0].content
        # Furniture 30 >= 30 met (exact comparison); Technology 5 < 20 not met
        furniture = re.search(r'<g data-category="Furniture">.*?</g>', svg).group()
        technology = re.search(r'<g data-category="Technology">.*?</g>', svg).group()
        assert 'data-met="true"' in furniture
        assert 'data-met="true"' not in technology
        assert "Furniture: 30 (100% of goal 30, met)." in caption
        assert "Technology: 5 (25% of goal 20)." in caption

    def test_caption_numbers_equal_result_values(self):
        design = default_catalog().require("simple-breakdown")
        cfg = mediate_config(component(), design, {}, ["Furniture", "Technology"])
        result = _result()
        caption = render_template(design, cfg, result, "text").find("caption-text")[0].content
        for (key, (value,)) in result.rows:
            assert f"{key[0]}: {format_number(value)}." in caption

    def test_svg_is_well_formed(self):
        design = default_catalog().require("breakdown-with-goal")
        cfg = mediate_config(component(), design, {"goal": {"Furniture": 50, "Technology": 20}}, ["Furniture", "Technology"])
        svg = render_template(design, cfg, _result(), "visual").find("svg-chart")[0].content
        xml.dom.minidom.parseString(svg)  # raises on malformed markup

    def test_goal_gap_at_render_time_warns_instead_of_failing(self):
        design = default_catalog().require("breakdown-with-goal")
        cfg = transfer_config(component(), {"goal": {"Furniture": 50}})  # Technology missing
        node = render_template(design, cfg, _result(), "both")
        assert any("Technology" in w for w in node.meta.get("warnings", ()))
        assert "Technology: 5." in node.find("caption-text")[0].content


class TestRenderOriginal:
    def test_bar_at_600_has_tick_labels(self):
        node = render_original(component(), _result(), 600, 280)
        assert node.content == _golden("original-bar-600.svg")
        assert node.content.count('data-role="tick-label"') == 4

    def test_bar_at_300_drops_ticks_keeps_geometry(self):
        node600 = render_original(component(), _result(), 600, 280)
        node300 = render_original(component(), _result(), 300, 200)
        assert node300.content == _golden("original-bar-300.svg")
        assert node300.content.count('data-role="tick-label"') == 0
        assert node300.content.count('data-role="bar"') == node600.content.count('data-role="bar"') == 2
        assert 'font-size="10"' not in node600.content
        assert 'font-size="12"' not in node300.content or node300.content.count('font-size="12"') == 0

    def test_fixed_palette_identical_at_both_widths(self):
        node600 = render_original(component(), _result(), 600, 280)
        node300 = render_original(component(), _result(), 300, 200)
        fills = lambda svg: re.findall(r'data-role="bar"|fill="(#\w{6})"', svg)
        colors600 = [f for f in re.findall(r'fill="(#[0-9a-f]{6})"', node600.content)]
        colors300 = [f for f in re.findall(r'fill="(#[0-9a-f]{6})"', node300.content)]
        assert colors600 == colors300 == ["#4c78a8", "#f58518"]

    def test_text_metric(self):
        measures = (
            Measure("Profit", "aggregated", source_column="Sales", aggregate="sum"),
        )
        comp = component(measures=measures, dims=(), mark="text-metric", scales=())
        result = evaluate(TABLE, measures, [])
        node = render_original(comp, result, 480, 280)
        assert 'data-role="metric"' in node.content
        assert ">35<" in node.content

    def test_line_and_point_and_area(self):
        result = evaluate(TABLE, [SALES], [ORDER_DATE])
        for mark, tag in (("line", "polyline"), ("point", "circle"), ("area", "polygon")):
            comp = component(dims=(ORDER_DATE,), mark=mark, scales=())
            node = render_original(comp, result, 480, 280)
            assert f"<{tag}" in node.content, mark

    def test_unsupported_mark_rejected(self):
        comp = component()
        object.__setattr__(comp.original_design, "mark", "pie")
        with pytest.raises(TemplateError):
            render_original(comp, _result(), 480, 280)


class TestTextExpression:
    def test_total_substitution(self):
        node = render_text_expression("Total {measure} was {total}", None, _result())
        assert node.content == "Total Sales was 35"

    def test_plain_text_verbatim(self):
        node = render_text_expression("No tokens here.", None, _result())
        assert node.content == "No tokens here."

    def test_unknown_token_rejected(self):
        with pytest.raises(TemplateError) as err:
            render_text_expression("{bogus}", None, _result())
        assert err.value.code == "UNKNOWN_TOKEN"

    def test_group_tokens(self):
        design = default_catalog().require("breakdown-with-goal")
        cfg = mediate_config(component(), design, {"goal": {"Furniture": 50, "Technology": 20}}, ["Furniture", "Technology"])
        node = render_text_expression(
            "{dimension} Furniture hit {value(Furniture)} of {goal(Furniture)} ({pct_of_goal(Furniture)}) in {time-frame}.",
            cfg,
            _result(),
        )
        assert node.content == "Category Furniture hit 30 of 50 (60%) in 1 month from 2022-03-02 by Order Date."


class TestCatalogFile:
    def test_shipped_catalog_equals_builtin(self):
        with open(os.path.join(DOCS_DIR, "template-catalog.yaml"), encoding="utf-8") as f:
            loaded = load_catalog(yaml.safe_load(f.read()))
        assert list(loaded) == list(default_catalog())

    def test_catalog_data_round_trip(self):
        data = catalog_to_data(default_catalog())
        assert list(load_catalog(data)) == list(default_catalog())
