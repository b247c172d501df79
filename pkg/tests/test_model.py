from datetime import date, datetime, time

import pytest

from dashsnap.dates import Duration
from dashsnap.measure_expr import ExprError, eval_expr, expr_refs, parse_expr
from dashsnap.model import (
    Annotation,
    ColumnType,
    ComponentSpec,
    Curation,
    DataFilter,
    DataSourceRegistry,
    DataSourceSchema,
    Dimension,
    InteractiveFilter,
    Measure,
    OriginalDesign,
    SnapshotSpec,
    TimeFrame,
    UpdatePolicy,
    auto_recur,
    validate_component,
    validate_snapshot,
)

SCHEMA = DataSourceSchema(
    (
        ColumnType("Order Date", "date"),
        ColumnType("Category", "string"),
        ColumnType("Region", "string"),
        ColumnType("Sales", "number"),
        ColumnType("Profit", "number"),
    )
)

SALES = Measure("Sales", "aggregated", source_column="Sales", aggregate="sum")
CATEGORY = Dimension("Category", "Category", "nominal")
MARCH = TimeFrame("Order Date", date(2022, 3, 2), Duration(1, "month"))


def component(**overrides) -> ComponentSpec:
    base = dict(
        id="c-1",
        data_source="src",
        measures=(SALES,),
        time_frame=MARCH,
        original_design=OriginalDesign("bar", {"x": "Category", "y": "Sales"}),
        dimensions=(CATEGORY,),
    )
    base.update(overrides)
    return ComponentSpec(**base)


def codes(report) -> list[str]:
    return [v.code for v in report.violations]


class TestMeasureExpressions:
    def test_parse_and_eval(self):
        node = parse_expr("Profit / Sales")
        assert expr_refs(node) == {"Profit", "Sales"}
        assert eval_expr(node, {"Profit": 5, "Sales": 20}) == 0.25

    def test_bracketed_names_allow_spaces(self):
        node = parse_expr("[Profit Ratio] * 100")
        assert expr_refs(node) == {"Profit Ratio"}
        assert eval_expr(node, {"Profit Ratio": 0.25}) == 25.0

    def test_precedence_and_parens(self):
        assert eval_expr(parse_expr("2 + 3 * 4"), {}) == 14
        assert eval_expr(parse_expr("(2 + 3) * 4"), {}) == 20
        assert eval_expr(parse_expr("-Sales + 10"), {"Sales": 4}) == 6

    def test_division_by_zero_yields_none(self):
        assert eval_expr(parse_expr("Profit / Sales"), {"Profit": 1, "Sales": 0}) is None

    def test_syntax_errors(self):
        with pytest.raises(ExprError):
            parse_expr("Sales +")
        with pytest.raises(ExprError):
            parse_expr("Sales ??")
        with pytest.raises(ExprError):
            parse_expr("(Sales")


class TestValidateComponent:
    def test_well_formed_component_passes(self):
        assert validate_component(component(), SCHEMA).ok

    def test_nominal_time_frame_field_rejected(self):
        c = component(time_frame=TimeFrame("Category", date(2022, 3, 2), Duration(1, "month")))
        report = validate_component(c, SCHEMA)
        assert "TEMPORAL_FIELD_REQUIRED" in codes(report)

    def test_computed_measure_with_declared_refs_passes(self):
        # hand-walk: "Profit / Sales" references Profit, Sales; both declared
        measures = (
            Measure("Profit", "aggregated", source_column="Profit", aggregate="sum"),
            Measure("Sales", "aggregated", source_column="Sales", aggregate="sum"),
            Measure("Profit Ratio", "computed", expression="Profit / Sales"),
        )
        c = component(measures=measures, original_design=OriginalDesign("text-metric"))
        assert validate_component(c, SCHEMA).ok

    def test_computed_measure_with_undeclared_ref_flagged(self):
        measures = (
            Measure("Sales", "aggregated", source_column="Sales", aggregate="sum"),
            Measure("Profit Ratio", "computed", expression="Profit / Sales"),
        )
        c = component(measures=measures, original_design=OriginalDesign("text-metric"))
        report = validate_component(c, SCHEMA)
        assert "UNKNOWN_MEASURE_REF" in codes(report)

    def test_cyclic_computed_measures_flagged(self):
        measures = (
            Measure("A", "computed", expression="B + 1"),
            Measure("B", "computed", expression="A + 1"),
        )
        c = component(measures=measures, original_design=OriginalDesign("text-metric"))
        assert "CYCLIC_MEASURE_REF" in codes(validate_component(c, SCHEMA))

    def test_measure_shape_rules(self):
        bad = (
            Measure("Sales", "column", source_column="Sales", aggregate="sum"),  # column + aggregate
            Measure("Units", "aggregated", source_column="Sales"),  # aggregated without aggregate
            Measure("Calc", "computed"),  # computed without expression
        )
        report = validate_component(component(measures=bad, original_design=OriginalDesign("text-metric")), SCHEMA)
        assert codes(report).count("MEASURE_SHAPE") == 3

    def test_unknown_columns_reported(self):
        c = component(
            measures=(Measure("X", "aggregated", source_column="Bogus", aggregate="sum"),),
            data_filters=(DataFilter("Nope", "equals", value="x"),),
            original_design=OriginalDesign("text-metric"),
            dimensions=(),
        )
        assert codes(validate_component(c, SCHEMA)).count("UNKNOWN_COLUMN") == 2

    def test_filter_type_mismatches(self):
        c = component(
            data_filters=(
                DataFilter("Category", "range", low=1, high=2),
                DataFilter("Sales", "date_range", start=date(2022, 1, 1), end=date(2022, 2, 1)),
                DataFilter("Sales", "equals", value="ten"),
            )
        )
        assert codes(validate_component(c, SCHEMA)).count("FILTER_TYPE_MISMATCH") == 3

    def test_temporal_dimension_needs_date_column(self):
        c = component(dimensions=(Dimension("Category", "Category", "temporal"),),
                      original_design=OriginalDesign("bar", {"y": "Sales"}))
        assert "TEMPORAL_FIELD_REQUIRED" in codes(validate_component(c, SCHEMA))

    def test_encoded_fields_must_exist(self):
        c = component(original_design=OriginalDesign("bar", {"x": "Ghost", "y": "Sales"}))
        assert "ENCODED_FIELD_UNKNOWN" in codes(validate_component(c, SCHEMA))

    def test_text_appearance_requires_template(self):
        c = component(appearance="text")
        assert "APPEARANCE_REQUIRES_VISUAL" in codes(validate_component(c, SCHEMA))

    def test_interactive_filter_rules(self):
        c = component(
            interactive_filters=(
                InteractiveFilter("dropdown", column="Ghost", options=("a",)),
                InteractiveFilter("slider", column="Category", min=0.0, max=1.0),
                InteractiveFilter("macro", name="m", filters=()),
            )
        )
        found = codes(validate_component(c, SCHEMA))
        assert "UNKNOWN_COLUMN" in found
        assert "FILTER_TYPE_MISMATCH" in found  # slider on a string column
        assert "MACRO_EMPTY" in found

    def test_annotation_targets_checked(self):
        c = component(
            annotations=(
                Annotation("reference-line", measure="Ghost", value=10.0),
                Annotation("highlight"),
            )
        )
        found = codes(validate_component(c, SCHEMA))
        assert "UNKNOWN_MEASURE_REF" in found
        assert "ANNOTATION_TARGET_INVALID" in found

    def test_schema_free_validation_skips_column_checks(self):
        c = component(
            measures=(Measure("X", "aggregated", source_column="Bogus", aggregate="sum"),),
            original_design=OriginalDesign("bar", {"x": "Category", "y": "X"}),
        )
        assert validate_component(c, None).ok

    def test_custom_text_tokens_checked(self):
        c = component(custom_text="Total {measure} was {bogus}")
        assert "UNKNOWN_TOKEN" in codes(validate_component(c, SCHEMA))

    def test_validation_is_deterministic_and_idempotent(self):
        c = component(
            time_frame=TimeFrame("Category", date(2022, 3, 2), Duration(1, "month")),
            data_filters=(DataFilter("Nope", "equals", value="x"),),
        )
        first = validate_component(c, SCHEMA)
        second = validate_component(c, SCHEMA)
        assert first.violations == second.violations


def snapshot(**overrides) -> SnapshotSpec:
    base = dict(
        id="snap-1",
        title="T",
        components=(component(),),
        curation=Curation("carousel"),
        freshness=date(2022, 5, 2),
        update_policy=UpdatePolicy("manual-author"),
        created_at=datetime(2022, 3, 15, 10, 0),
        author="mia",
    )
    base.update(overrides)
    return SnapshotSpec(**base)


def registry() -> DataSourceRegistry:
    r = DataSourceRegistry()
    r.register("src", SCHEMA)
    return r


class TestValidateSnapshot:
    def test_two_component_carousel_valid(self):
        c2 = component(id="c-2")
        assert validate_snapshot(snapshot(components=(component(), c2)), registry()).ok

    def test_recurrence_horizon_must_follow_creation(self):
        s = snapshot(update_policy=auto_recur(Duration(1, "month"), date(2022, 1, 1), time(9, 0)))
        assert "RECURRENCE_HORIZON_INVALID" in codes(validate_snapshot(s, registry()))

    def test_empty_components_rejected(self):
        assert "NO_COMPONENTS" in codes(validate_snapshot(snapshot(components=()), registry()))

    def test_unknown_data_source(self):
        s = snapshot(components=(component(data_source="ghost"),))
        assert "UNKNOWN_DATA_SOURCE" in codes(validate_snapshot(s, registry()))

    def test_duplicate_component_ids(self):
        s = snapshot(components=(component(), component()))
        assert "DUPLICATE_COMPONENT_ID" in codes(validate_snapshot(s, registry()))

    def test_single_component_any_curation(self):
        for method in ("stack", "carousel", "slideshow", "mini-dashboard"):
            s = snapshot(curation=Curation(method))
            assert validate_snapshot(s, registry()).ok, method

    def test_curation_params_sanity(self):
        s = snapshot(curation=Curation("slideshow", interval_seconds=0))
        assert "CURATION_PARAM_INVALID" in codes(validate_snapshot(s, registry()))
        s = snapshot(curation=Curation("mini-dashboard", columns=0))
        assert "CURATION_PARAM_INVALID" in codes(validate_snapshot(s, registry()))
