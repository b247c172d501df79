"""In-memory tabular data: CSV ingestion, filters, time frames, aggregation.

The evaluation substrate for every component. Tables are immutable after
load; every query operation is pure and returns a new table or result.

Null handling: a row with a null in a filtered, grouped, or aggregated
column is excluded from that computation and counted in a warnings tally
carried on the result. `count` counts rows and ignores the exclusion rule.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from datetime import date

from . import measure_expr
from .dates import Duration, add_duration, period_label, period_starts, unit_rank
from .errors import DataError
from .model import (
    ColumnType,
    DataFilter,
    DataSourceRegistry,
    DataSourceSchema,
    Dimension,
    Measure,
    TimeFrame,
)

COLUMN_TYPES = ("number", "string", "date")


@dataclass(frozen=True)
class Table:
    columns: tuple[tuple[str, str], ...]  # (name, type in COLUMN_TYPES)
    rows: tuple[tuple, ...]
    warnings: tuple[str, ...] = ()

    def column_names(self) -> list[str]:
        return [name for name, _ in self.columns]

    def column_index(self, name: str) -> int:
        for i, (cname, _) in enumerate(self.columns):
            if cname == name:
                return i
        raise DataError(f"unknown column {name!r}", code="UNKNOWN_COLUMN")

    def column_type(self, name: str) -> str:
        return self.columns[self.column_index(name)][1]

    def schema(self) -> DataSourceSchema:
        return DataSourceSchema(tuple(ColumnType(n, t) for n, t in self.columns))

    def distinct(self, column: str) -> list:
        idx = self.column_index(column)
        seen: list = []
        for row in self.rows:
            v = row[idx]
            if v is not None and v not in seen:
                seen.append(v)
        return sorted(seen)


def _parse_date(text: str) -> date | None:
    try:
        return date.fromisoformat(text)
    except ValueError:
        return None


def _parse_number(text: str) -> float | int | None:
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return None


def _infer_type(values: list[str]) -> str:
    non_empty = [v for v in values if v != ""]
    if non_empty and all(_parse_date(v) is not None for v in non_empty):
        return "date"
    if non_empty and all(_parse_number(v) is not None for v in non_empty):
        return "number"
    return "string"


def _convert(text: str, ctype: str, row: int, col: str):
    if text == "":
        return None
    if ctype == "date":
        d = _parse_date(text)
        if d is None:
            raise DataError(f"row {row}, column {col!r}: {text!r} is not an ISO date", code="CELL_TYPE")
        return d
    if ctype == "number":
        n = _parse_number(text)
        if n is None:
            raise DataError(f"row {row}, column {col!r}: {text!r} is not a number", code="CELL_TYPE")
        return n
    return text


def load_table(source: bytes | str | io.IOBase, schema: dict[str, str] | None = None) -> Table:
    """Load a CSV (header row required) into a typed Table.

    Types are inferred per column (ISO dates -> date, numeric -> number,
    else string) unless `schema` overrides a column's type. Row order is
    preserved; empty cells become nulls.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8-sig")
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8-sig") if isinstance(raw, bytes) else raw
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("CSV has no header row", code="EMPTY_CSV")
    header = [h.strip() for h in header]
    if len(set(header)) != len(header):
        dupes = sorted({h for h in header if header.count(h) > 1})
        raise DataError(f"duplicate header columns: {', '.join(dupes)}", code="DUPLICATE_HEADER")
    raw_rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DataError(f"row {lineno} has {len(row)} cells, expected {len(header)}", code="RAGGED_ROW")
        raw_rows.append(row)

    schema = schema or {}
    for col, ctype in schema.items():
        if col not in header:
            raise DataError(f"schema declares unknown column {col!r}", code="UNKNOWN_COLUMN")
        if ctype not in COLUMN_TYPES:
            raise DataError(f"schema declares unknown type {ctype!r} for {col!r}", code="SCHEMA_TYPE")
    types = []
    for i, col in enumerate(header):
        declared = schema.get(col)
        types.append(declared or _infer_type([r[i] for r in raw_rows]))

    rows = []
    for rowno, raw in enumerate(raw_rows, start=2):
        rows.append(tuple(_convert(cell, types[i], rowno, header[i]) for i, cell in enumerate(raw)))
    return Table(columns=tuple(zip(header, types)), rows=tuple(rows))


def _filter_match(value, f: DataFilter) -> bool | None:
    """None means the row is excluded because the filtered cell is null."""
    if value is None:
        return None
    if f.kind == "equals":
        return value == f.value
    if f.kind == "one_of":
        return value in f.values
    if f.kind == "range":
        return f.low <= value <= f.high
    if f.kind == "date_range":
        return f.start <= value <= f.end
    raise DataError(f"unknown filter kind {f.kind!r}", code="FILTER_KIND")


def apply_filters(t: Table, filters: list[DataFilter] | tuple[DataFilter, ...]) -> Table:
    """Rows satisfying the conjunction of all predicates, order preserved."""
    if not filters:
        return t
    indices = [(f, t.column_index(f.column)) for f in filters]
    kept = []
    null_hits = 0
    for row in t.rows:
        keep = True
        for f, idx in indices:
            match = _filter_match(row[idx], f)
            if match is None:
                null_hits += 1
                keep = False
                break
            if not match:
                keep = False
                break
        if keep:
            kept.append(row)
    warnings = t.warnings
    if null_hits:
        warnings = warnings + (f"{null_hits} row(s) excluded: null in a filtered column",)
    return replace(t, rows=tuple(kept), warnings=warnings)


def apply_time_frame(t: Table, tf: TimeFrame) -> Table:
    """Rows with start <= field < end (half-open, so frames tile cleanly)."""
    idx = t.column_index(tf.field)
    if t.column_type(tf.field) != "date":
        raise DataError(f"time frame field {tf.field!r} is not a date column", code="TEMPORAL_FIELD_REQUIRED")
    start, end = tf.start, tf.end
    kept = []
    null_hits = 0
    for row in t.rows:
        v = row[idx]
        if v is None:
            null_hits += 1
            continue
        if start <= v < end:
            kept.append(row)
    warnings = t.warnings
    if null_hits:
        warnings = warnings + (f"{null_hits} row(s) excluded: null in time frame field",)
    return replace(t, rows=tuple(kept), warnings=warnings)


@dataclass(frozen=True)
class ResultTable:
    """Group keys plus one value column per evaluated measure.

    One row per distinct group-key combination, ordered by ascending key;
    missing groups are absent, not zero-filled. With no dimensions there is
    a single total row with an empty key.
    """

    key_columns: tuple[str, ...]
    value_columns: tuple[str, ...]
    rows: tuple[tuple[tuple, tuple], ...]  # ((key values), (measure values))
    warnings: tuple[str, ...] = ()

    def keys(self) -> list[tuple]:
        return [k for k, _ in self.rows]

    def value(self, key: tuple, measure: str):
        col = self.value_columns.index(measure)
        for k, vals in self.rows:
            if k == key:
                return vals[col]
        raise DataError(f"no group {key!r} in result", code="UNKNOWN_GROUP")

    def series(self, measure: str) -> list:
        col = self.value_columns.index(measure)
        return [vals[col] for _, vals in self.rows]

    def total(self, measure: str) -> float | int | None:
        vals = [v for v in self.series(measure) if v is not None]
        return sum(vals) if vals else None


def _aggregate(values: list, fn: str, row_count: int):
    if fn == "count":
        return row_count
    if not values:
        return None
    if fn == "sum":
        return sum(values)
    if fn == "avg":
        return sum(values) / len(values)
    if fn == "min":
        return min(values)
    if fn == "max":
        return max(values)
    raise DataError(f"unknown aggregate {fn!r}", code="AGGREGATE")


def _computed_order(measures: list[Measure]) -> list[Measure]:
    """Computed measures in dependency order (validation ruled out cycles)."""
    named = {m.name: m for m in measures}
    ordered: list[Measure] = []
    seen: set[str] = set()

    def visit(m: Measure):
        if m.name in seen:
            return
        seen.add(m.name)
        for ref in sorted(measure_expr.expr_refs(measure_expr.parse_expr(m.expression))):
            dep = named.get(ref)
            if dep is not None and dep.kind == "computed":
                visit(dep)
        ordered.append(m)

    for m in measures:
        if m.kind == "computed":
            visit(m)
    return ordered


def evaluate(t: Table, measures: list[Measure] | tuple[Measure, ...], dims: list[Dimension] | tuple[Dimension, ...]) -> ResultTable:
    """Group by dimensions, aggregate measures, then evaluate computed ones.

    Computed measures are evaluated on the already-aggregated values of the
    measures they reference (aggregate-then-compute). Division by zero
    yields a null cell plus a warning, never a failure.
    """
    measures = list(measures)
    dims = list(dims)
    dim_idx = [t.column_index(d.source_column) for d in dims]
    warnings = list(t.warnings)

    groups: dict[tuple, list[tuple]] = {}
    null_grouped = 0
    for row in t.rows:
        key = tuple(row[i] for i in dim_idx)
        if any(v is None for v in key):
            null_grouped += 1
            continue
        groups.setdefault(key, []).append(row)
    if null_grouped:
        warnings.append(f"{null_grouped} row(s) excluded: null in a grouped column")
    if not dims:
        groups[()] = list(t.rows)  # single total row

    base = [m for m in measures if m.kind in ("column", "aggregated")]
    computed = _computed_order(measures)
    null_aggregated = 0

    out_rows = []
    for key in sorted(groups):
        rows = groups[key]
        values: dict[str, float | int | None] = {}
        for m in base:
            idx = t.column_index(m.source_column)
            cells = [r[idx] for r in rows]
            non_null = [c for c in cells if c is not None]
            null_aggregated += len(cells) - len(non_null)
            if m.kind == "column":
                if len(rows) == 1:
                    values[m.name] = cells[0]
                else:
                    values[m.name] = None
                    warnings.append(f"column measure {m.name!r} ambiguous for group {key!r}: {len(rows)} rows")
            else:
                values[m.name] = _aggregate(non_null, m.aggregate, len(rows))
        for m in computed:
            node = measure_expr.parse_expr(m.expression)
            refs = measure_expr.expr_refs(node)
            v = measure_expr.eval_expr(node, {r: values.get(r) for r in refs})
            if v is None and all(values.get(r) is not None for r in refs):
                warnings.append(f"division by zero in measure {m.name!r} for group {key!r}")
            values[m.name] = v
        out_rows.append((key, tuple(values[m.name] for m in measures)))
    if null_aggregated:
        warnings.append(f"{null_aggregated} cell(s) excluded: null in an aggregated column")

    return ResultTable(
        key_columns=tuple(d.name for d in dims),
        value_columns=tuple(m.name for m in measures),
        rows=tuple(out_rows),
        warnings=tuple(warnings),
    )


class TableRegistry(DataSourceRegistry):
    """A registry that also holds loaded tables for materialization."""

    def __init__(self):
        super().__init__()
        self._tables: dict[str, Table] = {}

    def register_table(self, source_id: str, table: Table) -> None:
        self._tables[source_id] = table
        self.register(source_id, table.schema())

    def table(self, source_id: str) -> Table | None:
        return self._tables.get(source_id)


def distinct_categories(registry: TableRegistry, subject) -> dict[str, int] | None:
    """Observed category counts per nominal dimension, or None without data."""
    table = registry.table(subject.data_source)
    if table is None:
        return None
    return {
        d.name: len(table.distinct(d.source_column))
        for d in subject.dimensions
        if d.kind == "nominal" and d.source_column in table.column_names()
    }


@dataclass(frozen=True)
class CompletenessReport:
    expected_buckets: int
    observed_buckets: int
    missing: tuple[str, ...]  # period labels
    complete: bool


def detect_completeness(t: Table, tf: TimeFrame, granularity: str) -> CompletenessReport:
    """Tile [start, end) into `granularity` periods; a bucket with zero rows
    is missing. Granularity must be no coarser than the frame's duration."""
    if granularity not in ("day", "week", "month", "quarter", "year"):
        raise DataError(f"unknown granularity {granularity!r}", code="GRANULARITY")
    if unit_rank(granularity) > unit_rank(tf.duration.unit):
        raise DataError(
            f"granularity {granularity!r} is coarser than the frame duration ({tf.duration})",
            code="GRANULARITY_TOO_COARSE",
        )
    idx = t.column_index(tf.field)
    dates = [row[idx] for row in t.rows if row[idx] is not None]
    starts = period_starts(tf.start, tf.end, granularity)
    missing: list[str] = []
    observed = 0
    step = Duration(1, granularity)
    for s in starts:
        bucket_end = min(add_duration(s, step), tf.end)
        if any(s <= d < bucket_end for d in dates):
            observed += 1
        else:
            missing.append(period_label(s, granularity))
    return CompletenessReport(
        expected_buckets=len(starts),
        observed_buckets=observed,
        missing=tuple(missing),
        complete=not missing,
    )
