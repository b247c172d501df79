"""Command-line client.

Thin wrappers over the library: lint, render, freshness, tick, serve, and
scenario replay. Exit codes: 0 success, 1 validation failure, 2 I/O failure.
Output is deterministic given a fixed --now.
"""

from __future__ import annotations

import json
import os
import sys
from datetime import datetime

import click

from .clock import FrozenClock, VirtualClock, WallClock
from .data import load_table
from .errors import SnapError
from .lifecycle import infer_freshness, materialize, materialize_component, scheduler_tick
from .model import SnapshotSpec, validate_snapshot
from .specio import SpecParseError, lint as lint_text, parse_any_document
from .store import Store, load_store, render_to_data, save_store


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as f:
            return f.read()
    except OSError as e:
        click.echo(f"error: cannot read {path}: {e}", err=True)
        sys.exit(2)


def _clock(now: str | None):
    return FrozenClock(datetime.fromisoformat(now)) if now else WallClock()


@click.group()
def main():
    """Dashboard snapshots: author, validate, render, schedule, share."""


@main.command()
@click.argument("spec_path", type=click.Path())
def lint(spec_path: str):
    """Validate a snapshot or component document; report with source spans."""
    report = lint_text(_read(spec_path))
    if report.ok:
        click.echo(f"{spec_path}: OK")
        return
    for v in report.violations:
        click.echo(f"{spec_path}:{v.render()}")
    sys.exit(1)


@main.command()
@click.argument("spec_path", type=click.Path())
@click.option("--data", "data_args", multiple=True, help="CSV path, or '<source-id>=<path>' (repeatable)")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="output directory")
@click.option("--now", default=None, help="virtual clock instant (ISO timestamp)")
@click.option("--completeness", default=None, help="detect completeness at this granularity (e.g. day)")
def render(spec_path: str, data_args: tuple[str, ...], out_dir: str, now: str | None, completeness: str | None):
    """Materialize a spec against CSV data: SVGs, captions, transparency."""
    from .data import TableRegistry

    text = _read(spec_path)
    try:
        doc = parse_any_document(text)
    except SpecParseError as e:
        click.echo(f"{spec_path}:{e.as_violation().render()}", err=True)
        sys.exit(1)

    spec = doc.parsed
    sources = {c.data_source for c in spec.components} if isinstance(spec, SnapshotSpec) else {spec.data_source}
    registry = TableRegistry()
    for arg in data_args:
        source_id, _, path = arg.rpartition("=")
        try:
            with open(path, "rb") as f:
                table = load_table(f.read())
        except OSError as e:
            click.echo(f"error: cannot read {path}: {e}", err=True)
            sys.exit(2)
        except SnapError as e:
            click.echo(f"error: {path}: {e}", err=True)
            sys.exit(2)
        if source_id:
            registry.register_table(source_id, table)
        else:
            for sid in sorted(sources):  # one unnamed CSV backs every source
                registry.register_table(sid, table)

    if isinstance(spec, SnapshotSpec):
        report = validate_snapshot(spec, registry)
        if not report.ok:
            for v in report.with_spans(doc.source_span_index).violations:
                click.echo(f"{spec_path}:{v.render()}", err=True)
            sys.exit(1)
        result = materialize(spec, registry, _clock(now), completeness_granularity=completeness)
        components = result.components
        manifest = render_to_data(result)
    else:
        cr = materialize_component(spec, registry)
        components = (cr,)
        from .store import render_node_to_data

        manifest = {
            "component": cr.component_id,
            "body": render_node_to_data(cr.body),
            "transparency": {"filters": list(cr.transparency.filters), "time-frame": cr.transparency.time_frame},
            "error": cr.error,
        }

    os.makedirs(out_dir, exist_ok=True)
    written = []
    for component in components:
        if component.error:
            click.echo(f"warning: {component.component_id}: {component.error}", err=True)
        for j, node in enumerate(component.body.find("svg-chart")):
            name = f"{component.component_id}-{j}.svg"
            with open(os.path.join(out_dir, name), "w", encoding="utf-8") as f:
                f.write(node.content)
            written.append(name)
        lines = [n.content for n in component.body.find("caption-text")]
        lines += [f"[{n.meta.get('badge', 'badge')}] {n.content}" for n in component.body.find("badge")]
        lines.append(f"time frame: {component.transparency.time_frame}")
        for flt in component.transparency.filters:
            lines.append(f"filter: {flt}")
        name = f"{component.component_id}.txt"
        with open(os.path.join(out_dir, name), "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")
        written.append(name)
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2)
    written.append("manifest.json")
    for name in written:
        click.echo(os.path.join(out_dir, name))


@main.command()
@click.argument("spec_path", type=click.Path())
def freshness(spec_path: str):
    """Print a snapshot's explicit and inferred freshness dates."""
    try:
        doc = parse_any_document(_read(spec_path))
    except SpecParseError as e:
        click.echo(f"{spec_path}:{e.as_violation().render()}", err=True)
        sys.exit(1)
    spec = doc.parsed
    if not isinstance(spec, SnapshotSpec):
        click.echo("freshness applies to snapshot documents", err=True)
        sys.exit(1)
    click.echo(f"freshness: {spec.freshness.isoformat()}")
    click.echo(f"inferred: {infer_freshness(spec).isoformat()}")


@main.command()
@click.option("--store", "store_path", required=True, type=click.Path())
@click.option("--now", required=True, help="virtual clock instant (ISO timestamp)")
def tick(store_path: str, now: str):
    """Run one scheduler tick against a store file."""
    if not os.path.exists(store_path):
        click.echo(f"error: no store at {store_path}", err=True)
        sys.exit(2)
    try:
        store = load_store(store_path)
    except SnapError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(2)
    result = scheduler_tick(store, FrozenClock(datetime.fromisoformat(now)))
    save_store(store, store_path)
    for sid, version, _ in result.published:
        click.echo(f"published {sid} v{version}")
    for sid, error in result.failures:
        click.echo(f"failed {sid}: {error}", err=True)
    if not result.published and not result.failures:
        click.echo("nothing due")
    if result.failures:
        sys.exit(1)


@main.command()
@click.option("--store", "store_path", default=None, type=click.Path())
@click.option("--port", default=8000, type=int)
@click.option("--host", default="127.0.0.1")
@click.option("--clock", "clock_mode", default="wall", type=click.Choice(["wall", "virtual"]))
@click.option("--now", default=None, help="virtual clock start (ISO timestamp)")
def serve(store_path: str | None, port: int, host: str, clock_mode: str, now: str | None):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    store = load_store(store_path) if store_path and os.path.exists(store_path) else Store()
    clock = None
    if clock_mode == "virtual":
        clock = VirtualClock(datetime.fromisoformat(now) if now else datetime(2022, 1, 1))
    app = create_app(store, clock=clock, clock_mode=clock_mode, store_path=store_path)
    uvicorn.run(app, host=host, port=port)


@main.group()
def scenario():
    """Scripted scenario replay."""


@scenario.command("run")
@click.argument("script_path", type=click.Path())
@click.option("--out", "out_dir", default=None, type=click.Path(), help="directory for stores/renders")
def scenario_run(script_path: str, out_dir: str | None):
    """Replay a scenario script deterministically."""
    from .scenario import run_scenario

    text = _read(script_path)
    try:
        run = run_scenario(text, base_dir=os.path.dirname(os.path.abspath(script_path)), out_dir=out_dir)
    except SnapError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    for line in run.log:
        click.echo(line)


if __name__ == "__main__":
    main()
