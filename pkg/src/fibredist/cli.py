"""Command-line interface: ingest, synth, benchmark, run, compare, serve."""

from __future__ import annotations

import json
import zipfile
from pathlib import Path

import click
import numpy as np

from .dataset import (
    ProcessInputs,
    SyntheticConfig,
    available_polymers,
    generate_synthetic,
    load_dataset,
    parse_numeric,
    records_to_csv,
)
from .learners import ModelKind
from .seeding import DEFAULT_SEED
from .service import (
    DataStore,
    RunRequest,
    artifacts_to_json,
    run_pipeline,
)
from .report import build_report, write_bundle
from .validation import nested_cv


@click.group(context_settings={"auto_envvar_prefix": "FIBREDIST"})
def main():
    """Distribution-aware electrospun fibre diameter prediction."""


@main.command()
@click.argument("data", type=click.Path(exists=True))
def ingest(data):
    """Validate a dataset CSV/TSV and print the ingest report as JSON."""
    records, report = load_dataset(data)
    payload = report.to_dict()
    payload["polymers"] = available_polymers(records)
    click.echo(json.dumps(payload, indent=2))


@main.command()
@click.option("--studies", default=30, show_default=True, type=int)
@click.option("--rows", default=20, show_default=True, type=int, help="rows per study")
@click.option("--noise-sd", default=15.0, show_default=True, type=float)
@click.option("--offset-sd", default=10.0, show_default=True, type=float,
              help="per-study offset standard deviation")
@click.option("--seed", default=DEFAULT_SEED, show_default=True, type=int, envvar="FIBREDIST_SEED")
@click.option("--out", type=click.Path(), default="-", show_default=True,
              help="output CSV path ('-' for stdout)")
def synth(studies, rows, noise_sd, offset_sd, seed, out):
    """Emit a deterministic synthetic dataset with known ground truth."""
    config = SyntheticConfig(
        n_studies=studies, rows_per_study=rows, noise_sd=noise_sd,
        seed=seed, study_offset_sd=offset_sd,
    )
    records, _ = generate_synthetic(config)
    text = records_to_csv(records)
    if out == "-":
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text, encoding="utf-8")
        click.echo(f"wrote {len(records)} records to {out}")


def _print_benchmark_table(rows):
    headers = ("Polymer", "Model", "RMSE", "MAE", "Rsquared")
    widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(headers)]
    line = "  ".join(h.ljust(w) for h, w in zip(headers, widths))
    click.echo(line)
    click.echo("-" * len(line))
    for r in rows:
        click.echo("  ".join(v.ljust(w) for v, w in zip(r, widths)))


@main.command()
@click.option("--data", required=True, type=click.Path(exists=True), envvar="FIBREDIST_DATA")
@click.option("--polymer", "polymers", multiple=True,
              help="restrict to these polymers (default: all)")
@click.option("--model", "models", multiple=True,
              help="restrict to these model kinds (default: all seven)")
@click.option("--seed", default=DEFAULT_SEED, show_default=True, type=int, envvar="FIBREDIST_SEED")
@click.option("--workers", default=2, show_default=True, type=int, envvar="FIBREDIST_WORKERS")
@click.option("--out", type=click.Path(), default=None, help="also write the matrix as CSV")
def benchmark(data, polymers, models, seed, workers, out):
    """Nested-CV metrics matrix (polymer x model, mean +/- SD per fold)."""
    from .dataset import polymer_subset

    records, _ = load_dataset(data)
    polymers = list(polymers) or available_polymers(records)
    kinds = [ModelKind(m) for m in models] if models else list(ModelKind)
    rows = []
    for polymer in polymers:
        table = polymer_subset(records, polymer)
        for kind in kinds:
            cv, summary = nested_cv(table, kind, seed, n_jobs=workers)
            rows.append((
                table.polymer,
                kind.value,
                summary.format_cell("rmse"),
                summary.format_cell("mae"),
                summary.format_cell("r2"),
            ))
    _print_benchmark_table(rows)
    if out:
        import csv as _csv

        with open(out, "w", newline="", encoding="utf-8") as fh:
            writer = _csv.writer(fh, lineterminator="\n")
            writer.writerow(("polymer", "model", "rmse", "mae", "r_squared"))
            writer.writerows(rows)
        click.echo(f"\nwrote {out}")


@main.command()
@click.option("--data", required=True, type=click.Path(exists=True), envvar="FIBREDIST_DATA")
@click.option("--polymer", required=True)
@click.option("--model", required=True, type=click.Choice([k.value for k in ModelKind]))
@click.option("--concentration", required=True, type=float)
@click.option("--needle-diameter", required=True, type=float)
@click.option("--rotation-speed", required=True, type=float)
@click.option("--voltage", required=True, type=float)
@click.option("--flow-rate", required=True, type=float)
@click.option("--distance", required=True, type=float)
@click.option("--collector-type", default="", show_default=True)
@click.option("--seed", default=DEFAULT_SEED, show_default=True, type=int, envvar="FIBREDIST_SEED")
@click.option("--workers", default=2, show_default=True, type=int, envvar="FIBREDIST_WORKERS")
@click.option("--out", required=True, type=click.Path(),
              help="output directory for the bundle, sheets and figures")
@click.option("--json-result", "json_out", is_flag=True,
              help="also write the full result payload as result.json")
def run(data, polymer, model, concentration, needle_diameter, rotation_speed,
        voltage, flow_rate, distance, collector_type, seed, workers, out, json_out):
    """Run the full pipeline and write the report bundle plus extracted
    sheets and figures."""
    store = DataStore.from_path(data)
    inputs = ProcessInputs(
        concentration=concentration, needle_diameter=needle_diameter,
        rotation_speed=rotation_speed, voltage=voltage, flow_rate=flow_rate,
        distance=distance, collector_type=collector_type,
    )
    request = RunRequest(polymer=polymer, inputs=inputs,
                         model=ModelKind(model), seed=seed)
    click.echo("WAIT... PROCESSING", err=True)
    artifacts = run_pipeline(store, request, n_jobs=workers)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    bundle = build_report(artifacts)
    bundle_path = write_bundle(bundle, out_dir / "report.zip")
    with zipfile.ZipFile(bundle_path) as zf:
        zf.extractall(out_dir)
    if json_out:
        run_id = request.cache_key(store.fingerprint)
        (out_dir / "result.json").write_text(
            json.dumps(artifacts_to_json(artifacts, run_id=run_id), indent=2),
            encoding="utf-8",
        )
    click.echo(f"Predicted fibre diameter: {artifacts.prediction:.3f}")
    click.echo(artifacts.recommendation.sentence())
    click.echo(artifacts.range_status())
    click.echo(f"report bundle: {bundle_path}")


def _read_sample(path) -> np.ndarray:
    values = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        for cell in line.replace("\t", ",").split(","):
            value = parse_numeric(cell)
            if value is not None and np.isfinite(value):
                values.append(value)
    if not values:
        raise click.ClickException(f"no numeric values found in {path}")
    return np.array(values)


@main.command()
@click.argument("real_csv", type=click.Path(exists=True))
@click.argument("simulated_csv", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None, help="write the battery as CSV")
def compare(real_csv, simulated_csv, out):
    """Two-sample comparison battery between two single-column CSVs."""
    from .distribution import compare_distributions

    a = _read_sample(real_csv)
    b = _read_sample(simulated_csv)
    result = compare_distributions(a, b)
    rows = result.rows()
    width = max(len(r[0]) for r in rows)
    click.echo(f"{'statistic'.ljust(width)}  {'value':>12}  {'p':>10}  note")
    for name, value, p, note in rows:
        click.echo(f"{name.ljust(width)}  {value:>12}  {p:>10}  {note}")
    if out:
        import csv as _csv

        with open(out, "w", newline="", encoding="utf-8") as fh:
            writer = _csv.writer(fh, lineterminator="\n")
            writer.writerow(("statistic", "value", "p", "note"))
            writer.writerows(rows)
        click.echo(f"wrote {out}")


@main.command()
@click.option("--data", required=True, type=click.Path(exists=True), envvar="FIBREDIST_DATA")
@click.option("--host", default="127.0.0.1", show_default=True, envvar="FIBREDIST_HOST")
@click.option("--port", default=8000, show_default=True, type=int, envvar="FIBREDIST_PORT")
@click.option("--workers", default=2, show_default=True, type=int, envvar="FIBREDIST_WORKERS",
              help="pipeline worker threads")
@click.option("--static", "static_dir", default=None, type=click.Path(),
              envvar="FIBREDIST_STATIC", help="serve a built web console from this directory")
def serve(data, host, port, workers, static_dir):
    """Start the HTTP JSON API (and optionally the web console)."""
    import uvicorn

    from .api import create_app

    store = DataStore.from_path(data)
    app = create_app(store, workers=workers, static_dir=static_dir)
    click.echo(f"serving on http://{host}:{port} with dataset {store.fingerprint[:12]}")
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
