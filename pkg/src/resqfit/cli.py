"""Command-line interface.

Verbs:
  fit     batch analysis of trace files into a loss report
  synth   generate a synthetic trace corpus from configured ground truth
  circle  fit a single trace and print the circle-fit parameters
  table   re-render the summary table from an existing report

Exit codes: 0 success, 1 validation/config error, 2 fit failure, 3 I/O error.
If --config names a file that does not exist, the directories in the
RESQFIT_CONFIG_PATH environment variable (colon separated) are searched.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from .batch import DEFAULT_SYNTH_CONFIG, RunConfig, generate_corpus, run_batch
from .circlefit import extract_quality_factors
from .errors import FitError, ResqfitError, ValidationError
from .fileio import ingest_trace_file
from .report import FitReport, emit_table

EXIT_VALIDATION = 1
EXIT_FIT = 2
EXIT_IO = 3

CONFIG_PATH_ENV = "RESQFIT_CONFIG_PATH"


def _resolve_config(path: str) -> Path:
    candidate = Path(path)
    if candidate.exists():
        return candidate
    if not candidate.is_absolute():
        for directory in os.environ.get(CONFIG_PATH_ENV, "").split(":"):
            if directory and (Path(directory) / path).exists():
                return Path(directory) / path
    raise ValidationError(f"config file not found: {path}")


def _fail(exc: BaseException) -> int:
    click.echo(f"error: {exc}", err=True)
    if isinstance(exc, ValidationError):
        return EXIT_VALIDATION
    if isinstance(exc, FitError):
        return EXIT_FIT
    if isinstance(exc, (OSError, json.JSONDecodeError)):
        return EXIT_IO
    return EXIT_VALIDATION


@click.group()
@click.version_option()
def main():
    """Resonator loss characterization: circle fits, loss-model fits, reports."""


@main.command("fit")
@click.option("--config", "config_path", required=True, help="run configuration JSON")
@click.option("--out", "out_dir", required=True, help="output directory")
@click.option("--jobs", type=int, default=None, help="parallel workers (default: config)")
@click.option("--seed", type=int, default=None, help="override the config seed")
@click.option("--force", is_flag=True, help="allow writing into a non-empty output directory")
def fit_cmd(config_path, out_dir, jobs, seed, force):
    """Batch-analyze trace files into a machine-readable loss report."""
    try:
        cfg = RunConfig.load(_resolve_config(config_path))
        if seed is not None:
            cfg.seed = seed
        report, all_ok = run_batch(cfg, out_dir, jobs=jobs, force=force)
    except ResqfitError as exc:
        sys.exit(_fail(exc))
    except OSError as exc:
        sys.exit(_fail(exc))
    click.echo(emit_table(report))
    click.echo(f"report written to {Path(out_dir) / 'report.json'}")
    if not all_ok:
        click.echo("some resonators failed to fit; see the report for details", err=True)
        sys.exit(EXIT_FIT)


@main.command("synth")
@click.option("--config", "config_path", default=None, help="synthesis configuration JSON (default: built-in demo corpus)")
@click.option("--out", "out_dir", required=True, help="output directory")
@click.option("--seed", type=int, default=None, help="override the config seed")
@click.option("--force", is_flag=True, help="allow writing into a non-empty output directory")
def synth_cmd(config_path, out_dir, seed, force):
    """Generate a synthetic trace corpus that `fit` can ingest."""
    try:
        if config_path is None:
            config = json.loads(json.dumps(DEFAULT_SYNTH_CONFIG))
        else:
            with open(_resolve_config(config_path)) as fh:
                config = json.load(fh)
        if seed is not None:
            config["seed"] = seed
        out = Path(out_dir)
        if out.exists() and any(out.iterdir()) and not force:
            raise ValidationError(
                f"output directory {out} is not empty; pass --force to overwrite"
            )
        written = generate_corpus(config, out)
    except ResqfitError as exc:
        sys.exit(_fail(exc))
    except OSError as exc:
        sys.exit(_fail(exc))
    click.echo(f"wrote {len(written)} files under {out_dir}")


@main.command("circle")
@click.argument("trace_file")
@click.option("--power-dbm", type=float, default=None, help="applied power at the resonator input")
@click.option("--temperature-k", type=float, default=None, help="mixing-chamber temperature")
@click.option("--bootstrap", is_flag=True, help="bootstrap standard errors (slower)")
@click.option("--seed", type=int, default=None, help="bootstrap seed")
@click.option("--json", "as_json", is_flag=True, help="print the result as JSON")
def circle_cmd(trace_file, power_dbm, temperature_k, bootstrap, seed, as_json):
    """Circle-fit a single trace and print the extracted parameters."""
    try:
        traces = ingest_trace_file(trace_file, power_dbm=power_dbm, temperature_k=temperature_k)
        results = [
            extract_quality_factors(
                t,
                uncertainty="bootstrap" if bootstrap else "analytic",
                random_state=seed,
            )
            for t in traces
        ]
    except ResqfitError as exc:
        sys.exit(_fail(exc))
    except OSError as exc:
        sys.exit(_fail(exc))
    for r in results:
        if as_json:
            click.echo(json.dumps(r.to_dict(), sort_keys=True))
            continue
        s = r.sigma
        click.echo(f"f_r       = {r.f_r:.6f} Hz  (+/- {s['f_r']:.3g})")
        click.echo(f"Q_l       = {r.q_l:.6g}  (+/- {s['q_l']:.3g})")
        click.echo(f"|Q_c|     = {r.q_c_mag:.6g}  (+/- {s['q_c_mag']:.3g})")
        click.echo(f"phi       = {r.phi:.6g} rad  (+/- {s['phi']:.3g})")
        click.echo(f"Q_i       = {r.q_i:.6g}  (+/- {s['q_i']:.3g})")
        click.echo(f"delay     = {r.env_delay * 1e9:.4f} ns")
        click.echo(f"amplitude = {r.env_amp:.6g}, phase offset = {r.env_phase:.6g} rad")


@main.command("table")
@click.argument("report_file")
def table_cmd(report_file):
    """Re-render the summary table of an existing report."""
    try:
        report = FitReport.load(report_file)
        click.echo(emit_table(report))
    except ResqfitError as exc:
        sys.exit(_fail(exc))
    except (OSError, json.JSONDecodeError) as exc:
        sys.exit(_fail(exc))


if __name__ == "__main__":
    main()
