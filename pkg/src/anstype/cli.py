"""Command-line surface: ingest, stats, train, predict, evaluate, analyze.

Configuration comes from a single JSON file (see
:data:`anstype.pipeline.DEFAULT_CONFIG` for the schema and defaults), with
``--set dotted.key=value`` flag overrides winning over the file. Exit
codes: 0 success, 2 usage or validation problem, 3 data error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import pipeline
from .dataset import dataset_stats, load_dataset
from .errors import DataFormatError, ValidationError

EXIT_VALIDATION = 2
EXIT_DATA = 3


def _parse_overrides(pairs: tuple[str, ...]) -> dict:
    overrides: dict = {}
    for pair in pairs:
        if "=" not in pair:
            raise click.UsageError(f"--set expects key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = overrides
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return overrides


def _load_config(config_path: str | None, set_pairs: tuple[str, ...], **flags) -> dict:
    overrides = _parse_overrides(set_pairs)
    for key, value in flags.items():
        if value is not None:
            overrides[key] = value
    return pipeline.load_config(config_path, overrides)


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guarded(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ValidationError as exc:
        _fail(EXIT_VALIDATION, str(exc))
    except (DataFormatError, FileNotFoundError, OSError) as exc:
        _fail(EXIT_DATA, str(exc))


@click.group()
def main():
    """Two-phase answer type prediction pipeline."""


_config_opt = click.option("--config", "config_path", type=click.Path(), default=None,
                           help="JSON config file")
_set_opt = click.option("--set", "set_pairs", multiple=True, metavar="KEY=VALUE",
                        help="Override a config entry (dotted keys, JSON values)")


@main.command()
@_config_opt
@_set_opt
@click.option("--output-dir", default=None, help="Where stats files are written")
def ingest(config_path, set_pairs, output_dir):
    """Validate the configured datasets and write their statistics."""
    config = _guarded(_load_config, config_path, set_pairs, output_dir=output_dir)
    results = _guarded(pipeline.cmd_ingest, config)
    for key, stats in sorted(results.items()):
        click.echo(f"[{key}]")
        click.echo(stats.to_tsv(), nl=False)


@main.command()
@click.argument("question_file", type=click.Path(exists=True))
@click.option("--source", type=click.Choice(["dbpedia", "wikidata", "combined"]),
              default="dbpedia", show_default=True)
@click.option("--split", type=click.Choice(["train", "test"]), default="train",
              show_default=True)
@click.option("--json-out", type=click.Path(), default=None, help="Also write JSON stats")
def stats(question_file, source, split, json_out):
    """Print tab-separated statistics for one question file."""
    qs = _guarded(load_dataset, question_file, source, split)
    st = dataset_stats(qs)
    if json_out:
        Path(json_out).write_text(st.to_json(), encoding="utf-8")
    click.echo(st.to_tsv(), nl=False)


@main.command()
@_config_opt
@_set_opt
@click.option("--output-dir", default=None, help="Bundle directory to write")
def train(config_path, set_pairs, output_dir):
    """Train stage 1 and the configured stage 2; write a model bundle."""
    config = _guarded(_load_config, config_path, set_pairs, output_dir=output_dir)
    bundle_dir = _guarded(pipeline.cmd_train, config)
    click.echo(f"bundle written to {bundle_dir}")


@main.command()
@click.argument("bundle_dir", type=click.Path(exists=True))
@click.argument("question_file", type=click.Path(exists=True))
@click.option("--out", "out_file", type=click.Path(), required=True,
              help="Prediction run JSON to write")
@_set_opt
def predict(bundle_dir, question_file, out_file, set_pairs):
    """Predict categories and types for a question file using a bundle."""
    def _run():
        manifest = json.loads(Path(bundle_dir, "manifest.json").read_text(encoding="utf-8"))
        config = pipeline.merge_config(manifest["config"], _parse_overrides(set_pairs))
        return pipeline.cmd_predict(config, bundle_dir, question_file, out_file)

    run = _guarded(_run)
    click.echo(f"{len(run.predictions)} predictions written to {out_file}")


@main.command()
@click.argument("run_file", type=click.Path(exists=True))
@click.argument("gold_file", type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["dbpedia", "wikidata"]), required=True)
@click.option("--hierarchy", "hierarchy_file", type=click.Path(exists=True), default=None,
              help="Type hierarchy TSV (required in dbpedia mode)")
@click.option("--out", "out_prefix", type=click.Path(), default=None,
              help="Write <out>.json and <out>.txt reports")
def evaluate(run_file, gold_file, mode, hierarchy_file, out_prefix):
    """Evaluate a prediction run against gold labels."""
    report = _guarded(pipeline.cmd_evaluate, run_file, gold_file, mode,
                      hierarchy_file, out_prefix)
    click.echo(report.to_text(), nl=False)


@main.command()
@click.argument("run_file", type=click.Path(exists=True))
@click.argument("gold_file", type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["dbpedia", "wikidata"]), required=True)
@click.option("-n", "top_n", type=int, default=10, show_default=True,
              help="Number of types to report")
@click.option("--out", "out_prefix", type=click.Path(), default=None,
              help="Write <out>.json and <out>.tsv tables")
def analyze(run_file, gold_file, mode, top_n, out_prefix):
    """Report the gold types most often missing from the predictions."""
    analysis = _guarded(pipeline.cmd_analyze, run_file, gold_file, mode, top_n, out_prefix)
    click.echo(analysis.to_text(), nl=False)


if __name__ == "__main__":
    main()
