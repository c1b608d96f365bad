"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 config/validation error,
4 evaluator failure. Set CELLSPACE_LOG={error,info,debug} to control logging.
"""
from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path

import click

from . import artifacts, evolve, space as space_mod
from .evaluate import (EvaluationCache, EvaluatorError, ExternalEvaluator,
                       SurrogateEvaluator, TrainingBudget)
from .genome import decode, genome_to_json, random_genome_from
from .graph import build_graph
from .space import ConfigError, SearchConfig

EXIT_CONFIG = 3
EXIT_EVALUATOR = 4


def _setup_logging():
    level = os.environ.get("CELLSPACE_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level not in levels:
        level = "error"
    logging.basicConfig(level=levels[level],
                        format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)


def _load_config(path: str | None) -> SearchConfig:
    if path is None or path == "default":
        return space_mod.default_config()
    if path == "tiny":
        return space_mod.tiny_config()
    return space_mod.load_config(path)


def _genome_from_arg(text: str, config: SearchConfig):
    candidate = Path(text)
    if not text.lstrip().startswith("{") and candidate.is_file():
        text = candidate.read_text(encoding="utf-8")
    try:
        return artifacts.parse_genome_text(text, config.params)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"genome: {exc}") from exc


config_option = click.option(
    "--config", "config_path", default=None, metavar="PATH",
    help="Search-space config JSON ('default' and 'tiny' name the bundled ones).")


def _guarded(func):
    """Map domain errors onto the documented exit codes."""
    import functools

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except EvaluatorError as exc:
            click.echo(f"evaluator error: {exc}", err=True)
            sys.exit(EXIT_EVALUATOR)
        except ValueError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
    return wrapper


@click.group()
def main():
    """Cell-based architecture search space toolkit."""
    _setup_logging()


@main.group("space")
def space_group():
    """Search-space inspection."""


@space_group.command("info")
@config_option
@_guarded
def space_info(config_path):
    """Print the exact cardinality of every level of the space."""
    config = _load_config(config_path)
    p = config.params
    click.echo(f"pipeline: {space_mod.pipeline_cardinality(p)}")
    click.echo(f"convolution_part: {space_mod.conv_part_cardinality(p)}")
    click.echo(f"reduction: {space_mod.reduction_cardinality(p)}")
    click.echo(f"structure: {space_mod.structure_cardinality(p)}")
    click.echo(f"cell_complexity: {space_mod.cell_complexity(p)}")
    click.echo(f"total: {space_mod.total_cardinality(p)}")


@main.command()
@config_option
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--count", default=1, show_default=True, type=int)
@_guarded
def sample(config_path, seed, count):
    """Emit uniformly random genomes, one JSON document per line."""
    import random as random_mod
    config = _load_config(config_path)
    rng = random_mod.Random(seed)
    for _ in range(count):
        genome = random_genome_from(rng, config.params)
        click.echo(genome_to_json(genome, config.params))


@main.command("decode")
@config_option
@click.option("--genome", "genome_text", required=True, metavar="JSON|PACKED-CSV|PATH",
              help="Genome as JSON, comma-separated packed genes, or a file of either.")
@_guarded
def decode_cmd(config_path, genome_text):
    """Decode a genome: canonical architecture export plus a summary table."""
    config = _load_config(config_path)
    genome = _genome_from_arg(genome_text, config)
    plan = decode(genome, config)
    graph = build_graph(plan, config)
    click.echo(artifacts.canonical_json(artifacts.export_architecture(genome, graph, config)))
    click.echo("")
    click.echo(artifacts.plan_summary(plan, config))
    click.echo("")
    click.echo(artifacts.summary_table(graph))


@main.command("params")
@config_option
@click.option("--genome", "genome_text", required=True, metavar="JSON|PACKED-CSV|PATH")
@_guarded
def params_cmd(config_path, genome_text):
    """Per-node parameter breakdown and total for a genome."""
    config = _load_config(config_path)
    genome = _genome_from_arg(genome_text, config)
    graph = build_graph(decode(genome, config), config)
    click.echo(artifacts.summary_table(graph))


@main.command("export")
@config_option
@click.option("--genome", "genome_text", required=True, metavar="JSON|PACKED-CSV|PATH")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@_guarded
def export_cmd(config_path, genome_text, out_path):
    """Write the canonical architecture export JSON to a file."""
    config = _load_config(config_path)
    genome = _genome_from_arg(genome_text, config)
    graph = build_graph(decode(genome, config), config)
    export = artifacts.export_architecture(genome, graph, config)
    Path(out_path).write_text(artifacts.canonical_json(export) + "\n", encoding="utf-8")
    click.echo(f"wrote {out_path}")


@main.command("search")
@config_option
@click.option("--evaluator", "evaluator_spec", default="surrogate", show_default=True,
              metavar="surrogate|external:<command>")
@click.option("--strategy", type=click.Choice(["single", "two-phase"]), default=None,
              help="Override the config's search strategy.")
@click.option("--seed", default=None, type=int, help="Override the config's EA seed.")
@click.option("--generations", default=None, type=int,
              help="Override the config's generation budget.")
@click.option("--out-dir", default="cellspace-out", show_default=True,
              type=click.Path(file_okay=False))
@click.option("--cache", "cache_path", default=None, type=click.Path(dir_okay=False),
              help="Persistent evaluation cache (newline-delimited JSON).")
@click.option("--epochs", default=None, type=int,
              help="Training epochs per candidate sent to external evaluators.")
@click.option("--batch-size", default=None, type=int,
              help="Training batch size per candidate sent to external evaluators.")
@_guarded
def search_cmd(config_path, evaluator_spec, strategy, seed, generations, out_dir,
               cache_path, epochs, batch_size):
    """Run the evolutionary search and write pareto.{csv,json,svg,png} + run.log."""
    config = _load_config(config_path)
    overrides = {}
    if seed is not None:
        overrides["seed"] = seed
    if generations is not None:
        overrides["generations"] = generations
    if strategy is not None:
        overrides["strategy"] = {"single": "single_loop", "two-phase": "two_phase"}[strategy]
    if overrides:
        from dataclasses import replace
        config = replace(config, ea=replace(config.ea, **overrides))

    if evaluator_spec == "surrogate":
        evaluator = SurrogateEvaluator()
    elif evaluator_spec.startswith("external:"):
        evaluator = ExternalEvaluator(evaluator_spec[len("external:"):])
    else:
        raise click.UsageError(f"unknown evaluator {evaluator_spec!r}")

    budget = None
    if epochs is not None or batch_size is not None:
        from dataclasses import replace
        budget = TrainingBudget()
        if epochs is not None:
            budget = replace(budget, epochs=epochs)
        if batch_size is not None:
            budget = replace(budget, batch_size=batch_size)

    cache = EvaluationCache(cache_path) if cache_path else None
    records: list[dict] = []
    run = (evolve.evolve_two_phase if config.ea.strategy == "two_phase"
           else evolve.evolve_single_loop)
    archive = run(config, evaluator, log_records=records, cache=cache, budget=budget)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "pareto.csv").write_text(artifacts.export_pareto_csv(archive, config),
                                    encoding="utf-8")
    (out / "pareto.json").write_text(
        artifacts.canonical_json(artifacts.export_pareto_json(archive, config)) + "\n",
        encoding="utf-8")
    (out / "pareto.svg").write_text(artifacts.render_pareto_svg(archive),
                                    encoding="utf-8")
    artifacts.render_pareto_png(archive, out / "pareto.png")
    with open(out / "run.log", "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")
    click.echo(f"archive size {len(archive)}; results in {out}")


if __name__ == "__main__":
    main()
