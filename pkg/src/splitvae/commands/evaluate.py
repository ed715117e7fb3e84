import logging
from pathlib import Path

import click
import numpy as np

from splitvae.commands.common import handles_errors, resolve_out_dir, settings_from
from splitvae.repositories import RunRepository
from splitvae.services.datasets import load_csv
from splitvae.services.evaluation import evaluate_runs, evaluate_static
from splitvae.services.pipeline import load_split_run, normalize_observed, split_sampler
from splitvae.settings import FID_FORMS

logger = logging.getLogger(__name__)


@click.command("evaluate")
@click.option("--observed", type=click.Path(dir_okay=False, path_type=Path), required=True,
              help="Observed data CSV (all features).")
@click.option("--generated", type=click.Path(dir_okay=False, path_type=Path), multiple=True,
              help="Generated CSV; repeat once per edge in rank order.")
@click.option("--manifest", type=click.Path(path_type=Path), default=None,
              help="Regenerate from this run instead of reading --generated files.")
@click.option("--runs", type=int, default=None, help="Generation runs (manifest mode).")
@click.option("--fid-form", type=click.Choice(FID_FORMS), default="standard", show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path), default=None)
@click.pass_context
@handles_errors
def evaluate_cmd(ctx, observed, generated, manifest, runs, fid_form, out_dir):
    """FID / energy score / RMSE / CRPS of generated scenarios against observed data."""
    if bool(generated) == bool(manifest):
        raise click.UsageError("pass either --generated files or --manifest")
    if generated and runs is not None:
        raise click.UsageError("--runs only applies with --manifest")
    observed_rows, _ = load_csv(observed)
    if manifest:
        agents, server, meta = load_split_run(manifest)
        n_runs = runs or meta["config"]["runs"]
        target = normalize_observed(observed_rows, agents)
        report = evaluate_runs(target, split_sampler(agents, server, meta["gen_seed"]), n_runs, fid_form=fid_form)
        method = "splitvae"
    else:
        parts = [load_csv(path)[0] for path in generated]
        report = evaluate_static(observed_rows, np.hstack(parts), fid_form=fid_form)
        method = "generated"
    out = resolve_out_dir(settings_from(ctx), out_dir)
    path = RunRepository(out).write_metrics(report.rows(method))
    logger.info("evaluate done method=%s runs=%s fid_form=%s", method, report.runs, fid_form)
    click.echo(
        f"fid={report.fid[0]:.6g} es={report.es[0]:.6g} rmse={report.rmse[0]:.6g} "
        f"crps={report.crps[0]:.6g} over {report.runs} runs; report in {path}"
    )
