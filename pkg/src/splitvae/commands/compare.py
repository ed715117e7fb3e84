import click

from splitvae.commands.common import (
    build_config,
    config_options,
    handles_errors,
    out_dir_option,
    resolve_out_dir,
    settings_from,
)
from splitvae.services.evaluation import run_compare
from splitvae.services.pipeline import load_dataset


@click.command("compare")
@config_options
@out_dir_option
@click.pass_context
@handles_errors
def compare_cmd(ctx, config_path, out_dir, **overrides):
    """Train SplitVAE, Central-VAE and the Gaussian copula on the same data and compare them."""
    settings = settings_from(ctx)
    cfg = build_config(config_path, **overrides)
    out = resolve_out_dir(settings, out_dir)
    reports = run_compare(load_dataset(cfg), cfg, settings, out)
    for method, report in reports.items():
        click.echo(
            f"{method:12s} fid={report.fid[0]:.6g} es={report.es[0]:.6g} "
            f"rmse={report.rmse[0]:.6g} crps={report.crps[0]:.6g}"
        )
    click.echo(f"metrics written to {out / 'metrics.csv'}")
