import click

from splitvae.commands.common import (
    build_config,
    config_options,
    handles_errors,
    out_dir_option,
    resolve_out_dir,
    settings_from,
)
from splitvae.services.evaluation import parse_decompositions, run_sweep
from splitvae.services.pipeline import load_dataset
from splitvae.utils import parse_int_list


@click.command("sweep")
@config_options
@out_dir_option
@click.option("--latent-dims", default=None, help="Latent widths to try, e.g. 2,4,8,16,32.")
@click.option("--embed-dims", default=None, help="Edge output widths to try.")
@click.option("--decompositions", default=None, help='Silo splits separated by ";", e.g. "uniform:2;4,7,9".')
@click.pass_context
@handles_errors
def sweep_cmd(ctx, config_path, out_dir, latent_dims, embed_dims, decompositions, **overrides):
    """Architecture sweep and silo decomposition study."""
    if not (latent_dims or embed_dims or decompositions):
        raise click.UsageError("give at least one of --latent-dims, --embed-dims, --decompositions")
    settings = settings_from(ctx)
    cfg = build_config(config_path, **overrides)
    out = resolve_out_dir(settings, out_dir)
    written = run_sweep(
        load_dataset(cfg),
        cfg,
        settings,
        out,
        latent_dims=parse_int_list(latent_dims, what="--latent-dims") if latent_dims else [],
        embed_dims=parse_int_list(embed_dims, what="--embed-dims") if embed_dims else [],
        decompositions=parse_decompositions(decompositions) if decompositions else [],
    )
    for name, path in written.items():
        click.echo(f"{name}: {path}")
