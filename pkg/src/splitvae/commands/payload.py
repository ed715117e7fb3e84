from pathlib import Path

import click

from splitvae.commands.common import handles_errors, resolve_out_dir, settings_from
from splitvae.services.evaluation import payload_rows, write_payload_report
from splitvae.utils import parse_int_list


@click.command("payload-report")
@click.argument("manifests", nargs=-1, required=True, type=click.Path(path_type=Path))
@click.option("--embed-dims", default=None, help="Also add analytic rows for these widths, e.g. 8,16,20.")
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path), default=None)
@click.pass_context
@handles_errors
def payload_cmd(ctx, manifests, embed_dims, out_dir):
    """Bytes moved per epoch against raw silo bytes, for trained runs and analytic widths."""
    dims = parse_int_list(embed_dims, what="--embed-dims") if embed_dims else []
    rows = payload_rows(list(manifests), dims)
    path = write_payload_report(resolve_out_dir(settings_from(ctx), out_dir), rows)
    for row in rows:
        click.echo(
            f"{row['source']:8s} embed_dim={row['embed_dim']:>8s} bytes/epoch={row['epoch_bytes']} "
            f"reduction={row['reduction_factor']:.3f}"
        )
    click.echo(f"report written to {path}")
