import logging
from dataclasses import replace
from datetime import datetime, timezone

import click

from splitvae.commands.common import (
    build_config,
    config_options,
    handles_errors,
    out_dir_option,
    resolve_out_dir,
    settings_from,
)
from splitvae.services.pipeline import load_dataset, save_split_run, train_split

logger = logging.getLogger(__name__)


@click.command("train")
@config_options
@out_dir_option
@click.option("--lockstep", is_flag=True, default=False, help="Run every rank in one thread.")
@click.pass_context
@handles_errors
def train_cmd(ctx, config_path, out_dir, lockstep, **overrides):
    """Train SplitVAE and write checkpoints, manifest and loss/ledger CSVs."""
    settings = settings_from(ctx)
    if lockstep:
        settings = replace(settings, threaded=False)
    cfg = build_config(config_path, **overrides)
    out = resolve_out_dir(settings, out_dir)
    started = datetime.now(timezone.utc)
    bundle = load_dataset(cfg)
    agents, server, result = train_split(bundle, cfg, settings)
    manifest = save_split_run(out, bundle, cfg, agents, server, result, started)
    logger.info("train command done out=%s epochs=%s", out, manifest["epochs_completed"])
    final = f"{result.losses[-1].total:.6f}" if result.losses else "n/a"
    click.echo(f"trained {len(agents)} edges for {cfg.epochs} epochs, final loss {final}; run written to {out}")
