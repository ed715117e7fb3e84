import logging
from pathlib import Path

import click

from splitvae.commands.common import handles_errors
from splitvae.core import RngStream
from splitvae.core.numerics import STREAM_GENERATE
from splitvae.errors import ConfigError
from splitvae.repositories import RunRepository
from splitvae.services.pipeline import load_split_run
from splitvae.services.trainer import generate_scenarios

logger = logging.getLogger(__name__)


@click.command("generate")
@click.argument("manifest", type=click.Path(path_type=Path))
@click.option("--count", type=int, default=100, show_default=True, help="Scenarios per edge.")
@click.option("--gen-seed", type=int, default=None, help="Overrides the seed recorded in the manifest.")
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="Where scenario CSVs go (default: the run directory).")
@handles_errors
def generate_cmd(manifest, count, gen_seed, out_dir):
    """Sample scenarios from a trained run, one CSV per edge in original units."""
    if count < 0:
        raise ConfigError(f"--count must be >= 0, got {count}")
    agents, server, meta = load_split_run(manifest)
    seed = meta["gen_seed"] if gen_seed is None else gen_seed
    parts = generate_scenarios(agents, server, count, RngStream(seed, STREAM_GENERATE).fork(0))
    repo = RunRepository(out_dir or RunRepository.from_manifest_path(manifest).run_dir)
    paths = [repo.write_scenarios(agent.rank, part, agent.feature_names) for agent, part in zip(agents, parts)]
    logger.info("generate done count=%s files=%s gen_seed=%s", count, len(paths), seed)
    click.echo(f"wrote {count} scenarios to {len(paths)} files in {repo.run_dir}")
