import logging

import click

from .commands import compare_cmd, evaluate_cmd, generate_cmd, payload_cmd, sweep_cmd, train_cmd
from .settings import Settings


def create_cli() -> click.Group:
    settings = Settings.from_env()

    if not logging.getLogger().handlers:
        logging.basicConfig(
            level=getattr(logging, settings.log_level, logging.INFO),
            format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        )

    @click.group(name="splitvae")
    @click.pass_context
    def cli(ctx: click.Context):
        """Decentralized scenario generation with split variational autoencoders."""
        ctx.obj = settings

    for command in (train_cmd, generate_cmd, evaluate_cmd, compare_cmd, payload_cmd, sweep_cmd):
        cli.add_command(command)
    return cli
