import functools
import logging
from pathlib import Path

import click

from splitvae.errors import SplitVaeError
from splitvae.settings import FID_FORMS, KL_FORMS, Settings, TrainConfig
from splitvae.utils import parse_embed_dim

logger = logging.getLogger(__name__)


def settings_from(ctx: click.Context) -> Settings:
    return ctx.find_root().obj


def handles_errors(func):
    """Turns library errors into a one-line message and the error's exit code."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except SplitVaeError as exc:
            logger.error("command failed error=%s: %s", type(exc).__name__, exc)
            click.echo(f"error: {exc}", err=True)
            raise SystemExit(exc.exit_code) from exc

    return wrapper


def _embed_dim(ctx, param, value):
    if value is None:
        return None
    try:
        return parse_embed_dim(value)
    except SplitVaeError as exc:
        raise click.BadParameter(str(exc)) from None


CONFIG_OPTIONS = [
    click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path), default=None,
                 help="JSON run config; flags override it."),
    click.option("--data", default=None, help="Numeric CSV with a header row; synthetic data when omitted."),
    click.option("--series-length", type=int, default=None, help="Time points per node in --data columns."),
    click.option("--seed", type=int, default=None, help="Training seed."),
    click.option("--gen-seed", type=int, default=None, help="Generation seed."),
    click.option("--epochs", type=int, default=None),
    click.option("--batch-size", type=int, default=None),
    click.option("--latent-dim", type=int, default=None),
    click.option("--embed-dim", default=None, callback=_embed_dim, help="One width, or one per edge: 4,8,8."),
    click.option("--silos", default=None, help="uniform:N or explicit widths such as 4,7,9."),
    click.option("--lr-edge-enc", type=float, default=None),
    click.option("--lr-edge-dec", type=float, default=None),
    click.option("--lr-server-enc", type=float, default=None),
    click.option("--lr-server-dec", type=float, default=None),
    click.option("--kl-form", type=click.Choice(KL_FORMS), default=None),
    click.option("--fid-form", type=click.Choice(FID_FORMS), default=None),
    click.option("--train-frac", type=float, default=None),
    click.option("--runs", type=int, default=None, help="Generation runs per metric estimate."),
]


def config_options(func):
    for option in reversed(CONFIG_OPTIONS):
        func = option(func)
    return func


def out_dir_option(func):
    return click.option(
        "--out-dir", type=click.Path(file_okay=False, path_type=Path), default=None,
        help="Output directory (default: $SPLITVAE_OUT).",
    )(func)


def build_config(config_path: Path | None, **overrides) -> TrainConfig:
    base = TrainConfig.from_file(config_path) if config_path else TrainConfig()
    cfg = base.with_overrides(**overrides)
    logger.info("config ready hash=%s", cfg.config_hash()[:12])
    return cfg


def resolve_out_dir(settings: Settings, out_dir: Path | None) -> Path:
    return Path(out_dir) if out_dir else settings.out_dir
