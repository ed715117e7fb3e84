import logging
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from splitvae.core import RngStream
from splitvae.core.numerics import STREAM_GENERATE
from splitvae.errors import ConfigError, DataError
from splitvae.repositories import CheckpointRepository, RunRepository
from splitvae.services.datasets import (
    NormStats,
    SiloMap,
    load_csv,
    normalize,
    partition_silos,
    shuffle_rows,
    split_rows,
    synth_feature_names,
    synth_generate,
)
from splitvae.services.edge_agent import EdgeAgent
from splitvae.services.server_agent import ServerAgent
from splitvae.services.trainer import TrainResult, generate_scenarios, train
from splitvae.settings import Settings, TrainConfig
from splitvae.transport import ledger_report

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DataBundle:
    """Normalized train/held-out partitions plus everything needed to undo the normalization."""

    train: np.ndarray
    held_out: np.ndarray
    names: list[str]
    norm_stats: NormStats
    silo_map: SiloMap
    layout: tuple[int, int] | None
    source: str

    @property
    def width(self) -> int:
        return self.train.shape[1]

    @property
    def observed(self) -> np.ndarray:
        """Rows metrics compare against: the held-out part, or the training part when nothing was held out."""
        return self.held_out if self.held_out.shape[0] >= 2 else self.train

    def with_silos(self, spec) -> "DataBundle":
        return replace(self, silo_map=partition_silos(self.width, spec))


def _layout_for(width: int, series_length: int | None) -> tuple[int, int] | None:
    if series_length is None:
        return None
    if width % series_length:
        raise ConfigError(f"--series-length {series_length} does not divide {width} features")
    return width // series_length, series_length


def load_dataset(cfg: TrainConfig) -> DataBundle:
    if cfg.data:
        if not Path(cfg.data).is_file():
            raise DataError(f"--data: file not found: {cfg.data}")
        raw, names = load_csv(Path(cfg.data))
        layout = _layout_for(raw.shape[1], cfg.series_length)
        source = str(cfg.data)
    else:
        raw, _ = synth_generate(
            nodes=cfg.synth_nodes,
            steps=cfg.synth_steps,
            seed=cfg.seed,
            correlation=cfg.synth_correlation,
            samples=cfg.synth_samples,
            temporal_correlation=cfg.synth_temporal_correlation,
            noise_scale=cfg.synth_noise,
        )
        names = synth_feature_names(cfg.synth_nodes, cfg.synth_steps)
        layout = (cfg.synth_nodes, cfg.synth_steps)
        source = "synthetic"
    train_raw, held_raw = split_rows(shuffle_rows(raw, cfg.seed), cfg.train_frac)
    train_rows, stats = normalize(train_raw)
    if held_raw.shape[0]:
        held_rows, _ = normalize(held_raw, stats)
    else:
        held_rows = np.empty((0, raw.shape[1]))
    bundle = DataBundle(
        train=train_rows,
        held_out=held_rows,
        names=names,
        norm_stats=stats,
        silo_map=partition_silos(raw.shape[1], cfg.silos),
        layout=layout,
        source=source,
    )
    logger.info(
        "dataset ready source=%s train_rows=%s held_out_rows=%s silos=%s",
        source,
        train_rows.shape[0],
        held_rows.shape[0],
        bundle.silo_map.dims,
    )
    return bundle


def build_split_model(bundle: DataBundle, cfg: TrainConfig) -> tuple[list[EdgeAgent], ServerAgent]:
    silo_map = bundle.silo_map
    embeds = cfg.embed_dims_for(silo_map.n_edges)
    silos = silo_map.split(bundle.train)
    names = silo_map.split_names(bundle.names)
    agents = [
        EdgeAgent.build(
            rank,
            silo,
            cfg,
            embeds[rank - 1],
            norm_stats=bundle.norm_stats.subset(s),
            feature_names=silo_names,
        )
        for rank, (silo, s, silo_names) in enumerate(zip(silos, silo_map.slices(), names), start=1)
    ]
    server = ServerAgent.build({a.rank: a.embed_dim for a in agents}, cfg)
    return agents, server


def train_split(
    bundle: DataBundle, cfg: TrainConfig, settings: Settings
) -> tuple[list[EdgeAgent], ServerAgent, TrainResult]:
    agents, server = build_split_model(bundle, cfg)
    result = train(agents, server, cfg, threaded=settings.threaded, timeout=settings.collective_timeout)
    return agents, server, result


def save_split_run(
    run_dir: Path,
    bundle: DataBundle,
    cfg: TrainConfig,
    agents: list[EdgeAgent],
    server: ServerAgent,
    result: TrainResult,
    started_at: datetime,
) -> dict:
    runs = RunRepository(run_dir)
    ckpts = CheckpointRepository(run_dir)
    config_hash = cfg.config_hash()
    paths = {str(a.rank): ckpts.save_edge(a, config_hash).name for a in agents}
    paths["server"] = ckpts.save_server(server, config_hash).name
    runs.write_losses(result.losses)
    runs.write_ledger(result.ledger.rows())
    runs.write_edge_losses(result.edge_losses)

    ledger = {"total_bytes": result.ledger.total, "raw_bytes": result.ledger.raw_bytes, "epoch_bytes": 0}
    ledger["phase_bytes"] = result.ledger.phase_totals()
    ledger["reduction_factor"] = None
    if result.ledger.completed_epochs:
        report = ledger_report(result.ledger)
        ledger["epoch_bytes"] = report.epoch_bytes
        ledger["reduction_factor"] = report.reduction_factor

    manifest = {
        "config": cfg.to_dict(),
        "config_hash": config_hash,
        "seed": cfg.seed,
        "gen_seed": cfg.gen_seed,
        "data_source": bundle.source,
        "train_frac": cfg.train_frac,
        "train_rows": int(bundle.train.shape[0]),
        "held_out_rows": int(bundle.held_out.shape[0]),
        "layout": list(bundle.layout) if bundle.layout else None,
        "silos": [
            {
                "rank": a.rank,
                "width": a.width,
                "embed_dim": a.embed_dim,
                "feature_names": a.feature_names,
                "norm_stats": a.norm_stats.to_dict(),
            }
            for a in agents
        ],
        "latent_dim": server.latent_dim,
        "batch_sizes": result.batch_sizes,
        "checkpoints": paths,
        "ledger": ledger,
        "epochs_completed": len(result.losses),
        "started_at": started_at.isoformat(),
        "finished_at": datetime.now(timezone.utc).isoformat(),
        "train_seconds": result.seconds,
    }
    runs.write_manifest(manifest)
    return manifest


def load_split_run(run_dir: Path) -> tuple[list[EdgeAgent], ServerAgent, dict]:
    """Rebuilds trained agents from a run directory (or its manifest path)."""
    runs = RunRepository.from_manifest_path(run_dir)
    manifest = runs.read_manifest()
    ckpts = CheckpointRepository(runs.run_dir)
    cfg = TrainConfig.from_dict(manifest["config"])
    config_hash = manifest["config_hash"]
    agents = []
    for silo in manifest["silos"]:
        encoder, decoder, _ = ckpts.load_edge(silo["rank"], config_hash)
        agent = EdgeAgent(
            rank=silo["rank"],
            silo=np.empty((0, silo["width"])),
            encoder=encoder,
            decoder=decoder,
            lr_enc=cfg.lr_edge_enc,
            lr_dec=cfg.lr_edge_dec,
            norm_stats=NormStats.from_dict(silo["norm_stats"]),
            feature_names=silo["feature_names"],
        )
        agent.trained = True
        agents.append(agent)
    encoder, decoder, meta = ckpts.load_server(config_hash)
    server = ServerAgent(
        encoder=encoder,
        decoder=decoder,
        latent_dim=meta["latent_dim"],
        dims=meta["dims"],
        lr_enc=cfg.lr_server_enc,
        lr_dec=cfg.lr_server_dec,
        kl_form=meta["kl_form"],
        seed=cfg.seed,
    )
    server.trained = True
    logger.info("run loaded path=%s edges=%s", runs.run_dir, len(agents))
    return agents, server, manifest


def split_sampler(agents: list[EdgeAgent], server: ServerAgent, gen_seed: int, original_units: bool = False):
    """``sampler(run_index, count)`` returning full-width scenarios for one generation run."""
    base = RngStream(gen_seed, STREAM_GENERATE)

    def sample(run_index: int, count: int) -> np.ndarray:
        parts = generate_scenarios(agents, server, count, base.fork(run_index), original_units=original_units)
        return np.hstack(parts)

    return sample


def normalize_observed(observed: np.ndarray, agents: list[EdgeAgent]) -> np.ndarray:
    mins = np.concatenate([a.norm_stats.mins for a in agents])
    maxs = np.concatenate([a.norm_stats.maxs for a in agents])
    if observed.shape[1] != mins.shape[0]:
        raise DataError(f"observed data has {observed.shape[1]} features, the run was trained on {mins.shape[0]}")
    out, _ = normalize(observed, NormStats(mins=mins, maxs=maxs), clip=False)
    return out
