import logging
from pathlib import Path
from typing import Callable

import numpy as np

from splitvae.core import RngStream
from splitvae.core.numerics import STREAM_CENTRAL, STREAM_COPULA, as_tensor
from splitvae.errors import DataError, MissingArtifactError, ReportError
from splitvae.repositories import CheckpointRepository, RunRepository
from splitvae.repositories.runs import DECOMPOSITION_COLUMNS, PAYLOAD_COLUMNS, SWEEP_COLUMNS
from splitvae.services.central_vae import central_vae_generate, central_vae_train
from splitvae.services.copula import copula_fit, copula_sample
from splitvae.services.metrics import METRIC_NAMES, MetricReport, diagnostic_series, evaluate_once
from splitvae.services.pipeline import DataBundle, split_sampler, train_split
from splitvae.settings import Settings, TrainConfig
from splitvae.transport import analytic_epoch_bytes
from splitvae.utils import parse_silo_spec

logger = logging.getLogger(__name__)

METHODS = ("splitvae", "central_vae", "copula")
Sampler = Callable[[int, int], np.ndarray]


def evaluate_runs(observed, sampler: Sampler, runs: int, fid_form: str = "standard") -> MetricReport:
    """Metrics over ``runs`` independent generations of ``len(observed)`` scenarios each."""
    observed = as_tensor(observed, 2)
    results = []
    for r in range(runs):
        generated = sampler(r, observed.shape[0])
        if generated.shape[1] != observed.shape[1]:
            raise DataError(f"generated width {generated.shape[1]} != observed width {observed.shape[1]}")
        results.append(evaluate_once(observed, generated, fid_form=fid_form))
    report = MetricReport.from_runs(results)
    logger.info(
        "evaluate done runs=%s fid=%.6f es=%.6f rmse=%.6f crps=%.6f",
        runs,
        report.fid[0],
        report.es[0],
        report.rmse[0],
        report.crps[0],
    )
    return report


def evaluate_static(observed, generated, fid_form: str = "standard") -> MetricReport:
    observed = as_tensor(observed, 2)
    generated = as_tensor(generated, 2)
    if observed.shape[1] != generated.shape[1]:
        raise DataError(f"generated width {generated.shape[1]} != observed width {observed.shape[1]}")
    return MetricReport.from_runs([evaluate_once(observed, generated, fid_form=fid_form)])


def run_compare(bundle: DataBundle, cfg: TrainConfig, settings: Settings, out_dir: Path) -> dict[str, MetricReport]:
    """Trains SplitVAE and Central-VAE and fits the copula on the same rows; one report per method."""
    runs = RunRepository(out_dir)
    ckpts = CheckpointRepository(out_dir)
    agents, server, result = train_split(bundle, cfg, settings)
    runs.write_losses(result.losses, name="splitvae_losses.csv")

    central, central_losses = central_vae_train(bundle.train, cfg)
    runs.write_losses(central_losses, name="central_vae_losses.csv")

    copula = copula_fit(bundle.train)
    ckpts.save_copula(copula)

    central_rng = RngStream(cfg.gen_seed, STREAM_CENTRAL)
    copula_rng = RngStream(cfg.gen_seed, STREAM_COPULA)
    samplers: dict[str, Sampler] = {
        "splitvae": split_sampler(agents, server, cfg.gen_seed),
        "central_vae": lambda r, k: central_vae_generate(central, k, central_rng.fork(r)),
        "copula": lambda r, k: copula_sample(copula, k, copula_rng.fork(r)),
    }
    observed = bundle.observed
    reports: dict[str, MetricReport] = {}
    rows = []
    for method in METHODS:
        logger.info("compare evaluating method=%s", method)
        reports[method] = evaluate_runs(observed, samplers[method], cfg.runs, fid_form=cfg.fid_form)
        rows.extend(reports[method].rows(method))
        if bundle.layout:
            nodes, steps = bundle.layout
            diag = diagnostic_series(samplers[method](0, observed.shape[0]), nodes, steps)
            runs.write_diagnostics(method, diag.centroid, diag.autocorr)
    if bundle.layout:
        nodes, steps = bundle.layout
        diag = diagnostic_series(observed, nodes, steps)
        runs.write_diagnostics("observed", diag.centroid, diag.autocorr)
    runs.write_metrics(rows)
    logger.info("compare done methods=%s runs=%s out=%s", len(METHODS), cfg.runs, out_dir)
    return reports


def _sweep_rows(axis: str, value, report: MetricReport) -> list[dict]:
    return [
        {
            "axis": axis,
            "value": value,
            "metric": name,
            "mean": getattr(report, name)[0],
            "std": getattr(report, name)[1],
            "runs": report.runs,
        }
        for name in METRIC_NAMES
    ]


def parse_decompositions(value: str) -> list[str]:
    specs = [s.strip() for s in value.split(";") if s.strip()]
    for spec in specs:
        parse_silo_spec(spec)
    return specs


def run_sweep(
    bundle: DataBundle,
    cfg: TrainConfig,
    settings: Settings,
    out_dir: Path,
    latent_dims: list[int] = (),
    embed_dims: list[int] = (),
    decompositions: list[str] = (),
) -> dict[str, Path]:
    """Architecture sweep over latent and edge output widths, plus the silo decomposition study."""
    runs = RunRepository(out_dir)
    written: dict[str, Path] = {}
    metric_rows = []
    axes = [("latent_dim", s, {"latent_dim": s}) for s in latent_dims]
    axes += [("embed_dim", e, {"embed_dim": e}) for e in embed_dims]
    for axis, value, override in axes:
        run_cfg = cfg.with_overrides(**override)
        agents, server, _ = train_split(bundle, run_cfg, settings)
        report = evaluate_runs(
            bundle.observed, split_sampler(agents, server, run_cfg.gen_seed), run_cfg.runs, run_cfg.fid_form
        )
        metric_rows.extend(_sweep_rows(axis, value, report))
        logger.info("sweep point done axis=%s value=%s", axis, value)
    if axes:
        written["sweep"] = runs.write_rows("sweep_metrics.csv", metric_rows, SWEEP_COLUMNS)

    loss_rows = []
    for spec in decompositions:
        run_cfg = cfg.with_overrides(silos=spec)
        _, _, result = train_split(bundle.with_silos(spec), run_cfg, settings)
        loss_rows.extend(
            {"decomposition": spec, "epoch": e, "bc_loss": r.bc_loss, "kl_loss": r.kl_loss, "total": r.total}
            for e, r in enumerate(result.losses)
        )
        logger.info("decomposition done spec=%s epochs=%s", spec, len(result.losses))
    if decompositions:
        written["decompositions"] = runs.write_rows("decomposition_losses.csv", loss_rows, DECOMPOSITION_COLUMNS)
    return written


def _embed_label(dims: list[int]) -> str:
    return str(dims[0]) if len(set(dims)) == 1 else ",".join(str(d) for d in dims)


def payload_rows(run_dirs: list[Path], embed_dims: list[int] = ()) -> list[dict]:
    """Measured rows from each run's ledger, plus analytic rows for ``embed_dims`` on the first run's batch plan."""
    rows = []
    first = None
    for run_dir in run_dirs:
        runs = RunRepository.from_manifest_path(run_dir)
        manifest = runs.read_manifest()
        try:
            ledger = runs.read_rows("ledger.csv")
        except MissingArtifactError:
            raise MissingArtifactError(f"ledger missing for run {runs.run_dir}") from None
        if ledger.empty:
            raise ReportError(f"run {runs.run_dir} has no completed epochs to report")
        last_epoch = ledger["epoch"].max()
        epoch_bytes = int(ledger.loc[ledger["epoch"] == last_epoch, "bytes"].sum())
        raw = int(manifest["ledger"]["raw_bytes"])
        dims = [s["embed_dim"] for s in manifest["silos"]]
        rows.append(
            {
                "source": "measured",
                "run": str(runs.run_dir),
                "embed_dim": _embed_label(dims),
                "epoch_bytes": epoch_bytes,
                "raw_bytes": raw,
                "reduction_factor": raw / epoch_bytes,
            }
        )
        first = first or manifest
    if embed_dims and first is None:
        raise ReportError("analytic rows need at least one run for the batch plan")
    for e in embed_dims:
        n_edges = len(first["silos"])
        epoch_bytes = analytic_epoch_bytes(first["batch_sizes"], [e] * n_edges)
        raw = int(first["ledger"]["raw_bytes"])
        rows.append(
            {
                "source": "analytic",
                "run": "",
                "embed_dim": str(e),
                "epoch_bytes": epoch_bytes,
                "raw_bytes": raw,
                "reduction_factor": raw / epoch_bytes,
            }
        )
    return rows


def write_payload_report(out_dir: Path, rows: list[dict]) -> Path:
    return RunRepository(out_dir).write_rows("payload_report.csv", rows, PAYLOAD_COLUMNS)
