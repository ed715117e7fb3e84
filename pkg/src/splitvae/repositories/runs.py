import json
import logging
import threading
from pathlib import Path

import numpy as np
import pandas as pd

from splitvae.errors import MissingArtifactError
from splitvae.services.datasets import CSV_FLOAT_FORMAT, write_csv

logger = logging.getLogger(__name__)

MANIFEST_NAME = "run.json"
LOSS_COLUMNS = ["epoch", "bc_loss", "kl_loss", "total"]
LEDGER_COLUMNS = ["epoch", "phase", "bytes", "cumulative_bytes"]
EDGE_LOSS_COLUMNS = ["epoch", "rank", "bc_loss"]
METRIC_COLUMNS = ["method", "metric", "mean", "std", "runs"]
PAYLOAD_COLUMNS = ["source", "run", "embed_dim", "epoch_bytes", "raw_bytes", "reduction_factor"]
SWEEP_COLUMNS = ["axis", "value", "metric", "mean", "std", "runs"]
DECOMPOSITION_COLUMNS = ["decomposition", "epoch", "bc_loss", "kl_loss", "total"]

_init_lock = threading.Lock()
_initialized_dirs: set[str] = set()


def init_run_dir(run_dir: Path) -> Path:
    key = str(Path(run_dir).resolve())
    if key in _initialized_dirs:
        return Path(run_dir)
    with _init_lock:
        if key not in _initialized_dirs:
            Path(run_dir).mkdir(parents=True, exist_ok=True)
            _initialized_dirs.add(key)
    return Path(run_dir)


class RunRepository:
    """Everything one run writes: manifest plus CSV artefacts."""

    def __init__(self, run_dir: Path):
        self.run_dir = Path(run_dir)

    @classmethod
    def from_manifest_path(cls, path: Path) -> "RunRepository":
        path = Path(path)
        return cls(path if path.is_dir() else path.parent)

    @property
    def manifest_path(self) -> Path:
        return self.run_dir / MANIFEST_NAME

    def path(self, name: str) -> Path:
        return self.run_dir / name

    def write_manifest(self, manifest: dict) -> Path:
        init_run_dir(self.run_dir)
        self.manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
        logger.info("manifest written path=%s", self.manifest_path)
        return self.manifest_path

    def read_manifest(self) -> dict:
        if not self.manifest_path.exists():
            raise MissingArtifactError(f"run manifest not found: {self.manifest_path}")
        return json.loads(self.manifest_path.read_text(encoding="utf-8"))

    def write_rows(self, name: str, rows: list[dict], columns: list[str]) -> Path:
        init_run_dir(self.run_dir)
        path = self.path(name)
        pd.DataFrame(rows, columns=columns).to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
        logger.info("csv written path=%s rows=%s", path, len(rows))
        return path

    def read_rows(self, name: str) -> pd.DataFrame:
        path = self.path(name)
        if not path.exists():
            raise MissingArtifactError(f"artefact not found: {path}")
        return pd.read_csv(path)

    def write_losses(self, losses, name: str = "losses.csv") -> Path:
        rows = [
            {"epoch": e, "bc_loss": r.bc_loss, "kl_loss": r.kl_loss, "total": r.total}
            for e, r in enumerate(losses)
        ]
        return self.write_rows(name, rows, LOSS_COLUMNS)

    def write_ledger(self, ledger_rows: list[dict]) -> Path:
        return self.write_rows("ledger.csv", ledger_rows, LEDGER_COLUMNS)

    def write_edge_losses(self, rows: list[dict]) -> Path:
        return self.write_rows("edge_losses.csv", rows, EDGE_LOSS_COLUMNS)

    def write_metrics(self, rows: list[dict], name: str = "metrics.csv") -> Path:
        return self.write_rows(name, rows, METRIC_COLUMNS)

    def write_scenarios(self, rank: int, data: np.ndarray, names: list[str]) -> Path:
        init_run_dir(self.run_dir)
        return write_csv(self.path(f"scenarios_rank{rank}.csv"), data, names)

    def write_diagnostics(self, method: str, centroid: np.ndarray, autocorr: np.ndarray) -> list[Path]:
        centroid_rows = [{"t": t, "value": float(v)} for t, v in enumerate(centroid)]
        autocorr_rows = [{"lag": lag, "value": float(v)} for lag, v in enumerate(autocorr)]
        return [
            self.write_rows(f"centroid_{method}.csv", centroid_rows, ["t", "value"]),
            self.write_rows(f"autocorr_{method}.csv", autocorr_rows, ["lag", "value"]),
        ]
