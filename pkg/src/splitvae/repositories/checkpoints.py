import json
from pathlib import Path

import numpy as np

from splitvae.core import DenseLayer, MlpStack
from splitvae.errors import MissingArtifactError, ModelStateError
from splitvae.services.copula import CopulaModel


def _stack_arrays(prefix: str, stack: MlpStack) -> tuple[dict[str, np.ndarray], list[str]]:
    arrays = {}
    for i, layer in enumerate(stack.layers):
        arrays[f"{prefix}_{i}_w"] = layer.weights
        arrays[f"{prefix}_{i}_b"] = layer.biases
    return arrays, [layer.activation for layer in stack.layers]


def _stack_from(archive, prefix: str, activations: list[str]) -> MlpStack:
    return MlpStack(
        [
            DenseLayer(archive[f"{prefix}_{i}_w"], archive[f"{prefix}_{i}_b"], activation)
            for i, activation in enumerate(activations)
        ]
    )


class CheckpointRepository:
    """Parameter files for one run: ``rank{n}.ckpt`` per edge and ``server.ckpt``."""

    def __init__(self, run_dir: Path):
        self.run_dir = Path(run_dir)

    def edge_path(self, rank: int) -> Path:
        return self.run_dir / f"rank{rank}.ckpt"

    @property
    def server_path(self) -> Path:
        return self.run_dir / "server.ckpt"

    @property
    def copula_path(self) -> Path:
        return self.run_dir / "copula.npz"

    def _write(self, path: Path, stacks: dict[str, MlpStack], meta: dict) -> Path:
        arrays: dict[str, np.ndarray] = {}
        meta = dict(meta)
        meta["activations"] = {}
        for name, stack in stacks.items():
            stack_arrays, activations = _stack_arrays(name, stack)
            arrays.update(stack_arrays)
            meta["activations"][name] = activations
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("wb") as fh:
            np.savez(fh, meta=np.array(json.dumps(meta, sort_keys=True)), **arrays)
        return path

    def _read(self, path: Path) -> tuple[dict[str, MlpStack], dict]:
        if not path.exists():
            raise MissingArtifactError(f"checkpoint not found: {path}")
        with path.open("rb") as fh, np.load(fh, allow_pickle=False) as archive:
            meta = json.loads(str(archive["meta"]))
            stacks = {name: _stack_from(archive, name, acts) for name, acts in meta["activations"].items()}
        return stacks, meta

    def save_edge(self, agent, config_hash: str) -> Path:
        meta = {"rank": agent.rank, "width": agent.width, "embed_dim": agent.embed_dim, "config_hash": config_hash}
        return self._write(self.edge_path(agent.rank), {"encoder": agent.encoder, "decoder": agent.decoder}, meta)

    def load_edge(self, rank: int, config_hash: str | None = None) -> tuple[MlpStack, MlpStack, dict]:
        stacks, meta = self._read(self.edge_path(rank))
        self._check_hash(meta, config_hash, self.edge_path(rank))
        return stacks["encoder"], stacks["decoder"], meta

    def save_server(self, server, config_hash: str) -> Path:
        meta = {
            "latent_dim": server.latent_dim,
            "dims": {str(k): v for k, v in server.dims.items()},
            "kl_form": server.kl_form,
            "config_hash": config_hash,
        }
        return self._write(self.server_path, {"encoder": server.encoder, "decoder": server.decoder}, meta)

    def load_server(self, config_hash: str | None = None) -> tuple[MlpStack, MlpStack, dict]:
        stacks, meta = self._read(self.server_path)
        self._check_hash(meta, config_hash, self.server_path)
        meta["dims"] = {int(k): int(v) for k, v in meta["dims"].items()}
        return stacks["encoder"], stacks["decoder"], meta

    @staticmethod
    def _check_hash(meta: dict, expected: str | None, path: Path) -> None:
        if expected is not None and meta.get("config_hash") != expected:
            raise ModelStateError(f"{path} was written for a different config")

    def save_copula(self, model: CopulaModel) -> Path:
        self.copula_path.parent.mkdir(parents=True, exist_ok=True)
        with self.copula_path.open("wb") as fh:
            np.savez(fh, marginals=model.marginals, correlation=model.correlation, degenerate=model.degenerate)
        return self.copula_path

    def load_copula(self) -> CopulaModel:
        if not self.copula_path.exists():
            raise MissingArtifactError(f"copula file not found: {self.copula_path}")
        with np.load(self.copula_path, allow_pickle=False) as archive:
            return CopulaModel(
                marginals=archive["marginals"],
                correlation=archive["correlation"],
                degenerate=archive["degenerate"].astype(bool),
            )
