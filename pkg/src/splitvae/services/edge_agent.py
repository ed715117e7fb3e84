import numpy as np

from splitvae.core import MlpStack, RngStream, bc_loss, bc_loss_grad, sgd_step, stack_backward, stack_forward
from splitvae.core.numerics import as_tensor
from splitvae.errors import DimensionError, ModelStateError, ProtocolOrderError
from splitvae.services.datasets import NormStats, denormalize, shuffle_rows
from splitvae.settings import TrainConfig
from splitvae.transport import DEC_BP_GATHER, DEC_FP_SCATTER, ENC_BP_SCATTER, ENC_FP_GATHER, InProcessBus


class EdgeAgent:
    """One stakeholder silo with its local autoencoder.

    The silo never leaves the agent: only embeddings go up and only
    reconstructed embeddings and errors come back down.
    """

    def __init__(
        self,
        rank: int,
        silo: np.ndarray,
        encoder: MlpStack,
        decoder: MlpStack,
        lr_enc: float,
        lr_dec: float,
        norm_stats: NormStats | None = None,
        feature_names: list[str] | None = None,
    ):
        silo = as_tensor(silo, 2)
        width = silo.shape[1]
        if encoder.n_in != width or decoder.n_out != width:
            raise DimensionError(
                f"rank={rank} silo width {width}, encoder in {encoder.n_in}, decoder out {decoder.n_out}"
            )
        if encoder.n_out != decoder.n_in:
            raise DimensionError(f"rank={rank} encoder out {encoder.n_out} != decoder in {decoder.n_in}")
        self.rank = rank
        self.silo = silo
        self.encoder = encoder
        self.decoder = decoder
        self.lr_enc = lr_enc
        self.lr_dec = lr_dec
        self.norm_stats = norm_stats
        self.feature_names = feature_names or [f"f{i}" for i in range(width)]
        self.trained = False
        self._stage = "idle"
        self._target: np.ndarray | None = None
        self._embedding: np.ndarray | None = None
        self._reconstruction: np.ndarray | None = None
        self.last_loss: float | None = None

    @classmethod
    def build(
        cls,
        rank: int,
        silo: np.ndarray,
        cfg: TrainConfig,
        embed_dim: int,
        norm_stats: NormStats | None = None,
        feature_names: list[str] | None = None,
    ) -> "EdgeAgent":
        silo = as_tensor(silo, 2)
        width = silo.shape[1]
        rng = RngStream(cfg.seed, rank)
        encoder = MlpStack.build([width, *cfg.edge_hidden, embed_dim], rng)
        decoder = MlpStack.build([embed_dim, *reversed(cfg.edge_hidden), width], rng)
        return cls(
            rank=rank,
            silo=shuffle_rows(silo, cfg.seed),
            encoder=encoder,
            decoder=decoder,
            lr_enc=cfg.lr_edge_enc,
            lr_dec=cfg.lr_edge_dec,
            norm_stats=norm_stats,
            feature_names=feature_names,
        )

    @property
    def width(self) -> int:
        return self.silo.shape[1]

    @property
    def n_rows(self) -> int:
        return self.silo.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.encoder.n_out

    def _expect(self, stage: str, op: str) -> None:
        if self._stage != stage:
            raise ProtocolOrderError(f"rank={self.rank} {op} called in stage {self._stage}, expected {stage}")

    def edge_enc_fp(self, bus: InProcessBus, batch_index: int, batch_size: int) -> np.ndarray:
        self._expect("idle", "edge_enc_fp")
        start = batch_index * batch_size
        y = self.silo[start : start + batch_size]
        if y.shape[0] == 0:
            raise DimensionError(f"rank={self.rank} batch {batch_index} is empty")
        x = stack_forward(self.encoder, y)
        self._target, self._embedding = y, x
        bus.send_gather(self.rank, ENC_FP_GATHER, x)
        self._stage = "enc_fp"
        return x

    def edge_dec_fp(self, bus: InProcessBus) -> float:
        self._expect("enc_fp", "edge_dec_fp")
        x_tilde = bus.recv_scatter(self.rank, DEC_FP_SCATTER)
        y_tilde = stack_forward(self.decoder, x_tilde)
        self._reconstruction = y_tilde
        self.last_loss = bc_loss(y_tilde, self._target)
        self._stage = "dec_fp"
        return self.last_loss

    def edge_dec_bp(self, bus: InProcessBus) -> np.ndarray:
        self._expect("dec_fp", "edge_dec_bp")
        grad = bc_loss_grad(self._reconstruction, self._target)
        dx_tilde, grads = stack_backward(self.decoder, grad)
        sgd_step(self.decoder.parameters(), grads, self.lr_dec)
        bus.send_gather(self.rank, DEC_BP_GATHER, dx_tilde)
        self._stage = "dec_bp"
        return dx_tilde

    def edge_enc_bp(self, bus: InProcessBus) -> None:
        self._expect("dec_bp", "edge_enc_bp")
        dx = bus.recv_scatter(self.rank, ENC_BP_SCATTER)
        _, grads = stack_backward(self.encoder, dx)
        sgd_step(self.encoder.parameters(), grads, self.lr_enc)
        self._target = self._embedding = self._reconstruction = None
        self._stage = "idle"

    def decode(self, x_tilde: np.ndarray, original_units: bool = True) -> np.ndarray:
        """Scenarios for this silo from server-provided embeddings."""
        if not self.trained:
            raise ModelStateError(f"rank={self.rank} has no trained or loaded parameters")
        scenarios = np.clip(stack_forward(self.decoder, x_tilde), 0.0, 1.0)
        if original_units and self.norm_stats is not None:
            return denormalize(scenarios, self.norm_stats)
        return scenarios
