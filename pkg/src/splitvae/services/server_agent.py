import numpy as np

from splitvae.core import (
    LatentStats,
    MlpStack,
    RngStream,
    kl_loss,
    kl_loss_grad,
    reparametrize,
    reparametrize_backward,
    sgd_step,
    stack_backward,
    stack_forward,
)
from splitvae.core.losses import head_grad
from splitvae.core.numerics import ensure_finite
from splitvae.errors import DimensionError, ModelStateError, ProtocolError, ProtocolOrderError
from splitvae.settings import TrainConfig
from splitvae.transport import (
    DEC_BP_GATHER,
    DEC_FP_SCATTER,
    ENC_BP_SCATTER,
    ENC_FP_GATHER,
    ROOT_RANK,
    InProcessBus,
    tensor_concat,
    tensor_split,
)


class ServerAgent:
    """Root-side VAE over the concatenated edge embeddings."""

    def __init__(
        self,
        encoder: MlpStack,
        decoder: MlpStack,
        latent_dim: int,
        dims: dict[int, int],
        lr_enc: float,
        lr_dec: float,
        kl_form: str = "standard",
        seed: int = 0,
    ):
        total = sum(dims.values())
        if encoder.n_in != total or decoder.n_out != total:
            raise DimensionError(
                f"server widths: encoder in {encoder.n_in}, decoder out {decoder.n_out}, embeddings {total}"
            )
        if encoder.n_out != 2 * latent_dim or decoder.n_in != latent_dim:
            raise DimensionError(
                f"server latent: encoder head {encoder.n_out}, decoder in {decoder.n_in}, latent_dim {latent_dim}"
            )
        self.rank = ROOT_RANK
        self.encoder = encoder
        self.decoder = decoder
        self.latent_dim = latent_dim
        self.dims = dict(sorted(dims.items()))
        self.lr_enc = lr_enc
        self.lr_dec = lr_dec
        self.kl_form = kl_form
        self.rng = RngStream(seed, ROOT_RANK)
        self.trained = False
        self.stats: LatentStats | None = None
        self._raw_head: np.ndarray | None = None
        self._frozen_eps: np.ndarray | None = None
        self.last_kl: float | None = None

    @classmethod
    def build(cls, dims: dict[int, int], cfg: TrainConfig, zero_head: bool = False) -> "ServerAgent":
        rng = RngStream(cfg.seed, ROOT_RANK)
        total = sum(dims.values())
        s = cfg.latent_dim
        encoder = MlpStack.build(
            [total, *cfg.server_hidden, 2 * s], rng, output_activation="identity", zero_output=zero_head
        )
        decoder = MlpStack.build([s, *reversed(cfg.server_hidden), total], rng)
        return cls(
            encoder=encoder,
            decoder=decoder,
            latent_dim=s,
            dims=dims,
            lr_enc=cfg.lr_server_enc,
            lr_dec=cfg.lr_server_dec,
            kl_form=cfg.kl_form,
            seed=cfg.seed,
        )

    @property
    def dim_list(self) -> list[int]:
        return list(self.dims.values())

    def freeze_noise(self, epsilon: np.ndarray | None) -> None:
        """Fixes eps for every batch (gradient checks); ``None`` restores sampling."""
        self._frozen_eps = None if epsilon is None else np.asarray(epsilon, dtype=np.float64)

    def _noise(self, epoch: int, batch_index: int, shape: tuple[int, int]) -> np.ndarray:
        if self._frozen_eps is not None:
            return self._frozen_eps
        return self.rng.fork(epoch, batch_index).standard_normal(shape)

    def vae_server_fp(self, bus: InProcessBus, epoch: int, batch_index: int) -> float:
        parts = bus.gather(self.rank, ENC_FP_GATHER)
        widths = [p.shape[1] for p in parts]
        if widths != self.dim_list:
            raise ProtocolError(f"gathered embedding widths {widths} do not match dims map {self.dim_list}")
        x = ensure_finite(tensor_concat(parts), "gathered embeddings")
        head = stack_forward(self.encoder, x)
        stats = LatentStats.from_head(head, self.latent_dim)
        z = reparametrize(stats, epsilon=self._noise(epoch, batch_index, stats.mu_hat.shape))
        x_tilde = stack_forward(self.decoder, z)
        bus.scatter(self.rank, DEC_FP_SCATTER, tensor_split(x_tilde, self.dim_list))
        self.stats, self._raw_head = stats, head
        self.last_kl = kl_loss(stats, self.kl_form)
        return self.last_kl

    def vae_server_bp(self, bus: InProcessBus) -> np.ndarray:
        if self.stats is None:
            raise ProtocolOrderError("vae_server_bp called before vae_server_fp")
        stats, raw = self.stats, self._raw_head
        dx_tilde = tensor_concat(bus.gather(self.rank, DEC_BP_GATHER))

        # reconstruction prong: decoder -> reparametrization -> encoder
        dz, g_theta = stack_backward(self.decoder, dx_tilde)
        dmu_bc, dls_bc = reparametrize_backward(stats, dz)
        dx_bc, g_phi_bc = stack_backward(self.encoder, head_grad(stats, raw, dmu_bc, dls_bc), retain=True)

        # KL prong: straight into the encoder head
        dmu_kl, dls_kl = kl_loss_grad(stats, self.kl_form)
        dx_kl, g_phi_kl = stack_backward(self.encoder, head_grad(stats, raw, dmu_kl, dls_kl))

        sgd_step(self.decoder.parameters(), g_theta, self.lr_dec)
        sgd_step(self.encoder.parameters(), [a + b for a, b in zip(g_phi_bc, g_phi_kl)], self.lr_enc)

        dx = dx_kl + dx_bc
        bus.scatter(self.rank, ENC_BP_SCATTER, tensor_split(dx, self.dim_list))
        self.stats = self._raw_head = None
        return dx

    def decode_latent(self, z: np.ndarray) -> list[np.ndarray]:
        if not self.trained:
            raise ModelStateError("server has no trained or loaded parameters")
        return tensor_split(stack_forward(self.decoder, z), self.dim_list)
