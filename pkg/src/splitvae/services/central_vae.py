import logging
import math

import numpy as np

from splitvae.core import (
    LatentStats,
    LossReport,
    MlpStack,
    RngStream,
    bc_loss,
    bc_loss_grad,
    kl_loss,
    kl_loss_grad,
    reparametrize,
    reparametrize_backward,
    sgd_step,
    stack_backward,
    stack_forward,
)
from splitvae.core.losses import head_grad
from splitvae.core.numerics import STREAM_CENTRAL, as_tensor
from splitvae.errors import DimensionError, ModelStateError, NumericError
from splitvae.services.datasets import shuffle_rows
from splitvae.services.trainer import batch_plan
from splitvae.settings import TrainConfig

logger = logging.getLogger(__name__)


class CentralVae:
    """Single VAE over the full concatenated data; the centralized baseline."""

    def __init__(self, encoder: MlpStack, decoder: MlpStack, latent_dim: int, kl_form: str = "standard", seed: int = 0):
        if encoder.n_in != decoder.n_out:
            raise DimensionError(f"central vae: encoder in {encoder.n_in} != decoder out {decoder.n_out}")
        if encoder.n_out != 2 * latent_dim or decoder.n_in != latent_dim:
            raise DimensionError(f"central vae: head {encoder.n_out}, decoder in {decoder.n_in}, s={latent_dim}")
        self.encoder = encoder
        self.decoder = decoder
        self.latent_dim = latent_dim
        self.kl_form = kl_form
        self.rng = RngStream(seed, STREAM_CENTRAL)
        self.trained = False
        self._frozen_eps: np.ndarray | None = None

    @classmethod
    def build(cls, d: int, cfg: TrainConfig) -> "CentralVae":
        rng = RngStream(cfg.seed, STREAM_CENTRAL)
        s = cfg.latent_dim
        encoder = MlpStack.build([d, *cfg.server_hidden, 2 * s], rng, output_activation="identity")
        decoder = MlpStack.build([s, *reversed(cfg.server_hidden), d], rng)
        return cls(encoder, decoder, s, kl_form=cfg.kl_form, seed=cfg.seed)

    @property
    def width(self) -> int:
        return self.encoder.n_in

    def freeze_noise(self, epsilon: np.ndarray | None) -> None:
        self._frozen_eps = None if epsilon is None else as_tensor(epsilon, 2)

    def step(self, y: np.ndarray, lr_enc: float, lr_dec: float, epoch: int = 0, batch_index: int = 0) -> LossReport:
        """One SGD step on a batch; returns the batch losses before the update."""
        head = stack_forward(self.encoder, y)
        stats = LatentStats.from_head(head, self.latent_dim)
        eps = self._frozen_eps
        if eps is None:
            eps = self.rng.fork(epoch, batch_index).standard_normal(stats.mu_hat.shape)
        z = reparametrize(stats, epsilon=eps)
        y_tilde = stack_forward(self.decoder, z)
        report = LossReport(bc_loss=bc_loss(y_tilde, y), kl_loss=kl_loss(stats, self.kl_form))

        dz, g_theta = stack_backward(self.decoder, bc_loss_grad(y_tilde, y))
        dmu_bc, dls_bc = reparametrize_backward(stats, dz)
        dmu_kl, dls_kl = kl_loss_grad(stats, self.kl_form)
        _, g_phi = stack_backward(self.encoder, head_grad(stats, head, dmu_bc + dmu_kl, dls_bc + dls_kl))

        sgd_step(self.decoder.parameters(), g_theta, lr_dec)
        sgd_step(self.encoder.parameters(), g_phi, lr_enc)
        return report


def central_vae_train(data, cfg: TrainConfig, model: CentralVae | None = None) -> tuple[CentralVae, list[LossReport]]:
    data = as_tensor(data, 2)
    model = model or CentralVae.build(data.shape[1], cfg)
    if model.width != data.shape[1]:
        raise DimensionError(f"central vae width {model.width} != data width {data.shape[1]}")
    rows = shuffle_rows(data, cfg.seed)
    plan = batch_plan(rows.shape[0], cfg.batch_size)
    losses: list[LossReport] = []
    for epoch in range(cfg.epochs):
        bc = kl = 0.0
        for b in range(len(plan)):
            batch = rows[b * cfg.batch_size : b * cfg.batch_size + plan[b]]
            report = model.step(batch, cfg.lr_server_enc, cfg.lr_server_dec, epoch, b)
            bc += report.bc_loss
            kl += report.kl_loss
        report = LossReport(bc_loss=bc / len(plan), kl_loss=kl / len(plan))
        if not math.isfinite(report.total):
            raise NumericError(f"central vae: non-finite loss at epoch {epoch}")
        losses.append(report)
        logger.debug("central_vae epoch=%s bc=%.6f kl=%.6f", epoch, report.bc_loss, report.kl_loss)
    model.trained = True
    if losses:
        logger.info("central_vae trained epochs=%s final_total=%.6f", cfg.epochs, losses[-1].total)
    return model, losses


def central_vae_generate(model: CentralVae, count: int, rng: RngStream) -> np.ndarray:
    if not model.trained:
        raise ModelStateError("central vae has no trained parameters")
    if count == 0:
        return np.empty((0, model.width))
    z = rng.standard_normal((count, model.latent_dim))
    return np.clip(stack_forward(model.decoder, z), 0.0, 1.0)
