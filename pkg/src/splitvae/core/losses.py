"""Reconstruction and KL losses, their gradients, and the reparametrization trick.

All losses are means: BC over batch and feature (B*d), KL over batch (B).
"""

from dataclasses import dataclass

import numpy as np

from splitvae.core.numerics import RngStream, as_tensor
from splitvae.errors import ConfigError, DimensionError, ProtocolOrderError

PRED_CLAMP = 1e-7
LOG_SIGMA_MIN = -20.0
LOG_SIGMA_MAX = 20.0
KL_FORMS = ("standard", "printed")


@dataclass
class LatentStats:
    mu_hat: np.ndarray
    log_sigma_hat: np.ndarray
    epsilon: np.ndarray | None = None

    @classmethod
    def from_head(cls, head: np.ndarray, latent_dim: int) -> "LatentStats":
        """Splits a ``B x 2s`` encoder head into (mu, log sigma); log sigma is clamped."""
        head = as_tensor(head, 2)
        if head.shape[1] != 2 * latent_dim:
            raise DimensionError(f"encoder head width {head.shape[1]} != 2*latent_dim {2 * latent_dim}")
        mu = head[:, :latent_dim].copy()
        log_sigma = np.clip(head[:, latent_dim:], LOG_SIGMA_MIN, LOG_SIGMA_MAX)
        return cls(mu_hat=mu, log_sigma_hat=log_sigma)

    @property
    def sigma_hat(self) -> np.ndarray:
        return np.exp(self.log_sigma_hat)

    @property
    def batch(self) -> int:
        return self.mu_hat.shape[0]


def head_grad(stats: LatentStats, raw_head: np.ndarray, dmu: np.ndarray, dlogsigma: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. the raw ``B x 2s`` head, zeroed where log sigma was clamped."""
    s = stats.mu_hat.shape[1]
    raw_log_sigma = raw_head[:, s:]
    inside = (raw_log_sigma >= LOG_SIGMA_MIN) & (raw_log_sigma <= LOG_SIGMA_MAX)
    return np.hstack([dmu, dlogsigma * inside])


@dataclass(frozen=True)
class LossReport:
    bc_loss: float
    kl_loss: float

    @property
    def total(self) -> float:
        return self.bc_loss + self.kl_loss


def _check_pair(pred, target) -> tuple[np.ndarray, np.ndarray]:
    pred = as_tensor(pred, 2)
    target = as_tensor(target, 2)
    if pred.shape != target.shape:
        raise DimensionError(f"pred shape {pred.shape} != target shape {target.shape}")
    return np.clip(pred, PRED_CLAMP, 1.0 - PRED_CLAMP), target


def bc_loss(pred, target) -> float:
    p, t = _check_pair(pred, target)
    terms = t * np.log(p) + (1.0 - t) * np.log(1.0 - p)
    return float(-terms.sum() / p.size)


def bc_loss_grad(pred, target) -> np.ndarray:
    p, t = _check_pair(pred, target)
    return (p - t) / (p * (1.0 - p)) / p.size


def _check_form(form: str) -> None:
    if form not in KL_FORMS:
        raise ConfigError(f"kl_form must be one of {KL_FORMS}, got {form!r}")


def kl_loss(stats: LatentStats, form: str = "standard") -> float:
    _check_form(form)
    mu, log_sigma = stats.mu_hat, stats.log_sigma_hat
    sigma = np.exp(log_sigma)
    last = sigma**2 if form == "standard" else sigma
    per_row = -0.5 * (1.0 + 2.0 * log_sigma - mu**2 - last).sum(axis=1)
    return float(per_row.mean())


def kl_loss_grad(stats: LatentStats, form: str = "standard") -> tuple[np.ndarray, np.ndarray]:
    _check_form(form)
    b = stats.batch
    sigma = stats.sigma_hat
    dmu = stats.mu_hat / b
    if form == "standard":
        dlogsigma = (sigma**2 - 1.0) / b
    else:
        dlogsigma = (0.5 * sigma - 1.0) / b
    return dmu, dlogsigma


def reparametrize(stats: LatentStats, rng: RngStream | None = None, epsilon: np.ndarray | None = None) -> np.ndarray:
    """z = mu + sigma * eps. Draws eps from ``rng`` unless a frozen ``epsilon`` is given."""
    if epsilon is None:
        if rng is None:
            raise ConfigError("reparametrize needs either an rng or a frozen epsilon")
        epsilon = rng.standard_normal(stats.mu_hat.shape)
    epsilon = as_tensor(epsilon, 2)
    if epsilon.shape != stats.mu_hat.shape:
        raise DimensionError(f"epsilon shape {epsilon.shape} != latent shape {stats.mu_hat.shape}")
    stats.epsilon = epsilon
    return stats.mu_hat + stats.sigma_hat * epsilon


def reparametrize_backward(stats: LatentStats, dz) -> tuple[np.ndarray, np.ndarray]:
    if stats.epsilon is None:
        raise ProtocolOrderError("reparametrize_backward called without a cached epsilon")
    dz = as_tensor(dz, 2)
    return dz.copy(), dz * stats.epsilon * stats.sigma_hat
