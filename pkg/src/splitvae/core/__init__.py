from .layers import DenseLayer, MlpStack, stack_backward, stack_forward
from .losses import (
    LatentStats,
    LossReport,
    bc_loss,
    bc_loss_grad,
    kl_loss,
    kl_loss_grad,
    reparametrize,
    reparametrize_backward,
)
from .numerics import RngStream, matmul, mean_and_cov, psd_matrix_sqrt, sample_standard_normal
from .optim import sgd_step

__all__ = [
    "DenseLayer",
    "LatentStats",
    "LossReport",
    "MlpStack",
    "RngStream",
    "bc_loss",
    "bc_loss_grad",
    "kl_loss",
    "kl_loss_grad",
    "matmul",
    "mean_and_cov",
    "psd_matrix_sqrt",
    "reparametrize",
    "reparametrize_backward",
    "sample_standard_normal",
    "sgd_step",
    "stack_backward",
    "stack_forward",
]
