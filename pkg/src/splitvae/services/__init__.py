from .central_vae import CentralVae, central_vae_generate, central_vae_train
from .copula import CopulaModel, copula_fit, copula_sample
from .edge_agent import EdgeAgent
from .server_agent import ServerAgent
from .trainer import SplitTrainer, TrainResult, generate_scenarios, train

__all__ = [
    "CentralVae",
    "CopulaModel",
    "EdgeAgent",
    "ServerAgent",
    "SplitTrainer",
    "TrainResult",
    "central_vae_generate",
    "central_vae_train",
    "copula_fit",
    "copula_sample",
    "generate_scenarios",
    "train",
]
