from .compare import compare_cmd
from .evaluate import evaluate_cmd
from .generate import generate_cmd
from .payload import payload_cmd
from .sweep import sweep_cmd
from .train import train_cmd

__all__ = ["compare_cmd", "evaluate_cmd", "generate_cmd", "payload_cmd", "sweep_cmd", "train_cmd"]
