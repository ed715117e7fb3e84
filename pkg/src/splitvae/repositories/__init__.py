from .checkpoints import CheckpointRepository
from .runs import RunRepository, init_run_dir

__all__ = ["CheckpointRepository", "RunRepository", "init_run_dir"]
