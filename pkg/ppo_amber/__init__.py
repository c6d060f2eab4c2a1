"""PPO with adaptive multi-batch experience replay."""

from .models import IterationRecord, TrainConfig
from .trainer import Trainer, evaluate, train

__all__ = ["IterationRecord", "TrainConfig", "Trainer", "evaluate", "train"]
