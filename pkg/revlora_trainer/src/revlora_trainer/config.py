"""Trainer configuration and the dataset-size-dependent evaluation regime."""

from __future__ import annotations

from dataclasses import dataclass

EPOCH_REGIME_MAX_REVIEWS = 80_000


@dataclass(frozen=True)
class TrainerConfig:
    base_model: str = "tiny:64,2"       # "tiny:<hidden>,<layers>" or a HF model id
    lora_rank: int = 64
    lora_alpha: int = 64
    batch_size: int = 64
    lr_non_embedding: float = 1e-5
    lr_embedding: float = 1e-6
    loss: str = "MAE"                    # "MAE" | "MSE"
    seed: int = 0
    max_epochs: int = 100
    max_steps: int = 1_000_000
    # epoch regime (training sets up to the threshold): eval per epoch
    epoch_patience: int = 3
    # step regime (above the threshold): eval every eval_every steps
    eval_every_steps: int = 1_000
    step_patience: int = 3_000
    regime_threshold: int = EPOCH_REGIME_MAX_REVIEWS
    max_seq_len: int = 512

    def __post_init__(self):
        if self.lora_rank <= 0 or self.batch_size <= 0:
            raise ValueError("rank and batch_size must be positive")
        if self.lr_non_embedding <= 0 or self.lr_embedding <= 0:
            raise ValueError("learning rates must be positive")
        if self.loss not in ("MAE", "MSE"):
            raise ValueError("loss must be MAE or MSE")


def regime_for(n_train: int, config: TrainerConfig) -> str:
    """'epoch' for datasets up to the threshold, 'step' above it."""
    return "epoch" if n_train <= config.regime_threshold else "step"
