"""Inference over prompt records and the predictions CSV contract."""

from __future__ import annotations

import csv
from pathlib import Path

import torch

from .config import TrainerConfig
from .data import PromptRecord, collate
from .model import RegressionHeadModel


@torch.no_grad()
def infer(model: RegressionHeadModel, records: list[PromptRecord],
          config: TrainerConfig) -> list[float]:
    """One scalar per record, clamped to [1, 5] for reporting."""
    model.eval()
    out: list[float] = []
    for start in range(0, len(records), config.batch_size):
        chunk = records[start:start + config.batch_size]
        ids, mask, _ = collate(chunk, config.max_seq_len)
        scores = model(ids, mask).clamp(1.0, 5.0)
        out.extend(float(s) for s in scores)
    return out


def write_predictions_csv(records: list[PromptRecord], ratings: list[float],
                          path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user", "item", "rating"])
        for rec, rating in zip(records, ratings):
            w.writerow([rec.user, rec.item, repr(rating)])


def save_checkpoint(model: RegressionHeadModel, config: TrainerConfig,
                    directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    torch.save({"state_dict": model.state_dict(),
                "config": config.__dict__}, directory / "model.pt")


def load_checkpoint(directory: str | Path):
    from .model import build_model

    payload = torch.load(Path(directory) / "model.pt", weights_only=False)
    config = TrainerConfig(**payload["config"])
    model = build_model(config)
    model.load_state_dict(payload["state_dict"])
    return model, config
