"""Training loop: AdamW with split learning rates, the configured MAE/MSE
loss, and the dataset-size-dependent evaluation and early-stopping regime."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import torch
from torch import nn

from .config import TrainerConfig, regime_for
from .data import PromptRecord, collate
from .model import RegressionHeadModel


class DivergenceError(RuntimeError):
    """Loss became non-finite; carries the step at which it happened."""


def make_loss(kind: str) -> nn.Module:
    return nn.L1Loss() if kind == "MAE" else nn.MSELoss()


@dataclass
class TrainingCurves:
    regime: str = "epoch"
    train_losses: list[float] = field(default_factory=list)   # one per evaluation
    val_losses: list[float] = field(default_factory=list)
    evaluations: int = 0
    best_val: float = float("inf")
    stopped_early: bool = False


def _batches(n: int, batch_size: int, generator: torch.Generator):
    order = torch.randperm(n, generator=generator).tolist()
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


@torch.no_grad()
def evaluate(model: RegressionHeadModel, records: list[PromptRecord],
             config: TrainerConfig, loss_fn: nn.Module) -> float:
    model.eval()
    total, count = 0.0, 0
    for start in range(0, len(records), config.batch_size):
        chunk = records[start:start + config.batch_size]
        ids, mask, targets = collate(chunk, config.max_seq_len)
        out = model(ids, mask)
        total += float(loss_fn(out, targets)) * len(chunk)
        count += len(chunk)
    model.train()
    return total / count


def train(model: RegressionHeadModel, train_records: list[PromptRecord],
          val_records: list[PromptRecord], config: TrainerConfig,
          min_delta: float = 0.0) -> TrainingCurves:
    """Fit in place and restore the best-validation checkpoint before returning.

    Up to the regime threshold the validation set is scored once per epoch
    with an early-stopping patience counted in epochs; above it, every
    ``eval_every_steps`` optimizer steps with patience counted in steps.
    """
    if not train_records or not val_records:
        raise ValueError("training and validation folds must be non-empty")
    curves = TrainingCurves(regime=regime_for(len(train_records), config))
    loss_fn = make_loss(config.loss)
    optimizer = torch.optim.AdamW(model.parameter_groups(config))
    generator = torch.Generator().manual_seed(config.seed)
    best_state = copy.deepcopy(model.state_dict())
    model.train()

    step = 0
    best_step = 0
    bad_evals = 0
    running_loss, running_count = 0.0, 0

    def do_eval() -> bool:
        """Returns True when training should stop."""
        nonlocal bad_evals, best_state, best_step
        val = evaluate(model, val_records, config, loss_fn)
        curves.val_losses.append(val)
        curves.train_losses.append(running_loss / max(running_count, 1))
        curves.evaluations += 1
        if val < curves.best_val - min_delta:
            curves.best_val = val
            best_state = copy.deepcopy(model.state_dict())
            best_step = step
            bad_evals = 0
            return False
        bad_evals += 1
        if curves.regime == "epoch":
            return bad_evals >= config.epoch_patience
        return step - best_step >= config.step_patience

    stopped = False
    for _epoch in range(config.max_epochs):
        for batch_idx in _batches(len(train_records), config.batch_size, generator):
            chunk = [train_records[j] for j in batch_idx]
            ids, mask, targets = collate(chunk, config.max_seq_len)
            optimizer.zero_grad()
            loss = loss_fn(model(ids, mask), targets)
            if not torch.isfinite(loss):
                raise DivergenceError(f"non-finite loss at step {step}")
            loss.backward()
            optimizer.step()
            step += 1
            running_loss += float(loss.detach()) * len(chunk)
            running_count += len(chunk)
            if curves.regime == "step" and step % config.eval_every_steps == 0:
                if do_eval():
                    stopped = True
                    break
                running_loss, running_count = 0.0, 0
            if step >= config.max_steps:
                stopped = True
                break
        if not stopped and curves.regime == "epoch":
            if do_eval():
                stopped = True
            running_loss, running_count = 0.0, 0
        if stopped:
            break
    curves.stopped_early = stopped
    model.load_state_dict(best_state)
    return curves
