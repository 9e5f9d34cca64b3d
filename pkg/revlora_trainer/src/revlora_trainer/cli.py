"""CLI: fine-tune on exported prompt records, then write predictions.

``train`` reads lora_records_{train,validation}.jsonl from a records
directory (the files the evaluation pipeline's profile export writes) and
saves a checkpoint; ``predict`` scores a record file with a checkpoint and
writes the predictions CSV the evaluation pipeline ingests.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import TrainerConfig
from .data import load_records
from .infer import infer, load_checkpoint, save_checkpoint, write_predictions_csv
from .model import build_model
from .train import train


def cmd_train(args) -> int:
    records_dir = Path(args.records_dir)
    train_records = load_records(records_dir / "lora_records_train.jsonl")
    val_records = load_records(records_dir / "lora_records_validation.jsonl")
    config = TrainerConfig(
        base_model=args.base_model,
        loss=args.loss,
        seed=args.seed,
        max_epochs=args.max_epochs,
        batch_size=args.batch_size,
        lr_non_embedding=args.lr,
        lr_embedding=args.lr_embedding,
    )
    model = build_model(config)
    curves = train(model, train_records, val_records, config)
    save_checkpoint(model, config, args.out)
    print(f"trained ({curves.regime} regime, {curves.evaluations} evaluations, "
          f"best val {config.loss}={curves.best_val:.4f}); checkpoint in {args.out}")
    return 0


def cmd_predict(args) -> int:
    model, config = load_checkpoint(args.checkpoint)
    records = load_records(args.records)
    ratings = infer(model, records, config)
    write_predictions_csv(records, ratings, args.out)
    print(f"wrote {len(ratings)} predictions to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="revlora")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fine-tune on exported prompt records")
    p.add_argument("--records-dir", required=True,
                   help="directory holding lora_records_{train,validation}.jsonl")
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.add_argument("--base-model", default="tiny:64,2")
    p.add_argument("--loss", choices=["MAE", "MSE"], default="MAE")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-5)
    p.add_argument("--lr-embedding", type=float, default=1e-6)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score a record file with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
