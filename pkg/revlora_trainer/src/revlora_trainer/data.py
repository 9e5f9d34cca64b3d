"""Loading of the exported contract files: prompt-record JSONL and profiles CSV.

The trainer consumes only these exports; it never re-reads the raw review
dataset, so leakage control stays in the exporting pipeline.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import torch

PAD_ID = 256
VOCAB_SIZE = 257   # bytes + pad


@dataclass(frozen=True)
class PromptRecord:
    user: str
    item: str
    text: str
    rating: float


def load_records(path: str | Path) -> list[PromptRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            records.append(PromptRecord(rec["user"], rec["item"], rec["text"],
                                        float(rec["rating"])))
    return records


def load_profiles(path: str | Path) -> dict[tuple[str, str], str]:
    with open(path, encoding="utf-8", newline="") as fh:
        return {(r["owner_kind"], r["owner_source_id"]): r["summary"]
                for r in csv.DictReader(fh)}


def encode(text: str, max_len: int) -> list[int]:
    """Byte-level token ids, truncated from the left so the query survives."""
    ids = list(text.encode("utf-8"))
    return ids[-max_len:]


def collate(records: list[PromptRecord], max_len: int):
    """Right-padded id tensor, attention mask, and target ratings."""
    encoded = [encode(r.text, max_len) for r in records]
    width = max(len(e) for e in encoded)
    ids = torch.full((len(encoded), width), PAD_ID, dtype=torch.long)
    mask = torch.zeros((len(encoded), width), dtype=torch.bool)
    for n, e in enumerate(encoded):
        ids[n, : len(e)] = torch.tensor(e, dtype=torch.long)
        mask[n, : len(e)] = True
    targets = torch.tensor([r.rating for r in records], dtype=torch.float32)
    return ids, mask, targets
