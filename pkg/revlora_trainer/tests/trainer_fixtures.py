import random

from revlora_trainer.data import PromptRecord


def make_records(n, seed=0, text_len=24):
    rng = random.Random(seed)
    records = []
    for k in range(n):
        text = f"user U{k} item I{k} " + "".join(rng.choice("abcdefgh") for _ in range(text_len))
        records.append(PromptRecord(f"U{k}", f"I{k}", text, float(rng.randint(1, 5))))
    return records
