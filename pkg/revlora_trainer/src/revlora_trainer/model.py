"""Causal backbone with LoRA adapters and a scalar regression head.

The generation head of the base model is replaced by a single linear layer
from the token-embedding dimension to one scalar, read at the last
non-padding position. Trainable parameters are exactly: the LoRA adapter
matrices on every linear layer, the token embedding table, and the head;
all other base weights stay frozen.
"""

from __future__ import annotations

import math

import torch
from torch import nn

from .config import TrainerConfig
from .data import VOCAB_SIZE


class BuildError(ValueError):
    """Base model identifier not loadable or architecture incompatible."""


class LoRALinear(nn.Module):
    """A frozen linear layer plus a trainable low-rank update B A x."""

    def __init__(self, base: nn.Linear, rank: int, alpha: int):
        super().__init__()
        self.base = base
        for p in self.base.parameters():
            p.requires_grad_(False)
        self.lora_a = nn.Linear(base.in_features, rank, bias=False)
        self.lora_b = nn.Linear(rank, base.out_features, bias=False)
        nn.init.normal_(self.lora_a.weight, std=1.0 / math.sqrt(rank))
        nn.init.zeros_(self.lora_b.weight)   # adapter starts as identity update
        self.scale = alpha / rank

    def forward(self, x):
        return self.base(x) + self.scale * self.lora_b(self.lora_a(x))


def wrap_linears(module: nn.Module, rank: int, alpha: int) -> int:
    """Replace every nn.Linear under `module` with a LoRA-wrapped version."""
    wrapped = 0
    for name, child in list(module.named_children()):
        if isinstance(child, nn.Linear):
            setattr(module, name, LoRALinear(child, rank, alpha))
            wrapped += 1
        else:
            wrapped += wrap_linears(child, rank, alpha)
    return wrapped


class _Block(nn.Module):
    def __init__(self, hidden: int, heads: int = 4):
        super().__init__()
        self.heads = heads
        self.norm1 = nn.LayerNorm(hidden)
        self.q = nn.Linear(hidden, hidden)
        self.k = nn.Linear(hidden, hidden)
        self.v = nn.Linear(hidden, hidden)
        self.o = nn.Linear(hidden, hidden)
        self.norm2 = nn.LayerNorm(hidden)
        self.mlp_in = nn.Linear(hidden, 4 * hidden)
        self.mlp_out = nn.Linear(4 * hidden, hidden)

    def forward(self, x, pad_mask):
        b, t, h = x.shape
        d = h // self.heads
        y = self.norm1(x)

        def split(proj):
            return proj(y).view(b, t, self.heads, d).transpose(1, 2)

        causal = torch.triu(torch.ones(t, t, dtype=torch.bool, device=x.device), 1)
        attn_mask = causal | ~pad_mask[:, None, None, :]
        scores = (split(self.q) @ split(self.k).transpose(-2, -1)) / math.sqrt(d)
        scores = scores.masked_fill(attn_mask, float("-inf"))
        attn = torch.softmax(scores, dim=-1)
        attn = torch.nan_to_num(attn)   # fully masked rows (padding) attend nowhere
        x = x + self.o((attn @ split(self.v)).transpose(1, 2).reshape(b, t, h))
        z = self.norm2(x)
        return x + self.mlp_out(torch.nn.functional.gelu(self.mlp_in(z)))


class TinyCausalLM(nn.Module):
    """Small random-weight causal transformer over byte-level tokens."""

    def __init__(self, hidden: int, layers: int, max_len: int = 2048):
        super().__init__()
        self.hidden_size = hidden
        self.token_embedding = nn.Embedding(VOCAB_SIZE, hidden)
        self.pos_embedding = nn.Embedding(max_len, hidden)
        self.blocks = nn.ModuleList(_Block(hidden) for _ in range(layers))
        self.final_norm = nn.LayerNorm(hidden)

    def forward(self, ids, mask):
        pos = torch.arange(ids.shape[1], device=ids.device)
        x = self.token_embedding(ids) + self.pos_embedding(pos)[None]
        for block in self.blocks:
            x = block(x, mask)
        return self.final_norm(x)


class RegressionHeadModel(nn.Module):
    """Backbone + scalar head; exactly one output per input sequence."""

    def __init__(self, backbone: nn.Module, hidden: int, config: TrainerConfig):
        super().__init__()
        for p in backbone.parameters():
            p.requires_grad_(False)
        wrapped = wrap_linears(backbone, config.lora_rank, config.lora_alpha)
        if wrapped == 0:
            raise BuildError("base model has no linear layers to adapt")
        if not hasattr(backbone, "token_embedding"):
            raise BuildError("base model exposes no token_embedding table")
        backbone.token_embedding.weight.requires_grad_(True)
        self.backbone = backbone
        self.head = nn.Linear(hidden, 1)

    def forward(self, ids, mask):
        hidden = self.backbone(ids, mask)
        last = mask.sum(dim=1).clamp(min=1) - 1
        pooled = hidden[torch.arange(ids.shape[0], device=ids.device), last]
        return self.head(pooled).squeeze(-1)

    def trainable_named_parameters(self):
        return [(n, p) for n, p in self.named_parameters() if p.requires_grad]

    def parameter_groups(self, config: TrainerConfig):
        """Two AdamW groups: token embeddings at the embedding rate, LoRA
        adapters and head at the non-embedding rate."""
        embed, other = [], []
        for name, p in self.trainable_named_parameters():
            (embed if "token_embedding" in name else other).append(p)
        return [
            {"params": other, "lr": config.lr_non_embedding},
            {"params": embed, "lr": config.lr_embedding},
        ]


def build_model(config: TrainerConfig, backbone: nn.Module | None = None) -> RegressionHeadModel:
    """Attach LoRA and the regression head to a base model.

    Identifiers of the form ``tiny:<hidden>,<layers>`` build the in-repo
    random-weight transformer. Any other identifier requires a supplied
    ``backbone`` module (full-scale pretrained weights are handled outside
    this trainer); its forward must map (ids, mask) to hidden states.
    """
    torch.manual_seed(config.seed)
    if backbone is None:
        if not config.base_model.startswith("tiny:"):
            raise BuildError(
                f"cannot load {config.base_model!r}: supply a backbone module "
                "or use a tiny:<hidden>,<layers> identifier")
        try:
            hidden_s, layers_s = config.base_model.removeprefix("tiny:").split(",")
            hidden, layers = int(hidden_s), int(layers_s)
        except ValueError as exc:
            raise BuildError(f"bad tiny model spec: {config.base_model!r}") from exc
        backbone = TinyCausalLM(hidden, layers)
    else:
        hidden = getattr(backbone, "hidden_size", None)
        if hidden is None:
            raise BuildError("backbone must expose hidden_size")
    return RegressionHeadModel(backbone, hidden, config)
