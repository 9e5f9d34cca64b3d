"""Native rating predictors that ignore review text entirely: global mean,
user/item bias model, and latent-factor matrix factorization trained by SGD.

These close the evaluation loop without any model endpoint and serve as
oracle reference points; they are deliberately small-scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rng import CounterRng, derive_seed
from .views import DatasetView

CHECKPOINT_VERSION = 1


class FitError(ValueError):
    pass


def _clamp(x: float) -> float:
    return min(5.0, max(1.0, x))


@dataclass(frozen=True)
class BiasHyper:
    lr: float = 0.005
    reg: float = 0.02
    epochs: int = 30
    seed: int = 0


@dataclass(frozen=True)
class MFHyper:
    d: int = 16
    lr: float = 0.005
    reg: float = 0.02
    epochs: int = 30
    seed: int = 0


@dataclass
class GlobalMeanModel:
    mu: float


@dataclass
class BiasModel:
    mu: float
    b_u: dict[int, float]
    b_i: dict[int, float]
    hyper: BiasHyper


@dataclass
class MFModel:
    mu: float
    b_u: dict[int, float]
    b_i: dict[int, float]
    P: dict[int, np.ndarray]
    Q: dict[int, np.ndarray]
    hyper: MFHyper
    epoch_sq_error: list[float] = field(default_factory=list)


def _triples(train: DatasetView) -> list[tuple[int, int, float]]:
    return [(r.user, r.item, r.rating) for _, r in train.reviews()]


def fit_global_mean(train: DatasetView) -> GlobalMeanModel:
    triples = _triples(train)
    if not triples:
        raise FitError("empty training fold")
    return GlobalMeanModel(sum(t[2] for t in triples) / len(triples))


def fit_bias(train: DatasetView, hyper: BiasHyper = BiasHyper()) -> BiasModel:
    """SGD on squared error with L2-regularized user/item offsets."""
    triples = _triples(train)
    if not triples:
        raise FitError("empty training fold")
    mu = sum(t[2] for t in triples) / len(triples)
    b_u = {u: 0.0 for u, _, _ in triples}
    b_i = {i: 0.0 for _, i, _ in triples}
    rng = CounterRng(derive_seed(hyper.seed, "bias-sgd"))
    order = list(range(len(triples)))
    for _ in range(hyper.epochs):
        rng.shuffle(order)
        for idx in order:
            u, i, r = triples[idx]
            err = r - (mu + b_u[u] + b_i[i])
            b_u[u] += hyper.lr * (err - hyper.reg * b_u[u])
            b_i[i] += hyper.lr * (err - hyper.reg * b_i[i])
    return BiasModel(mu, b_u, b_i, hyper)


def fit_mf(train: DatasetView, hyper: MFHyper = MFHyper()) -> MFModel:
    """Biased matrix factorization; factors start from a seeded Gaussian
    (sigma = 0.1) and training squared error is recorded per epoch."""
    if hyper.d < 1:
        raise FitError("factor dimension must be >= 1")
    triples = _triples(train)
    if not triples:
        raise FitError("empty training fold")
    mu = sum(t[2] for t in triples) / len(triples)
    users = sorted({u for u, _, _ in triples})
    items = sorted({i for _, i, _ in triples})
    init = CounterRng(derive_seed(hyper.seed, "mf-init"))

    def gaussians(n: int) -> np.ndarray:
        # Box-Muller over counter-rng uniforms keeps init seed-stable
        out = np.empty(n)
        for j in range(0, n, 2):
            u1 = (init.next_u64() + 1) / (2.0 ** 64 + 1)
            u2 = init.next_u64() / 2.0 ** 64
            r = np.sqrt(-2.0 * np.log(u1))
            out[j] = r * np.cos(2 * np.pi * u2)
            if j + 1 < n:
                out[j + 1] = r * np.sin(2 * np.pi * u2)
        return out

    P = {u: 0.1 * gaussians(hyper.d) for u in users}
    Q = {i: 0.1 * gaussians(hyper.d) for i in items}
    b_u = {u: 0.0 for u in users}
    b_i = {i: 0.0 for i in items}

    model = MFModel(mu, b_u, b_i, P, Q, hyper)
    sgd = CounterRng(derive_seed(hyper.seed, "mf-sgd"))
    order = list(range(len(triples)))
    for _ in range(hyper.epochs):
        sgd.shuffle(order)
        for idx in order:
            u, i, r = triples[idx]
            pu, qi = P[u], Q[i]
            err = r - (mu + b_u[u] + b_i[i] + float(pu @ qi))
            b_u[u] += hyper.lr * (err - hyper.reg * b_u[u])
            b_i[i] += hyper.lr * (err - hyper.reg * b_i[i])
            pu_new = pu + hyper.lr * (err * qi - hyper.reg * pu)
            qi_new = qi + hyper.lr * (err * pu - hyper.reg * qi)
            P[u], Q[i] = pu_new, qi_new
        sq = sum(
            (r - (mu + b_u[u] + b_i[i] + float(P[u] @ Q[i]))) ** 2 for u, i, r in triples
        ) / len(triples)
        model.epoch_sq_error.append(sq)
    return model


def predict_baseline(model, u: int, i: int) -> float:
    """Clamped score; unseen users/items contribute zero offset/factors."""
    if isinstance(model, GlobalMeanModel):
        return _clamp(model.mu)
    if isinstance(model, BiasModel):
        return _clamp(model.mu + model.b_u.get(u, 0.0) + model.b_i.get(i, 0.0))
    if isinstance(model, MFModel):
        score = model.mu + model.b_u.get(u, 0.0) + model.b_i.get(i, 0.0)
        if u in model.P and i in model.Q:
            score += float(model.P[u] @ model.Q[i])
        return _clamp(score)
    raise TypeError(f"unknown model type: {type(model)!r}")


def save_checkpoint(model, path: str | Path) -> None:
    """Flat binary tables (npz) with a version header."""
    arrays = {"version": np.array([CHECKPOINT_VERSION]), "mu": np.array([model.mu])}
    if isinstance(model, GlobalMeanModel):
        arrays["kind"] = np.array(["global-mean"])
    elif isinstance(model, (BiasModel, MFModel)):
        arrays["kind"] = np.array(["mf" if isinstance(model, MFModel) else "bias"])
        arrays["users"] = np.array(sorted(model.b_u))
        arrays["items"] = np.array(sorted(model.b_i))
        arrays["b_u"] = np.array([model.b_u[u] for u in sorted(model.b_u)])
        arrays["b_i"] = np.array([model.b_i[i] for i in sorted(model.b_i)])
        if isinstance(model, MFModel):
            arrays["P"] = np.stack([model.P[u] for u in sorted(model.P)])
            arrays["Q"] = np.stack([model.Q[i] for i in sorted(model.Q)])
    np.savez(path, **arrays)


def load_checkpoint(path: str | Path):
    data = np.load(path, allow_pickle=False)
    if int(data["version"][0]) != CHECKPOINT_VERSION:
        raise ValueError("unsupported checkpoint version")
    kind = str(data["kind"][0])
    mu = float(data["mu"][0])
    if kind == "global-mean":
        return GlobalMeanModel(mu)
    users = [int(x) for x in data["users"]]
    items = [int(x) for x in data["items"]]
    b_u = dict(zip(users, (float(x) for x in data["b_u"])))
    b_i = dict(zip(items, (float(x) for x in data["b_i"])))
    if kind == "bias":
        return BiasModel(mu, b_u, b_i, BiasHyper())
    P = {u: data["P"][n] for n, u in enumerate(users)}
    Q = {i: data["Q"][n] for n, i in enumerate(items)}
    return MFModel(mu, b_u, b_i, P, Q, MFHyper())
