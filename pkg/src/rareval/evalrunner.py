"""Metrics, cold-start stratification, and scenario orchestration.

``run_experiment`` drives the full pipeline per scenario: k-core filter,
seeded split, training-fold perturbation, profile building when the
predictor needs it, prompt rendering or baseline fitting, prediction over
the complete test fold (parse failures imputed with the training global
mean), and MAE/MSE overall and per cold-start bucket. Report CSVs are a
pure function of (config, seeds, cache); wall-clock timings go to a
separate non-normative file so reports stay byte-reproducible.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .backend import (BackendConfig, MockBackend, PARSE_FAILED, ResponseCache,
                      make_backend, predict)
from .baselines import BiasHyper, MFHyper, fit_bias, fit_global_mean, fit_mf, predict_baseline
from .corpus import Dataset, ingest
from .kcore import CoreSpec, kcore_filter
from .perturb import PerturbSpec, apply as apply_perturb
from .profiler import build_profiles, summary_table
from .promptkit import BudgetPolicy, RenderedPrompt, build_few_shot, build_revlora_input, build_zero_shot
from .rng import CounterRng, derive_seed
from .splitter import SplitSpec, split
from .views import DatasetView

CONFIG_VERSION = 1


class MetricError(ValueError):
    pass


def mae(pred, truth) -> float:
    """Mean absolute error."""
    p, t = np.asarray(pred, dtype=float), np.asarray(truth, dtype=float)
    if p.shape != t.shape or p.size == 0:
        raise MetricError("vectors must be non-empty and of equal length")
    return float(np.mean(np.abs(p - t)))


def mse(pred, truth) -> float:
    """Mean squared error."""
    p, t = np.asarray(pred, dtype=float), np.asarray(truth, dtype=float)
    if p.shape != t.shape or p.size == 0:
        raise MetricError("vectors must be non-empty and of equal length")
    return float(np.mean((p - t) ** 2))


@dataclass(frozen=True)
class ColdStartStrata:
    buckets: dict[int, list[int]]   # f -> test positions, f in 0..max_f
    excluded: list[int]             # f > max_f (still counted in overall metrics)


def cold_start_strata(train: DatasetView, test: DatasetView, max_f: int = 10) -> ColdStartStrata:
    """Bucket each test interaction by its user's training-fold review count.

    f=0 collects users absent from training; f beyond max_f is excluded from
    the strata but stays in overall metrics.
    """
    buckets: dict[int, list[int]] = {f: [] for f in range(max_f + 1)}
    excluded: list[int] = []
    for p in test.positions:
        f = len(train.user_positions(test.parent.reviews[p].user))
        if f <= max_f:
            buckets[f].append(p)
        else:
            excluded.append(p)
    return ColdStartStrata(buckets, excluded)


def view_global_mean(view: DatasetView) -> float:
    total = 0.0
    for _, r in view.reviews():
        total += r.rating
    return total / len(view)


def view_user_means(view: DatasetView) -> dict[int, float]:
    sums: dict[int, float] = {}
    counts: dict[int, int] = {}
    for _, r in view.reviews():
        sums[r.user] = sums.get(r.user, 0.0) + r.rating
        counts[r.user] = counts.get(r.user, 0) + 1
    return {u: sums[u] / counts[u] for u in sums}


@dataclass(frozen=True)
class ScenarioSpec:
    id: str
    perturb: PerturbSpec | None = None
    core_k: int | None = None
    rating_only: bool = False


@dataclass(frozen=True)
class PredictorSpec:
    kind: str = "baseline"          # "baseline" | "prompt"
    baseline: str = "bias"          # "global-mean" | "bias" | "mf"
    family: str = "zero-shot"       # "zero-shot" | "few-shot" | "revlora"
    rating_only: bool = False
    backend: BackendConfig = BackendConfig()
    mock_mode: str = "fixed"        # "fixed" | "echo-user-mean"
    mock_fixed: str = "3"
    bias_hyper: BiasHyper = BiasHyper()
    mf_hyper: MFHyper = MFHyper()

    @property
    def id(self) -> str:
        if self.kind == "baseline":
            return f"baseline-{self.baseline}"
        suffix = "+rating-only" if self.rating_only else ""
        return f"{self.family}:{self.backend.model_name}{suffix}"


@dataclass
class ExperimentConfig:
    dataset_path: str
    dataset_format: str
    scenarios: list[ScenarioSpec]
    predictor: PredictorSpec = PredictorSpec()
    core_k: int = 0
    split: SplitSpec = SplitSpec(seed=42)
    budget: BudgetPolicy = BudgetPolicy()
    output_dir: str | None = None
    cache_dir: str | None = None
    seed: int = 0
    max_f: int = 10

    def digest(self) -> str:
        blob = json.dumps(_config_fingerprint(self), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]


def _config_fingerprint(cfg: ExperimentConfig) -> dict:
    return {
        "version": CONFIG_VERSION,
        "dataset": [cfg.dataset_path, cfg.dataset_format],
        "core_k": cfg.core_k,
        "split": [cfg.split.seed, list(cfg.split.ratios)],
        "seed": cfg.seed,
        "predictor": cfg.predictor.id,
        "scenarios": [
            [s.id, s.core_k, s.rating_only,
             None if s.perturb is None else [s.perturb.kind, s.perturb.fraction, s.perturb.seed]]
            for s in cfg.scenarios
        ],
    }


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse the versioned YAML experiment file (schema in the README)."""
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if raw.get("version", CONFIG_VERSION) != CONFIG_VERSION:
        raise ValueError("unsupported config version")
    scenarios = []
    for s in raw.get("scenarios", [{"id": "base"}]):
        pert = s.get("perturb")
        scenarios.append(ScenarioSpec(
            id=str(s["id"]),
            perturb=None if pert is None else PerturbSpec(pert["kind"], float(pert["fraction"]), int(pert["seed"])),
            core_k=s.get("core_k"),
            rating_only=bool(s.get("rating_only", False)),
        ))
    if not scenarios:
        raise ValueError("scenario grid is empty")
    pred_raw = raw.get("predictor", {})
    backend_raw = pred_raw.get("backend", {})
    backend = BackendConfig(
        kind=backend_raw.get("kind", "mock"),
        endpoint_url=backend_raw.get("endpoint_url", ""),
        model_name=backend_raw.get("model_name", "mock"),
        temperature=float(backend_raw.get("temperature", 0.0)),
        max_output_tokens=int(backend_raw.get("max_output_tokens", 16)),
        request_timeout=float(backend_raw.get("request_timeout", 60.0)),
        max_in_flight=int(backend_raw.get("max_in_flight", 4)),
        retry_count=int(backend_raw.get("retry_count", 3)),
    )
    predictor = PredictorSpec(
        kind=pred_raw.get("kind", "baseline"),
        baseline=pred_raw.get("baseline", "bias"),
        family=pred_raw.get("family", "zero-shot"),
        rating_only=bool(pred_raw.get("rating_only", False)),
        backend=backend,
        mock_mode=backend_raw.get("mock_mode", "fixed"),
        mock_fixed=str(backend_raw.get("fixed", "3")),
    )
    budget_raw = raw.get("budget", {})
    budget = BudgetPolicy(
        max_review_tokens=int(budget_raw.get("max_review_tokens", 7680)),
        shots=int(budget_raw.get("shots", 3)),
    )
    split_raw = raw.get("split", {})
    return ExperimentConfig(
        dataset_path=raw["dataset"]["path"],
        dataset_format=raw["dataset"].get("format", "amazon-2014-jsonlines"),
        scenarios=scenarios,
        predictor=predictor,
        core_k=int(raw.get("core_k", 0)),
        split=SplitSpec(int(split_raw.get("seed", 42)),
                        tuple(float(r) for r in split_raw.get("ratios", (0.8, 0.1, 0.1)))),
        budget=budget,
        output_dir=raw.get("output_dir"),
        cache_dir=raw.get("cache_dir"),
        seed=int(raw.get("seed", 0)),
        max_f=int(raw.get("max_f", 10)),
    )


@dataclass
class ScenarioRow:
    scenario_id: str
    predictor_id: str
    n_eval: int
    mae: float | None
    mse: float | None
    parse_failure_rate: float | None
    status: str = "ok"
    error: str = ""


@dataclass
class ColdStartRow:
    scenario_id: str
    f: int
    group_count: int
    mae: float | None


@dataclass
class RunReport:
    rows: list[ScenarioRow] = field(default_factory=list)
    cold_start_rows: list[ColdStartRow] = field(default_factory=list)
    timings: list[tuple[str, float]] = field(default_factory=list)
    config_digest: str = ""
    code_version: str = __version__
    seeds: dict[str, int] = field(default_factory=dict)
    prompt_audit: dict[str, list[RenderedPrompt]] = field(default_factory=dict)
    shortfalls: dict[str, int] = field(default_factory=dict)


def _fmt(x: float | None) -> str:
    return "" if x is None else repr(x)


def write_report(report: RunReport, out_dir: str | Path) -> None:
    """report.csv + cold_start.csv (deterministic) and timings.csv + summary.txt."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = (f"# config_digest={report.config_digest} code_version={report.code_version} "
              f"seeds={json.dumps(report.seeds, sort_keys=True)}\n")
    with open(out / "report.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(header)
        fh.write("scenario_id,predictor_id,n_eval,mae,mse,parse_failure_rate,status,error\n")
        for r in report.rows:
            fh.write(f"{r.scenario_id},{r.predictor_id},{r.n_eval},{_fmt(r.mae)},{_fmt(r.mse)},"
                     f"{_fmt(r.parse_failure_rate)},{r.status},{r.error}\n")
    with open(out / "cold_start.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(header)
        fh.write("scenario_id,f,group_count,mae\n")
        for c in report.cold_start_rows:
            fh.write(f"{c.scenario_id},{c.f},{c.group_count},{_fmt(c.mae)}\n")
    with open(out / "timings.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("scenario_id,wall_time_s\n")
        for sid, t in report.timings:
            fh.write(f"{sid},{t:.3f}\n")
    with open(out / "summary.txt", "w", encoding="utf-8") as fh:
        fh.write(f"run {report.config_digest} (rareval {report.code_version})\n\n")
        fh.write(f"{'scenario':<24}{'predictor':<28}{'n':>6}{'MAE':>10}{'MSE':>10}{'fail%':>8}\n")
        for r in report.rows:
            m = f"{r.mae:.4f}" if r.mae is not None else "-"
            s = f"{r.mse:.4f}" if r.mse is not None else "-"
            pf = f"{100 * r.parse_failure_rate:.1f}" if r.parse_failure_rate is not None else "-"
            fh.write(f"{r.scenario_id:<24}{r.predictor_id:<28}{r.n_eval:>6}{m:>10}{s:>10}{pf:>8}\n")


def _build_prompt(pred: PredictorSpec, scenario: ScenarioSpec, cfg: ExperimentConfig,
                  train: DatasetView, profiles_map, pos: int) -> RenderedPrompt:
    ds = train.parent
    r = ds.reviews[pos]
    rating_only = pred.rating_only or scenario.rating_only
    if pred.family == "zero-shot":
        return build_zero_shot(r.user, r.item, train, cfg.budget)
    if pred.family == "few-shot":
        # per-target generator keyed by review_index: order- and concurrency-independent
        gen = CounterRng(derive_seed(cfg.seed, f"fewshot-{scenario.id}-{r.review_index}"))
        return build_few_shot(gen, r.user, r.item, train, cfg.budget)
    if pred.family == "revlora":
        return build_revlora_input(r.user, r.item, profiles_map or {}, train, cfg.budget,
                                   rating_only=rating_only)
    raise ValueError(f"unknown prompt family: {pred.family!r}")


def _make_scenario_backend(pred: PredictorSpec, train: DatasetView):
    if pred.backend.kind != "mock":
        return make_backend(pred.backend)
    if pred.mock_mode == "echo-user-mean":
        return MockBackend(user_means=view_user_means(train), global_mean=view_global_mean(train))
    return MockBackend(fixed=pred.mock_fixed)


def run_scenario(cfg: ExperimentConfig, scenario: ScenarioSpec, dataset: Dataset,
                 cache: ResponseCache | None, report: RunReport,
                 backend=None) -> None:
    pred = cfg.predictor
    k = scenario.core_k if scenario.core_k is not None else cfg.core_k
    ds = kcore_filter(dataset, CoreSpec(k)) if k else dataset
    folds = split(ds, cfg.split)
    train = folds.train
    if scenario.perturb is not None:
        train = apply_perturb(train, scenario.perturb)
    test = folds.test
    if len(test) == 0:
        raise ValueError("test fold is empty")
    impute = view_global_mean(train)
    truth = [ds.reviews[p].rating for p in test.positions]

    if pred.kind == "baseline":
        if pred.baseline == "global-mean":
            model = fit_global_mean(train)
        elif pred.baseline == "bias":
            model = fit_bias(train, pred.bias_hyper)
        elif pred.baseline == "mf":
            model = fit_mf(train, pred.mf_hyper)
        else:
            raise ValueError(f"unknown baseline: {pred.baseline!r}")
        ratings = [predict_baseline(model, ds.reviews[p].user, ds.reviews[p].item)
                   for p in test.positions]
        failures = 0
    else:
        be = backend if backend is not None else _make_scenario_backend(pred, train)
        profiles_map = None
        if pred.family == "revlora" and not (pred.rating_only or scenario.rating_only):
            profiles = build_profiles(be, train, max_in_flight=pred.backend.max_in_flight)
            profiles_map = summary_table(profiles)
        prompts = [_build_prompt(pred, scenario, cfg, train, profiles_map, p)
                   for p in test.positions]
        report.prompt_audit[scenario.id] = prompts
        report.shortfalls[scenario.id] = sum(p.demo_shortfall for p in prompts)

        def run_one(prompt):
            return predict(pred.backend, be, prompt, cache)

        if pred.backend.max_in_flight > 1:
            with ThreadPoolExecutor(max_workers=pred.backend.max_in_flight) as pool:
                predictions = list(pool.map(run_one, prompts))
        else:
            predictions = [run_one(p) for p in prompts]
        ratings = [pr.rating if pr.parse_status != PARSE_FAILED and pr.rating is not None else impute
                   for pr in predictions]
        failures = sum(1 for pr in predictions if pr.parse_status == PARSE_FAILED)

    report.rows.append(ScenarioRow(
        scenario.id, pred.id, len(test), mae(ratings, truth), mse(ratings, truth),
        None if pred.kind == "baseline" else failures / len(test),
    ))
    strata = cold_start_strata(folds.train, test, cfg.max_f)
    by_pos = dict(zip(test.positions, ratings))
    truth_by_pos = dict(zip(test.positions, truth))
    for f in range(cfg.max_f + 1):
        bucket = strata.buckets[f]
        bucket_mae = mae([by_pos[p] for p in bucket], [truth_by_pos[p] for p in bucket]) if bucket else None
        report.cold_start_rows.append(ColdStartRow(scenario.id, f, len(bucket), bucket_mae))


def run_experiment(cfg: ExperimentConfig, dataset: Dataset | None = None,
                   backend=None) -> RunReport:
    """Execute every scenario; a failing scenario is recorded and the rest continue."""
    if dataset is None:
        dataset, _ = ingest(cfg.dataset_path, cfg.dataset_format)
    cache = ResponseCache(cfg.cache_dir) if cfg.cache_dir else None
    report = RunReport(config_digest=cfg.digest(),
                       seeds={"global": cfg.seed, "split": cfg.split.seed})
    for scenario in cfg.scenarios:
        start = time.perf_counter()
        try:
            run_scenario(cfg, scenario, dataset, cache, report, backend=backend)
        except Exception as exc:   # scenario isolation: record and continue
            report.rows.append(ScenarioRow(scenario.id, cfg.predictor.id, 0, None, None, None,
                                           status="error", error=str(exc).replace(",", ";")))
        report.timings.append((scenario.id, time.perf_counter() - start))
    if cfg.output_dir:
        write_report(report, cfg.output_dir)
        _write_prompt_audit(report, cfg.output_dir)
    return report


def export_revlora_records(cfg: ExperimentConfig, dataset: Dataset, backend,
                           out_dir: str | Path) -> None:
    """Emit the fine-tuning contract files: profiles.csv plus one JSONL of
    prompt/rating records per fold, rendered from training-fold data only."""
    from .profiler import write_profiles_csv

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds = kcore_filter(dataset, CoreSpec(cfg.core_k)) if cfg.core_k else dataset
    folds = split(ds, cfg.split)
    train = folds.train
    profiles = build_profiles(backend, train, max_in_flight=cfg.predictor.backend.max_in_flight)
    write_profiles_csv(profiles, train, out / "profiles.csv")
    profiles_map = summary_table(profiles)
    for fold_name, view in (("train", train), ("validation", folds.validation), ("test", folds.test)):
        with open(out / f"lora_records_{fold_name}.jsonl", "w", encoding="utf-8") as fh:
            for p in view.positions:
                r = ds.reviews[p]
                prompt = build_revlora_input(r.user, r.item, profiles_map, train, cfg.budget,
                                             rating_only=cfg.predictor.rating_only)
                fh.write(json.dumps({
                    "fold": fold_name,
                    "user": ds.user_ids[r.user], "item": ds.item_ids[r.item],
                    "text": prompt.text, "rating": r.rating,
                    "included": [list(x) for x in prompt.included],
                }, sort_keys=True) + "\n")


def score_predictions(predictions_csv: str | Path, records_jsonl: str | Path) -> tuple[float, float, int]:
    """MAE/MSE of an external predictions CSV (user,item,rating) against the
    ground-truth ratings in a prompt-record file; rows must align pairwise."""
    import csv as _csv

    with open(predictions_csv, encoding="utf-8", newline="") as fh:
        preds = list(_csv.DictReader(fh))
    truth = []
    with open(records_jsonl, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                truth.append(json.loads(line))
    if len(preds) != len(truth):
        raise MetricError(f"{len(preds)} predictions vs {len(truth)} records")
    for p, t in zip(preds, truth):
        if (p["user"], p["item"]) != (t["user"], t["item"]):
            raise MetricError(f"row mismatch: {p['user']}/{p['item']} vs {t['user']}/{t['item']}")
    p_vec = [float(p["rating"]) for p in preds]
    t_vec = [float(t["rating"]) for t in truth]
    return mae(p_vec, t_vec), mse(p_vec, t_vec), len(p_vec)


def _write_prompt_audit(report: RunReport, out_dir: str | Path) -> None:
    """Newline-delimited JSON of every rendered prompt, for audit and training."""
    out = Path(out_dir)
    for sid, prompts in report.prompt_audit.items():
        with open(out / f"prompts_{sid}.jsonl", "w", encoding="utf-8") as fh:
            for p in prompts:
                fh.write(json.dumps({
                    "target_user": p.target_user, "target_item": p.target_item,
                    "text": p.text, "included": [list(x) for x in p.included],
                    "token_estimate": p.token_estimate, "truncated": p.truncated,
                }, sort_keys=True) + "\n")
