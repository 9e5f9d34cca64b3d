"""Command-line entry point.

Subcommands: ingest, kcore, split, perturb, profile, run, report. The
experiment-level subcommands read the versioned YAML config documented in
the README; the data-prep subcommands work directly on dump files.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .backend import MockBackend, make_backend
from .corpus import AMAZON_2014, export_csv, ingest
from .evalrunner import export_revlora_records, load_config, run_experiment
from .kcore import CoreSpec, core_stats, kcore_filter
from .perturb import PerturbSpec
from .perturb import write_manifest as write_perturb_manifest
from .reporting import render_report_figures
from .splitter import SplitSpec, split
from .splitter import write_manifest as write_split_manifest


def _add_input_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="raw dump file")
    p.add_argument("--format", default=AMAZON_2014,
                   choices=[AMAZON_2014, "generic-csv"])


def cmd_ingest(args) -> int:
    dataset, report = ingest(args.input, args.format, strict=args.strict)
    print(f"kept {report.kept} reviews ({dataset.n_users} users, {dataset.n_items} items); "
          f"dropped {report.dropped_empty_text} empty-text, "
          f"rejected {report.rejected_bad_rating} bad-rating, "
          f"{report.malformed} malformed")
    if args.output:
        export_csv(dataset, args.output)
        print(f"wrote {args.output}")
    return 0


def cmd_kcore(args) -> int:
    dataset, _ = ingest(args.input, args.format)
    ks = [int(k) for k in args.ks.split(",")]
    lines = ["k,users,items,reviews"]
    for k in ks:
        s = core_stats(kcore_filter(dataset, CoreSpec(k)))
        lines.append(f"{k},{s.user_count},{s.item_count},{s.review_count}")
    out = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(out, encoding="utf-8")
        print(f"wrote {args.output}")
    else:
        sys.stdout.write(out)
    return 0


def cmd_split(args) -> int:
    dataset, _ = ingest(args.input, args.format)
    if args.core_k:
        dataset = kcore_filter(dataset, CoreSpec(args.core_k))
    result = split(dataset, SplitSpec(args.seed))
    print(f"train={len(result.train)} validation={len(result.validation)} test={len(result.test)}")
    if args.manifest:
        write_split_manifest(result, args.manifest)
        print(f"wrote {args.manifest}")
    return 0


def cmd_perturb(args) -> int:
    dataset, _ = ingest(args.input, args.format)
    if args.core_k:
        dataset = kcore_filter(dataset, CoreSpec(args.core_k))
    result = split(dataset, SplitSpec(args.split_seed))
    spec = PerturbSpec(args.kind, args.fraction, args.seed)
    write_perturb_manifest(result.train, spec, args.manifest)
    print(f"wrote {args.manifest}")
    return 0


def cmd_profile(args) -> int:
    cfg = load_config(args.config)
    if cfg.output_dir is None:
        print("config must set output_dir", file=sys.stderr)
        return 2
    dataset, _ = ingest(cfg.dataset_path, cfg.dataset_format)
    if cfg.predictor.backend.kind == "mock":
        backend = MockBackend(fixed=cfg.predictor.mock_fixed)
    else:
        backend = make_backend(cfg.predictor.backend)
    export_revlora_records(cfg, dataset, backend, cfg.output_dir)
    print(f"wrote profiles and prompt records to {cfg.output_dir}")
    return 0


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    report = run_experiment(cfg)
    errors = [r for r in report.rows if r.status != "ok"]
    for r in report.rows:
        m = f"{r.mae:.4f}" if r.mae is not None else "-"
        print(f"{r.scenario_id}: {r.predictor_id} n={r.n_eval} MAE={m} [{r.status}]")
    if cfg.output_dir:
        print(f"report written to {cfg.output_dir}")
    return 1 if errors else 0


def cmd_score(args) -> int:
    from .evalrunner import score_predictions

    mae_v, mse_v, n = score_predictions(args.predictions, args.records)
    print(f"n={n} MAE={mae_v:.6f} MSE={mse_v:.6f}")
    return 0


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    summary = run_dir / "summary.txt"
    if summary.exists():
        sys.stdout.write(summary.read_text(encoding="utf-8"))
    for path in render_report_figures(run_dir):
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rareval")
    parser.add_argument("--version", action="version", version=f"rareval {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="ingest a raw dump and optionally export canonical CSV")
    _add_input_args(p)
    p.add_argument("--output", help="canonical CSV export path")
    p.add_argument("--strict", action="store_true", help="abort on malformed records")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("kcore", help="k-core statistics as a CSV row per k")
    _add_input_args(p)
    p.add_argument("--ks", default="0,3,5,8,10", help="comma-separated k values")
    p.add_argument("--output", help="stats CSV path (default stdout)")
    p.set_defaults(func=cmd_kcore)

    p = sub.add_parser("split", help="seeded train/validation/test split")
    _add_input_args(p)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--core-k", type=int, default=0)
    p.add_argument("--manifest", help="write (review_index, fold) manifest CSV")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("perturb", help="write a training-fold perturbation manifest")
    _add_input_args(p)
    p.add_argument("--kind", choices=["remove", "distort"], required=True)
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--split-seed", type=int, default=42)
    p.add_argument("--core-k", type=int, default=0)
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("profile", help="build profiles and fine-tuning prompt records")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("run", help="run every scenario in an experiment config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("score", help="score an external predictions CSV against prompt records")
    p.add_argument("--predictions", required=True, help="CSV of user,item,rating")
    p.add_argument("--records", required=True, help="ground-truth prompt-record JSONL")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("report", help="print the summary and render figures for a run")
    p.add_argument("--run-dir", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
