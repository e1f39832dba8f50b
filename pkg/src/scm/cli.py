"""Command line entry point: ``scm run`` and ``scm eval``.

Exit codes: 0 success, 1 one or more tiles failed, 2 usage or configuration
error, 3 the dataset contained no pairs.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .adapters import AdapterConfig
from .datasets import (
    GroundTruth,
    _counterpart,
    _find_split,
    load_whu_mosaic,
    read_label,
    read_tile,
    tile_id,
    tile_whu,
)
from .errors import SCMError
from .evaluation import EvalReport, accumulate
from .pipeline import VARIANTS, RunConfig, run_dataset

EXIT_OK, EXIT_FAILURES, EXIT_USAGE, EXIT_EMPTY = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scm", description="Zero-shot building change detection")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="detect changes over a dataset and score them")
    run.add_argument("--config", help="INI file with [run] and [adapter] sections")
    run.add_argument("--dataset", choices=("levir", "whu"))
    run.add_argument("--root", help="dataset root directory")
    run.add_argument("--variant", choices=VARIANTS)
    run.add_argument("--out", help="output directory")
    run.add_argument("--prompts", help="prompt file overriding the built-in term groups")
    run.add_argument("--threshold", type=float, help="fixed threshold instead of OTSU")
    run.add_argument("--workers", type=int)
    run.add_argument("--synthetic-backbone", type=int, metavar="SEED",
                     help="use the weight-free synthetic adapters with this seed")
    run.add_argument("--aggregation", choices=("micro", "macro"))

    ev = sub.add_parser("eval", help="recompute metrics from persisted change maps")
    ev.add_argument("--pred", required=True, help="directory holding <id>_pred.png files")
    ev.add_argument("--gt", required=True, help="dataset root or label directory")
    ev.add_argument("--dataset", choices=("levir", "whu"), default="levir")
    ev.add_argument("--aggregation", choices=("micro", "macro"), default="micro")
    ev.add_argument("--out", help="write the report here instead of only printing it")
    return parser


def _run_config(args) -> RunConfig:
    overrides = {k: getattr(args, k) for k in (
        "dataset", "root", "variant", "out", "prompts", "threshold", "workers", "aggregation")}
    if args.config:
        cfg = RunConfig.from_file(args.config, **overrides)
    else:
        cfg = RunConfig(**{k: v for k, v in overrides.items() if v is not None})
    if args.synthetic_backbone is not None:
        cfg.adapter = AdapterConfig(kind="synthetic", seed=args.synthetic_backbone,
                                    strides=cfg.adapter.strides, channels=cfg.adapter.channels)
    return cfg.validate()


def evaluate_predictions(pred_dir, gt_root, dataset="levir", mode="micro") -> EvalReport:
    """Score persisted ``<id>_pred.png`` maps against ground truth."""
    pred_dir = Path(pred_dir)
    preds = sorted(pred_dir.glob("*_pred.png"))
    report = EvalReport(mode=mode)
    if dataset == "whu":
        _, _, label = load_whu_mosaic(gt_root)
        tiles = {tile_id(s): s for s in tile_whu(label.shape)}
        for p in preds:
            tid = p.name[: -len("_pred.png")]
            gt = GroundTruth(read_tile(label, tiles[tid]), tid)
            report.add(tid, accumulate(read_label(p), gt))
        return report
    root = Path(gt_root)
    label_dir = _find_split(root) / "label"
    if not label_dir.is_dir():
        label_dir = root
    for p in preds:
        tid = p.name[: -len("_pred.png")]
        report.add(tid, accumulate(read_label(p), read_label(_counterpart(label_dir, tid))))
    return report


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            cfg = _run_config(args)
            report = run_dataset(cfg)
            print(json.dumps({"tiles": len(report.per_tile), "failures": len(report.failures),
                              **report.aggregate()}, indent=2))
            if report.failures:
                return EXIT_FAILURES
            return EXIT_OK if report.per_tile else EXIT_EMPTY
        report = evaluate_predictions(args.pred, args.gt, args.dataset, args.aggregation)
        if args.out:
            report.write(args.out)
        print(json.dumps({"tiles": len(report.per_tile), **report.aggregate()}, indent=2))
        return EXIT_OK if report.per_tile else EXIT_EMPTY
    except (SCMError, ValueError, KeyError) as exc:
        print(f"scm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
