"""``fairscope`` command line.

Exit codes: 0 success, 1 claim or consistency failure, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .audit import EXIT_FAILED, EXIT_INPUT, EXIT_OK, atomic_write, emit, run_audit, verify_paper
from .dataset import SplitConfig, load_manifest, make_split
from .errors import FairscopeError
from .fairness import gaps
from .metrics import load_metric_table
from .preprocess import KeyframeConfig, PRESETS, apply_augmentation, plan_augmentation, read_clip, select_keyframes, write_clip
from .records import emit_records, read_records
from .stats import aggregate_stats


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _out(text: str, path=None) -> None:
    if path:
        atomic_write(path, text.encode("utf-8"))
    else:
        sys.stdout.write(text)


def cmd_ingest(args) -> int:
    records = read_records(args.records, fuse=args.fuse)
    _out(emit_records(records), args.out)
    print(f"{len(records)} records, taxonomy {records.taxonomy.value}", file=sys.stderr)
    return EXIT_OK


def cmd_audit(args) -> int:
    report = run_audit(args.records, args.aggregation, args.eqod_combine, fuse=args.fuse)
    atomic_write(args.out, emit(report, "json"))
    if args.csv_dir:
        for section in ("metrics", "gaps", "stats"):
            atomic_write(Path(args.csv_dir) / f"{section}.csv", emit(report, "csv", section))
    for err in report.errors:
        print(f"error: {err}", file=sys.stderr)
    return EXIT_INPUT if report.errors else EXIT_OK


def cmd_gaps(args) -> int:
    tbl = load_metric_table(args.metrics)
    report = gaps(tbl, args.regime, args.definition, args.aggregation, args.eqod_combine)
    payload = report.to_json()
    if not args.rank:
        payload.pop("ranking")
    _out(_dump(payload), args.out)
    return EXIT_OK


def cmd_split(args) -> int:
    with open(args.manifest, encoding="utf-8") as fh:
        manifest = load_manifest(fh)
    config = SplitConfig(
        test_seed=args.test_seed,
        val_seed=args.val_seed,
        test_per_gender=args.test_per_gender,
        val_subject_count=args.val_subjects,
        val_fraction=args.val_fraction,
    )
    _out(_dump(make_split(manifest, config).to_json()), args.out)
    return EXIT_OK


def cmd_keyframes(args) -> int:
    clip = read_clip(args.clip)
    config = KeyframeConfig.from_preset(args.preset)
    indices = select_keyframes(clip, config, seed=args.seed)
    if args.subsample:
        step = len(indices) / args.subsample
        indices = [indices[int(i * step)] for i in range(min(args.subsample, len(indices)))]
    payload = {"video_id": args.video_id or Path(args.clip).name, "k": config.total_k,
               "preset": config.preset, "indices": indices}
    _out(_dump(payload), args.out)
    return EXIT_OK


def cmd_augment(args) -> int:
    clip = read_clip(args.clip)
    plan = plan_augmentation(args.seed)
    write_clip(apply_augmentation(plan, clip), args.out)
    print(_dump(plan.to_json()), end="", file=sys.stderr)
    return EXIT_OK


def cmd_stats(args) -> int:
    tbl = load_metric_table(args.metrics)
    st = aggregate_stats(tbl, args.regime, args.set)
    _out(_dump({"regime": args.regime, "test_set": args.set, **st.as_dict()}))
    return EXIT_OK


def cmd_verify_paper(args) -> int:
    result = verify_paper(args.aggregation, args.eqod_combine)
    for line in result.lines():
        print(line)
    n_rep = result.claims.count("reproduced")
    print(f"fixture: {result.fixture_origin}; {n_rep} claims reproduced, "
          f"{len(result.claims) - n_rep} documented discrepancies; exit {result.exit_code}")
    return result.exit_code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fairscope", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"fairscope {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def agg_opts(sp):
        sp.add_argument("--aggregation", choices=["mean", "max"], default="mean")
        sp.add_argument("--eqod-combine", choices=["mean", "max", "sum"], default="mean")

    sp = sub.add_parser("ingest", help="validate a prediction CSV and print it normalized")
    sp.add_argument("--records", required=True)
    sp.add_argument("--fuse", action="store_true", help="collapse six-way labels into the four-class taxonomy")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("audit", help="full audit of a prediction CSV")
    sp.add_argument("--records", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--csv-dir", help="also write metrics.csv, gaps.csv and stats.csv here")
    sp.add_argument("--fuse", action="store_true")
    agg_opts(sp)
    sp.set_defaults(func=cmd_audit)

    sp = sub.add_parser("gaps", help="fairness gaps from a metric CSV")
    sp.add_argument("--metrics", required=True)
    sp.add_argument("--definition", choices=["dp", "eqop", "eqod"], required=True)
    sp.add_argument("--regime", choices=["regular", "female", "male"], required=True)
    sp.add_argument("--rank", action="store_true")
    sp.add_argument("--out")
    agg_opts(sp)
    sp.set_defaults(func=cmd_gaps)

    sp = sub.add_parser("split", help="subject-disjoint train/val/test split")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--test-seed", type=int, required=True)
    sp.add_argument("--val-seed", type=int, required=True)
    sp.add_argument("--test-per-gender", type=int, default=5)
    sp.add_argument("--val-subjects", type=int, default=8)
    sp.add_argument("--val-fraction", type=float)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_split)

    sp = sub.add_parser("keyframes", help="k-means keyframe indices for a clip directory")
    sp.add_argument("--clip", required=True)
    sp.add_argument("--preset", choices=list(PRESETS), required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--video-id")
    sp.add_argument("--subsample", type=int, help="evenly keep this many of the selected frames")
    sp.set_defaults(func=cmd_keyframes)

    sp = sub.add_parser("augment", help="apply a seeded augmentation plan to a clip directory")
    sp.add_argument("--clip", required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_augment)

    sp = sub.add_parser("stats", help="box-plot statistics of per-class accuracy")
    sp.add_argument("--metrics", required=True)
    sp.add_argument("--regime", choices=["regular", "female", "male"], required=True)
    sp.add_argument("--set", choices=["test", "female", "male"], required=True)
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("verify-paper", help="replay the bundled appendix tables and check the registered claims")
    agg_opts(sp)
    sp.set_defaults(func=cmd_verify_paper)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (FairscopeError, OSError, ValueError) as exc:
        print(f"fairscope: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
