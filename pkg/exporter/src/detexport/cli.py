"""Command entry points: export-pool and export-stats."""

import argparse
import sys

from .convert import (
    export_labeled_stats,
    export_pool,
    load_annotations,
    load_features,
    load_remap,
    load_results,
)


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def main_pool(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="export-pool",
        description="convert a detection dump into a pool JSONL file",
    )
    parser.add_argument("--results", required=True, help="detection list JSON")
    parser.add_argument("--features", required=True, help="per-detection array file")
    parser.add_argument("--remap", required=True, help="raw-to-engine category JSON")
    parser.add_argument("--score-floor", type=float, default=0.05)
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    try:
        summary = export_pool(
            load_results(args.results),
            load_features(args.features),
            load_remap(args.remap),
            args.score_floor,
            args.out,
        )
    except ValueError as exc:
        return _fail(str(exc), 2)
    except OSError as exc:
        return _fail(str(exc), 1)
    print(
        f"wrote {args.out}: {summary['images']} images, "
        f"{summary['instances_kept']} instances kept, "
        f"{summary['instances_dropped']} below floor"
    )
    return 0


def main_stats(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="export-stats",
        description="count labeled instances per category into a stats file",
    )
    parser.add_argument("--annotations", required=True, help="annotation JSON")
    parser.add_argument("--remap", required=True, help="raw-to-engine category JSON")
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    try:
        summary = export_labeled_stats(
            load_annotations(args.annotations), load_remap(args.remap), args.out
        )
    except ValueError as exc:
        return _fail(str(exc), 2)
    except OSError as exc:
        return _fail(str(exc), 1)
    print(
        f"wrote {args.out}: {summary['annotations']} annotations over "
        f"{summary['num_classes']} classes"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main_pool())
