"""Command-line front door: select, simulate, bench, stats.

Exit codes are fixed: 0 success, 1 I/O failure, 2 validation error with
a single-line machine-parsable reason on stderr. Config files are flat
JSON objects whose keys mirror AcquisitionConfig field names; explicit
flags win over file values.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .baselines import POLICY_IDS, select
from .divproto import AcquisitionConfig
from .enms import enms_image
from .parallel import parallel_map
from .pool import (
    DEFAULT_SCORE_FLOOR,
    ClassCounts,
    Pool,
    load_labeled_stats,
    load_pool,
)
from .prototypes import image_prototypes
from .simloop import (
    SimSpec,
    class_balance_stddev,
    generate_pool,
    prototype_dispersion,
    run_cycles,
)

CONFIG_KEYS = tuple(AcquisitionConfig.__dataclass_fields__)


class UsageError(ValueError):
    """Bad flags or bad input values; maps to exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def _fail(code: int, message: str) -> int:
    line = " ; ".join(part.strip() for part in str(message).splitlines() if part.strip())
    print(f"error: {line}", file=sys.stderr)
    return code


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _load_config_file(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise UsageError("config file must hold a flat JSON object")
    unknown = set(raw) - set(CONFIG_KEYS)
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    return raw


def _merged_config(args: argparse.Namespace) -> dict:
    """Defaults < config file < explicit flags."""
    merged = _load_config_file(args.config) if getattr(args, "config", None) else {}
    flag_map = {
        "budget_b": getattr(args, "budget", None),
        "seed": getattr(args, "seed", None),
        "score_floor": getattr(args, "score_floor", None),
        "t_enms": getattr(args, "t_enms", None),
        "t_intra": getattr(args, "t_intra", None),
        "t_inter": getattr(args, "t_inter", None),
        "alpha": getattr(args, "alpha", None),
        "beta": getattr(args, "beta", None),
        "prototype_source": getattr(args, "prototype_source", None),
    }
    merged.update({k: v for k, v in flag_map.items() if v is not None})
    return merged


def _resolve_config(args: argparse.Namespace, default_budget: int | None = None) -> AcquisitionConfig:
    merged = _merged_config(args)
    if "budget_b" not in merged:
        if default_budget is None:
            raise UsageError("missing --budget (or budget_b in --config)")
        merged["budget_b"] = default_budget
    return AcquisitionConfig(**merged)


def _score_floor(args: argparse.Namespace) -> float:
    merged = _merged_config(args)
    return float(merged.get("score_floor", DEFAULT_SCORE_FLOOR))


def _check_policy(policy: str) -> None:
    if policy not in POLICY_IDS:
        raise UsageError(f"unknown policy {policy!r}; known: {', '.join(POLICY_IDS)}")


def _default_budget(pool_size: int) -> int:
    """One cycle labels 5% of the pool when no budget is given."""
    return max(1, round(0.05 * pool_size))


def cmd_select(args: argparse.Namespace) -> int:
    _check_policy(args.policy)
    pool = load_pool(args.pool, _score_floor(args))
    cfg = _resolve_config(args)
    counts = load_labeled_stats(args.labeled_stats) if args.labeled_stats else None
    if args.policy == "divproto" and counts is None:
        raise UsageError("policy divproto requires --labeled-stats")

    result = select(args.policy, pool, counts, cfg, threads=args.threads, force=args.force)
    payload = result.to_json_dict()
    payload["config_echo"].update(
        command="select",
        pool=str(args.pool),
        labeled_stats=str(args.labeled_stats) if args.labeled_stats else None,
        threads=args.threads,
        force=args.force,
        out=str(args.out),
    )
    _write_json(args.out, payload)
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    _check_policy(args.policy)
    if args.cycles < 1:
        raise UsageError("--cycles must be >= 1")
    spec = SimSpec.from_json_file(args.spec)
    if args.seed is not None:
        spec.seed = args.seed
    cfg = _resolve_config(args, default_budget=_default_budget(spec.num_images))

    report = run_cycles(spec, args.policy, cfg, args.cycles, threads=args.threads, force=args.force)
    payload = report.to_json_dict()
    payload["config_echo"].update(
        command="simulate",
        spec=str(args.spec),
        threads=args.threads,
        force=args.force,
        out=str(args.out),
    )
    _write_json(args.out, payload)
    return 0


def _bench_table(rows: list[dict]) -> str:
    header = ("policy", "seconds", "selected")
    cells = [
        (r["policy"], f"{r['seconds']:.3f}", str(r["num_selected"])) for r in rows
    ]
    widths = [max(len(h), *(len(c[i]) for c in cells)) for i, h in enumerate(header)]
    lines = [
        f"{header[0]:<{widths[0]}}  {header[1]:>{widths[1]}}  {header[2]:>{widths[2]}}"
    ]
    for c in cells:
        lines.append(f"{c[0]:<{widths[0]}}  {c[1]:>{widths[1]}}  {c[2]:>{widths[2]}}")
    return "\n".join(lines)


def cmd_bench(args: argparse.Namespace) -> int:
    if bool(args.pool) == bool(args.spec):
        raise UsageError("bench needs exactly one of --pool or --spec")
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    if not policies:
        raise UsageError("--policies must name at least one policy")
    for policy in policies:
        _check_policy(policy)

    if args.pool:
        pool = load_pool(args.pool, _score_floor(args))
    else:
        spec = SimSpec.from_json_file(args.spec)
        if args.seed is not None:
            spec.seed = args.seed
        pool, _ = generate_pool(spec)
    counts = (
        load_labeled_stats(args.labeled_stats)
        if args.labeled_stats
        else ClassCounts(np.zeros(pool.num_classes, dtype=np.int64))
    )
    cfg = _resolve_config(args, default_budget=_default_budget(len(pool)))

    rows = []
    for policy in policies:
        started = time.perf_counter()
        result = select(policy, pool, counts, cfg, threads=args.threads, force=args.force)
        rows.append(
            {
                "policy": policy,
                "seconds": time.perf_counter() - started,
                "num_selected": len(result.selected),
            }
        )
    payload = {
        "config_echo": {
            "command": "bench",
            "policies": policies,
            "pool": str(args.pool) if args.pool else None,
            "spec": str(args.spec) if args.spec else None,
            "labeled_stats": str(args.labeled_stats) if args.labeled_stats else None,
            "threads": args.threads,
            "force": args.force,
            "out": str(args.out),
            **cfg.to_dict(),
        },
        "rows": rows,
    }
    _write_json(args.out, payload)
    print(_bench_table(rows))
    return 0


def _load_selection(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict) or not isinstance(raw.get("selected"), list):
        raise UsageError("selection file must hold an object with a 'selected' list")
    ids = raw["selected"]
    if not all(isinstance(i, str) for i in ids):
        raise UsageError("selection ids must be strings")
    return ids


def cmd_stats(args: argparse.Namespace) -> int:
    ids = _load_selection(args.selection)
    pool = load_pool(args.pool, _score_floor(args))
    missing = [i for i in ids if i not in pool.by_id]
    if missing:
        raise UsageError(
            f"selection ids not in pool: {missing[:5]}"
            + (" ..." if len(missing) > 5 else "")
        )

    merged = _merged_config(args)
    source = merged.get("prototype_source", "all")
    if source not in ("all", "enms_retained"):
        raise UsageError("prototype_source must be 'all' or 'enms_retained'")
    t_enms = float(merged.get("t_enms", 0.5))

    images = [pool.by_id[i] for i in ids]
    histogram = np.zeros(pool.num_classes, dtype=np.int64)
    for img in images:
        histogram += np.bincount(img.categories, minlength=pool.num_classes)

    base = (
        load_labeled_stats(args.labeled_stats).counts
        if args.labeled_stats
        else np.zeros(pool.num_classes, dtype=np.int64)
    )
    if base.shape[0] != pool.num_classes:
        raise UsageError(
            f"labeled stats cover {base.shape[0]} classes, pool has {pool.num_classes}"
        )

    def protos(img):
        subset = None
        if source == "enms_retained":
            subset = enms_image(img, t_enms).retained
        return image_prototypes(img, instance_subset=subset)

    vectors: dict[int, list] = {}
    for pset in parallel_map(protos, images, args.threads):
        for cat, proto in pset.by_class.items():
            vectors.setdefault(cat, []).append(proto)
    dispersion = {
        str(cat): prototype_dispersion(np.stack(rows))
        for cat, rows in sorted(vectors.items())
    }
    payload = {
        "config_echo": {
            "command": "stats",
            "selection": str(args.selection),
            "pool": str(args.pool),
            "labeled_stats": str(args.labeled_stats) if args.labeled_stats else None,
            "score_floor": _score_floor(args),
            "prototype_source": source,
            "t_enms": t_enms,
            "threads": args.threads,
            "out": str(args.out),
        },
        "num_selected": len(ids),
        "histogram": [int(v) for v in histogram],
        "class_balance_stddev": class_balance_stddev(histogram + base),
        "dispersion": dispersion,
        "prototypes": {
            str(cat): [[float(v) for v in row] for row in rows]
            for cat, rows in sorted(vectors.items())
        },
    }
    _write_json(args.out, payload)
    return 0


def _add_config_flags(p: argparse.ArgumentParser, budget: bool = True) -> None:
    if budget:
        p.add_argument("--budget", type=int, help="images to acquire per run/cycle")
    p.add_argument("--config", help="flat JSON config file; flags win")
    p.add_argument("--seed", type=int, help="override RNG seed")
    p.add_argument("--score-floor", type=float, dest="score_floor")
    p.add_argument("--t-enms", type=float, dest="t_enms")
    p.add_argument("--t-intra", type=float, dest="t_intra")
    p.add_argument("--t-inter", type=float, dest="t_inter")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument(
        "--prototype-source", dest="prototype_source", choices=["all", "enms_retained"]
    )


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threads", type=int, default=1, help="data-parallel scoring cap")
    p.add_argument("--force", action="store_true", help="lift size guards")
    p.add_argument("--out", required=True, help="output JSON path")


def build_parser() -> _Parser:
    parser = _Parser(prog="divacq", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("select", help="run one acquisition over a pool file")
    p.add_argument("--pool", required=True)
    p.add_argument("--labeled-stats", dest="labeled_stats")
    p.add_argument("--policy", default="divproto", help=f"one of {', '.join(POLICY_IDS)}")
    _add_config_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("simulate", help="multi-cycle loop on a synthetic pool")
    p.add_argument("--spec", required=True, help="SimSpec JSON file")
    p.add_argument("--policy", required=True)
    p.add_argument("--cycles", type=int, required=True)
    _add_config_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="time policies over one identical input")
    p.add_argument("--pool")
    p.add_argument("--spec")
    p.add_argument("--policies", required=True, help="comma-separated policy ids")
    p.add_argument("--labeled-stats", dest="labeled_stats")
    _add_config_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("stats", help="balance and dispersion metrics for a selection")
    p.add_argument("selection", help="AcquisitionResult JSON from select")
    p.add_argument("--pool", required=True)
    p.add_argument("--labeled-stats", dest="labeled_stats")
    _add_config_flags(p, budget=False)
    _add_common(p)
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except ValueError as exc:
        return _fail(2, str(exc))
    except OSError as exc:
        return _fail(1, str(exc))


if __name__ == "__main__":
    sys.exit(main())
