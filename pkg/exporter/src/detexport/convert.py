"""Convert detector dumps into acquisition pool and stats files.

The input shape is the common detection-dump trio: a JSON list of
detections ({image_id, category_id, bbox, score}), a dense 2-D feature
array whose row k belongs to detection k, and a remap table assigning
each raw category id a contiguous id in [0, C). Features are read with
numpy's standard binary array container (shape header included), so
any file written by ``numpy.save`` works regardless of extension.
"""

import json
from pathlib import Path

import numpy as np


class ExportError(ValueError):
    """Input file violates the expected dump shape."""


def load_remap(path: str | Path) -> dict[int, int]:
    """Read a {raw category id: engine id} table; must cover [0, C) exactly."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict) or not raw:
        raise ExportError("remap must be a non-empty JSON object")
    remap = {}
    for key, value in raw.items():
        try:
            remap[int(key)] = int(value)
        except (TypeError, ValueError):
            raise ExportError(f"remap entry {key!r}: {value!r} is not an id pair")
    if sorted(remap.values()) != list(range(len(remap))):
        raise ExportError(
            f"remap values must cover 0..{len(remap) - 1} exactly once"
        )
    return remap


def load_results(path: str | Path) -> list[dict]:
    """Read the detection list; every entry needs id, category and score."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        raise ExportError("results must be a JSON list of detections")
    for k, det in enumerate(raw):
        if not isinstance(det, dict):
            raise ExportError(f"detection {k} is not an object")
        for field in ("image_id", "category_id", "score"):
            if field not in det:
                raise ExportError(f"detection {k}: missing {field!r}")
        if not isinstance(det["score"], (int, float)):
            raise ExportError(f"detection {k}: score must be a number")
        bbox = det.get("bbox")
        if bbox is not None and (
            not isinstance(bbox, list)
            or len(bbox) != 4
            or not all(isinstance(v, (int, float)) for v in bbox)
        ):
            raise ExportError(f"detection {k}: bbox must hold 4 numbers")
    return raw


def load_features(path: str | Path) -> np.ndarray:
    try:
        feats = np.load(path, allow_pickle=False)
    except ValueError as exc:
        raise ExportError(f"feature file is not a plain binary array: {exc}")
    if feats.ndim != 2:
        raise ExportError(f"feature array must be 2-D, got shape {feats.shape}")
    return feats


def export_pool(
    results: list[dict],
    features: np.ndarray,
    remap: dict[int, int],
    score_floor: float,
    out_path: str | Path,
) -> dict:
    """Group detections by image and write one pool record per image.

    Detections scoring strictly below the floor are dropped (an image
    that loses all of them still gets a record, with an empty instance
    list). Images appear in order of first appearance in the results
    list; instances keep dump order. Features are quantized to 32-bit
    floats, matching the pool file convention. Returns drop counters.
    """
    if len(results) != features.shape[0]:
        raise ExportError(
            f"feature rows ({features.shape[0]}) do not match "
            f"detection count ({len(results)})"
        )
    if not 0.0 <= score_floor <= 1.0:
        raise ExportError(f"score floor {score_floor} outside [0, 1]")

    grouped: dict[str, list] = {}
    kept = dropped = 0
    for k, det in enumerate(results):
        image_id = str(det["image_id"])
        instances = grouped.setdefault(image_id, [])
        raw_cat = det["category_id"]
        try:
            category = remap[int(raw_cat)]
        except (KeyError, TypeError, ValueError):
            raise ExportError(f"unmapped category id {raw_cat!r} at detection {k}")
        score = float(det["score"])
        if score < score_floor:
            dropped += 1
            continue
        kept += 1
        record = {
            "category": category,
            "score": score,
            "feature": [float(np.float32(v)) for v in features[k]],
        }
        if det.get("bbox") is not None:
            record["bbox"] = [float(v) for v in det["bbox"]]
        instances.append(record)

    header = {
        "format_version": 1,
        "feature_dim": int(features.shape[1]),
        "num_classes": len(remap),
    }
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for image_id, instances in grouped.items():
            fh.write(
                json.dumps({"image_id": image_id, "instances": instances}) + "\n"
            )
    return {
        "images": len(grouped),
        "instances_kept": kept,
        "instances_dropped": dropped,
        "feature_dim": int(features.shape[1]),
        "num_classes": len(remap),
    }


def load_annotations(path: str | Path) -> list[dict]:
    """Read annotation entries from a bare list or an {annotations: []} file."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if isinstance(raw, dict):
        raw = raw.get("annotations")
    if not isinstance(raw, list):
        raise ExportError("annotation file must hold a list (or an object with one)")
    for k, ann in enumerate(raw):
        if not isinstance(ann, dict) or "category_id" not in ann:
            raise ExportError(f"annotation {k}: missing category_id")
    return raw


def export_labeled_stats(
    annotations: list[dict],
    remap: dict[int, int],
    out_path: str | Path,
) -> dict:
    """Count ground-truth instances per remapped category; write stats JSON."""
    counts = [0] * len(remap)
    for k, ann in enumerate(annotations):
        raw_cat = ann["category_id"]
        try:
            counts[remap[int(raw_cat)]] += 1
        except (KeyError, TypeError, ValueError):
            raise ExportError(f"unmapped category id {raw_cat!r} at annotation {k}")
    payload = {
        "num_classes": len(remap),
        "counts": {str(c): n for c, n in enumerate(counts) if n > 0},
    }
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    return {"annotations": len(annotations), "num_classes": len(remap)}
