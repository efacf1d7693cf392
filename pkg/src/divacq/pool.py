"""Prediction-pool data model and JSONL wire-format ingestion.

A pool file is JSONL: the first line is a header object declaring
``format_version``, ``feature_dim`` and ``num_classes``; every following
line is one image record with its post-NMS instance predictions.
Features are stored as 32-bit floats on disk; everything downstream
computes in float64.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
DEFAULT_SCORE_FLOOR = 0.05


class PoolFormatError(ValueError):
    """Malformed or inconsistent pool / stats file content."""


@dataclass
class InstancePrediction:
    """One predicted box: class id, confidence and embedding vector.

    ``bbox`` is carried through for audit output only; nothing in the
    selection pipeline reads it.
    """

    index: int
    category: int
    score: float
    feature: np.ndarray
    bbox: tuple[float, float, float, float] | None = None


@dataclass
class ImagePrediction:
    """All instance predictions of a single unlabeled image."""

    image_id: str
    instances: tuple[InstancePrediction, ...]

    def __len__(self) -> int:
        return len(self.instances)

    @cached_property
    def categories(self) -> np.ndarray:
        return np.array([ins.category for ins in self.instances], dtype=np.int64)

    @cached_property
    def scores(self) -> np.ndarray:
        return np.array([ins.score for ins in self.instances], dtype=np.float64)

    @cached_property
    def features(self) -> np.ndarray:
        """(t, d) float64 matrix; shape (0, 0) for an empty image."""
        if not self.instances:
            return np.zeros((0, 0), dtype=np.float64)
        return np.stack([ins.feature for ins in self.instances]).astype(np.float64)

    @cached_property
    def presence(self) -> dict[int, float]:
        """category -> max confidence among its instances (empty -> {})."""
        out: dict[int, float] = {}
        for ins in self.instances:
            prev = out.get(ins.category)
            if prev is None or ins.score > prev:
                out[ins.category] = ins.score
        return out


@dataclass
class Pool:
    """Validated, immutable-by-convention collection of image predictions."""

    feature_dim: int
    num_classes: int
    images: tuple[ImagePrediction, ...]
    dropped_low_score: int = 0
    by_id: dict[str, ImagePrediction] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if not self.by_id:
            self.by_id = {img.image_id: img for img in self.images}

    def __len__(self) -> int:
        return len(self.images)

    @property
    def image_ids(self) -> list[str]:
        return [img.image_id for img in self.images]


@dataclass
class ClassCounts:
    """Per-category instance counts over the labeled set."""

    counts: np.ndarray  # int64, length num_classes

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 1:
            raise PoolFormatError("class counts must be one-dimensional")
        if (self.counts < 0).any():
            raise PoolFormatError("class counts must be non-negative")

    @property
    def num_classes(self) -> int:
        return int(self.counts.shape[0])


def _parse_instance(
    raw: dict,
    *,
    line_no: int,
    image_id: str,
    feature_dim: int,
    num_classes: int,
) -> tuple[int, float, np.ndarray, tuple | None]:
    try:
        category = int(raw["category"])
        score = float(raw["score"])
        feature = raw["feature"]
    except (KeyError, TypeError, ValueError) as exc:
        raise PoolFormatError(
            f"line {line_no}: bad instance record in image_id={image_id!r}: {exc}"
        ) from None
    if not 0 <= category < num_classes:
        raise PoolFormatError(
            f"line {line_no}: category {category} out of range [0, {num_classes}) "
            f"in image_id={image_id!r}"
        )
    if not 0.0 <= score <= 1.0:
        raise PoolFormatError(
            f"line {line_no}: score {score} outside [0, 1] in image_id={image_id!r}"
        )
    if len(feature) != feature_dim:
        raise PoolFormatError(
            f"line {line_no}: feature length {len(feature)} != feature_dim "
            f"{feature_dim} in image_id={image_id!r}"
        )
    # quantize to the declared 32-bit width, then compute in 64-bit
    vec = np.asarray(feature, dtype=np.float32).astype(np.float64)
    bbox = raw.get("bbox")
    if bbox is not None:
        if len(bbox) != 4:
            raise PoolFormatError(
                f"line {line_no}: bbox must have 4 entries in image_id={image_id!r}"
            )
        bbox = tuple(float(v) for v in bbox)
    return category, score, vec, bbox


def load_pool(path: str | Path, score_floor: float = DEFAULT_SCORE_FLOOR) -> Pool:
    """Stream a JSONL pool file into a validated :class:`Pool`.

    Instances whose score falls below ``score_floor`` are dropped and
    counted in ``Pool.dropped_low_score``. Errors carry the 1-based line
    number and, where known, the offending image_id.
    """
    path = Path(path)
    images: list[ImagePrediction] = []
    seen: set[str] = set()
    dropped = 0
    with path.open("r", encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line.strip():
            raise PoolFormatError("line 1: missing header line")
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise PoolFormatError(f"line 1: header is not valid JSON: {exc}") from None
        try:
            version = int(header["format_version"])
            feature_dim = int(header["feature_dim"])
            num_classes = int(header["num_classes"])
        except (KeyError, TypeError, ValueError):
            raise PoolFormatError(
                "line 1: header must declare format_version, feature_dim, num_classes"
            ) from None
        if version != FORMAT_VERSION:
            raise PoolFormatError(f"line 1: unsupported format_version {version}")
        if feature_dim < 1 or num_classes < 1:
            raise PoolFormatError("line 1: feature_dim and num_classes must be >= 1")

        for line_no, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise PoolFormatError(f"line {line_no}: invalid JSON: {exc}") from None
            image_id = record.get("image_id")
            if not isinstance(image_id, str) or not image_id:
                raise PoolFormatError(f"line {line_no}: missing or empty image_id")
            if image_id in seen:
                raise PoolFormatError(f"line {line_no}: duplicate image_id={image_id!r}")
            seen.add(image_id)
            raw_instances = record.get("instances", [])
            if not isinstance(raw_instances, list):
                raise PoolFormatError(
                    f"line {line_no}: instances must be a list in image_id={image_id!r}"
                )
            instances: list[InstancePrediction] = []
            for raw in raw_instances:
                category, score, vec, bbox = _parse_instance(
                    raw,
                    line_no=line_no,
                    image_id=image_id,
                    feature_dim=feature_dim,
                    num_classes=num_classes,
                )
                if score < score_floor:
                    dropped += 1
                    continue
                instances.append(
                    InstancePrediction(len(instances), category, score, vec, bbox)
                )
            images.append(ImagePrediction(image_id, tuple(instances)))

    if not images:
        raise PoolFormatError("pool file contains a header but no image records")
    return Pool(feature_dim, num_classes, tuple(images), dropped_low_score=dropped)


def save_pool(pool: Pool, path: str | Path) -> None:
    """Write ``pool`` in the JSONL wire format (features at 32-bit width)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        header = {
            "format_version": FORMAT_VERSION,
            "feature_dim": pool.feature_dim,
            "num_classes": pool.num_classes,
        }
        fh.write(json.dumps(header) + "\n")
        for img in pool.images:
            record = {
                "image_id": img.image_id,
                "instances": [
                    {
                        "category": ins.category,
                        "score": ins.score,
                        "feature": [float(np.float32(v)) for v in ins.feature],
                        **({"bbox": list(ins.bbox)} if ins.bbox is not None else {}),
                    }
                    for ins in img.instances
                ],
            }
            fh.write(json.dumps(record) + "\n")


def load_labeled_stats(path: str | Path) -> ClassCounts:
    """Read labeled-set class counts: {"num_classes": C, "counts": {id: n}}.

    Absent categories default to 0.
    """
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise PoolFormatError(f"stats file is not valid JSON: {exc}") from None
    try:
        num_classes = int(payload["num_classes"])
        raw_counts = payload.get("counts", {})
    except (KeyError, TypeError, ValueError):
        raise PoolFormatError("stats file must declare num_classes") from None
    if num_classes < 1:
        raise PoolFormatError("num_classes must be >= 1")
    if not isinstance(raw_counts, dict):
        raise PoolFormatError("stats counts must map category ids to counts")
    counts = np.zeros(num_classes, dtype=np.int64)
    for key, value in raw_counts.items():
        try:
            category = int(key)
            count = int(value)
        except (TypeError, ValueError):
            raise PoolFormatError(f"bad stats entry {key!r}: {value!r}") from None
        if not 0 <= category < num_classes:
            raise PoolFormatError(
                f"stats category {category} out of range [0, {num_classes})"
            )
        if count < 0:
            raise PoolFormatError(f"negative count for category {category}")
        counts[category] = count
    return ClassCounts(counts)


def save_labeled_stats(counts: ClassCounts, path: str | Path) -> None:
    """Write class counts in the labeled-stats wire format (zeros omitted)."""
    payload = {
        "num_classes": counts.num_classes,
        "counts": {str(c): int(v) for c, v in enumerate(counts.counts) if v},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
