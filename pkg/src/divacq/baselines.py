"""Comparison acquisition policies behind one interface.

Every policy maps (pool, labeled counts, config) to an
:class:`AcquisitionResult` with exactly min(budget, pool size) unique
image ids. Randomized policies draw from numpy's default PCG64
generator seeded with ``cfg.seed`` so runs are reproducible across
machines.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .divproto import (
    AcquisitionConfig,
    AcquisitionResult,
    AuditRecord,
    divproto_select,
)
from .enms import enms_image, unit_rows
from .parallel import parallel_map
from .pool import ClassCounts, Pool
from .uncertainty import basic_image_entropy

UB_GUARD_MAX_IMAGES = 2000

POLICY_IDS = (
    "random",
    "entropy_topk",
    "coreset_kcenter",
    "ub_pairwise",
    "enms_only",
    "divproto",
)


class GuardLimitError(ValueError):
    """Pool too large for the deliberately quadratic UB selector."""

    def __init__(self, n_images: int, n_instances: int, limit: int) -> None:
        self.n_images = n_images
        self.n_instances = n_instances
        self.limit = limit
        super().__init__(
            f"ub_pairwise guard: pool has {n_images} images "
            f"({n_instances} instances), limit is {limit} images; "
            f"pass force to run anyway"
        )


def _echo(policy: str, cfg: AcquisitionConfig) -> dict:
    return {"policy": policy, **cfg.to_dict()}


def random_select(pool: Pool, cfg: AcquisitionConfig) -> AcquisitionResult:
    """Uniform sample without replacement, reproducible from cfg.seed.

    Fixed recipe: permute the images in file order with
    ``np.random.default_rng(seed).permutation`` and take the first
    min(b, n).
    """
    rng = np.random.default_rng(cfg.seed)
    ids = pool.image_ids
    k = min(cfg.budget_b, len(ids))
    perm = rng.permutation(len(ids))
    selected = [ids[i] for i in perm[:k]]
    audit = [AuditRecord(i, "random", True) for i in selected]
    return AcquisitionResult(
        selected, audit, cfg.budget_b > len(pool), _echo("random", cfg)
    )


def _topk_by(pool: Pool, entropies: dict[str, float], b: int) -> list[str]:
    order = sorted(pool.image_ids, key=lambda i: (-entropies[i], i))
    return order[: min(b, len(order))]


def entropy_topk_select(pool: Pool, cfg: AcquisitionConfig, threads: int = 1) -> AcquisitionResult:
    """Top-b images by basic detection entropy, ties by ascending id."""
    values = parallel_map(basic_image_entropy, pool.images, threads)
    entropies = {img.image_id: e for img, e in zip(pool.images, values)}
    selected = _topk_by(pool, entropies, cfg.budget_b)
    audit = [
        AuditRecord(i, "entropy_topk", True, entropy_e=entropies[i]) for i in selected
    ]
    return AcquisitionResult(
        selected, audit, cfg.budget_b > len(pool), _echo("entropy_topk", cfg)
    )


def enms_only_select(pool: Pool, cfg: AcquisitionConfig, threads: int = 1) -> AcquisitionResult:
    """Top-b images by ENMS-refined entropy, ties by ascending id."""
    scores = parallel_map(lambda img: enms_image(img, cfg.t_enms), pool.images, threads)
    entropies = {s.image_id: s.entropy_e for s in scores}
    selected = _topk_by(pool, entropies, cfg.budget_b)
    audit = [
        AuditRecord(i, "enms_only", True, entropy_e=entropies[i]) for i in selected
    ]
    return AcquisitionResult(
        selected, audit, cfg.budget_b > len(pool), _echo("enms_only", cfg)
    )


def image_level_features(pool: Pool) -> np.ndarray:
    """(n, d) matrix of unweighted instance-feature means (zeros if empty)."""
    out = np.zeros((len(pool), pool.feature_dim), dtype=np.float64)
    for row, img in enumerate(pool.images):
        if len(img):
            out[row] = img.features.mean(axis=0)
    return out


def coreset_kcenter_select(
    pool: Pool,
    cfg: AcquisitionConfig,
    initial_centers: Iterable[str] = (),
) -> AcquisitionResult:
    """Greedy k-center over image-level mean features.

    Each step adds the image with the largest Euclidean distance to its
    nearest center. With no initial centers the first pick is the image
    with the largest feature norm. Distance ties break toward the
    ascending image_id.
    """
    centers = set(initial_centers)
    unknown = centers - set(pool.by_id)
    if unknown:
        raise ValueError(f"initial centers not in pool: {sorted(unknown)}")

    # id-sorted ordering makes argmax resolve ties toward the lower id
    ids = sorted(pool.image_ids)
    feats_by_id = {
        img.image_id: row for img, row in zip(pool.images, image_level_features(pool))
    }
    x = np.stack([feats_by_id[i] for i in ids])
    candidate = np.array([i not in centers for i in ids])

    selected: list[str] = []
    b_eff = min(cfg.budget_b, int(candidate.sum()))
    if centers:
        center_rows = np.stack([feats_by_id[i] for i in sorted(centers)])
        mins = np.min(
            np.linalg.norm(x[:, None, :] - center_rows[None, :, :], axis=2), axis=1
        )
    else:
        mins = None

    for _ in range(b_eff):
        if mins is None:
            gain = np.linalg.norm(x, axis=1)
        else:
            gain = mins.copy()
        gain[~candidate] = -np.inf
        pick = int(np.argmax(gain))
        picked_id = ids[pick]
        selected.append(picked_id)
        candidate[pick] = False
        dist = np.linalg.norm(x - x[pick], axis=1)
        mins = dist if mins is None else np.minimum(mins, dist)

    audit = [AuditRecord(i, "coreset_kcenter", True) for i in selected]
    return AcquisitionResult(
        selected, audit, cfg.budget_b > len(pool), _echo("coreset_kcenter", cfg)
    )


def ub_pairwise_select(
    pool: Pool,
    cfg: AcquisitionConfig,
    force: bool = False,
    threads: int = 1,
) -> AcquisitionResult:
    """Naive global instance-pairwise greedy selection (benchmark foil).

    Each step re-derives, for every remaining image, the maximum cosine
    similarity between its instances and every instance of every
    already-selected image, then picks the image maximizing
    entropy - max_similarity. No similarity is cached between steps, so
    per-step cost grows with candidates x selected instances. Guarded by
    a pool-size limit unless ``force`` is set.
    """
    n_instances = sum(len(img) for img in pool.images)
    if len(pool) > UB_GUARD_MAX_IMAGES and not force:
        raise GuardLimitError(len(pool), n_instances, UB_GUARD_MAX_IMAGES)

    scores = parallel_map(lambda img: enms_image(img, cfg.t_enms), pool.images, threads)
    entropy = {s.image_id: s.entropy_e for s in scores}
    ids = sorted(pool.image_ids)
    feats = {i: pool.by_id[i].features for i in ids}

    selected: list[str] = []
    remaining = list(ids)
    b_eff = min(cfg.budget_b, len(pool))
    while len(selected) < b_eff:
        stacks = [feats[i] for i in selected if feats[i].size]
        sel_units = unit_rows(np.vstack(stacks)) if stacks else None
        best_id = None
        best_score = -np.inf
        for image_id in remaining:
            penalty = 0.0
            f = feats[image_id]
            if sel_units is not None and f.size:
                sims = unit_rows(f) @ sel_units.T
                penalty = float(sims.max())
            score = entropy[image_id] - penalty
            if score > best_score:
                best_score = score
                best_id = image_id
        selected.append(best_id)
        remaining.remove(best_id)

    audit = [
        AuditRecord(i, "ub_pairwise", True, entropy_e=entropy[i]) for i in selected
    ]
    return AcquisitionResult(
        selected, audit, cfg.budget_b > len(pool), _echo("ub_pairwise", cfg)
    )


def select(
    policy: str,
    pool: Pool,
    counts: ClassCounts | None,
    cfg: AcquisitionConfig,
    threads: int = 1,
    force: bool = False,
) -> AcquisitionResult:
    """Dispatch one policy by id; divproto requires labeled counts."""
    if policy not in POLICY_IDS:
        raise ValueError(f"unknown policy {policy!r}; known: {', '.join(POLICY_IDS)}")
    if policy == "random":
        return random_select(pool, cfg)
    if policy == "entropy_topk":
        return entropy_topk_select(pool, cfg, threads)
    if policy == "enms_only":
        return enms_only_select(pool, cfg, threads)
    if policy == "coreset_kcenter":
        return coreset_kcenter_select(pool, cfg)
    if policy == "ub_pairwise":
        return ub_pairwise_select(pool, cfg, force=force, threads=threads)
    if counts is None:
        raise ValueError("policy divproto requires labeled class counts")
    return divproto_select(pool, counts, cfg, threads)
