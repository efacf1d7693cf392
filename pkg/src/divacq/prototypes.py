"""Entropy-weighted per-class prototypes of an image's instances.

For each category present in an image, the prototype is the convex
combination of that category's feature vectors weighted by instance
entropy, so uncertain instances pull the prototype toward themselves and
confident ones contribute little.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .pool import ImagePrediction
from .uncertainty import image_entropies

WEIGHT_EPS = 1e-12


@dataclass
class PrototypeSet:
    """category -> prototype vector for one image (absent classes omitted)."""

    image_id: str
    by_class: dict[int, np.ndarray]


def image_prototypes(
    image: ImagePrediction,
    entropies: Sequence[float] | None = None,
    instance_subset: Sequence[int] | None = None,
) -> PrototypeSet:
    """Aggregate instance features into one prototype per category.

    ``instance_subset`` restricts aggregation to the given instance
    indices (used when prototypes should reflect only ENMS-retained
    instances); by default every instance participates. If a category's
    entropy weights all vanish (every instance certain), its prototype
    falls back to the unweighted mean of the category's features.
    """
    if entropies is None:
        entropies = image_entropies(image)
    # ascending index order keeps float accumulation canonical regardless
    # of the order the subset was discovered in
    indices = (
        range(len(image.instances))
        if instance_subset is None
        else sorted(instance_subset)
    )
    members: dict[int, list[int]] = {}
    for k in indices:
        members.setdefault(image.instances[k].category, []).append(k)
    features = image.features
    by_class: dict[int, np.ndarray] = {}
    for category in sorted(members):
        rows = members[category]
        weights = np.array([entropies[k] for k in rows], dtype=np.float64)
        denom = float(weights.sum())
        if denom < WEIGHT_EPS:
            by_class[category] = features[rows].mean(axis=0)
        else:
            by_class[category] = (weights @ features[rows]) / denom
    return PrototypeSet(image.image_id, by_class)
