"""Entropy-based non-maximum suppression over instance predictions.

Greedily keeps the highest-entropy instance of an image and suppresses
remaining same-category instances whose feature cosine similarity to the
kept one exceeds a threshold, accumulating the image-level entropy over
the kept instances.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .pool import ImagePrediction
from .uncertainty import image_entropies

ZERO_NORM_EPS = 1e-12


@dataclass
class ImageScore:
    """Suppression outcome for one image.

    ``retained`` lists instance indices in pick order (non-increasing
    entropy); ``entropy_e`` is the sum of their entropies.
    """

    image_id: str
    entropy_e: float
    retained: tuple[int, ...]


def cosine_similarity(f: np.ndarray, g: np.ndarray) -> float:
    """Cosine of the angle between two feature vectors, in [-1, 1].

    Defined as 0 when either vector has norm below 1e-12, so degenerate
    embeddings neither suppress nor get suppressed.
    """
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if f.shape != g.shape:
        raise ValueError(f"dimension mismatch: {f.shape} vs {g.shape}")
    nf = np.linalg.norm(f)
    ng = np.linalg.norm(g)
    if nf < ZERO_NORM_EPS or ng < ZERO_NORM_EPS:
        return 0.0
    return float(np.dot(f, g) / (nf * ng))


def unit_rows(features: np.ndarray) -> np.ndarray:
    """Row-normalize a (t, d) matrix; rows with norm < 1e-12 become zero."""
    if features.size == 0:
        return features
    norms = np.linalg.norm(features, axis=1, keepdims=True)
    safe = np.where(norms < ZERO_NORM_EPS, 1.0, norms)
    out = features / safe
    out[norms[:, 0] < ZERO_NORM_EPS] = 0.0
    return out


def enms_image(
    image: ImagePrediction,
    t_enms: float,
    entropies: Sequence[float] | None = None,
) -> ImageScore:
    """Run ENMS on one image and report its refined entropy.

    Repeatedly picks the remaining instance with the largest entropy
    (ties broken by lowest instance index), adds its entropy to the
    image total, then drops every remaining instance of the same
    category whose cosine similarity to the pick is strictly above
    ``t_enms``. Similarities are evaluated lazily against the current
    pick only.
    """
    if not -1.0 <= t_enms <= 1.0:
        raise ValueError(f"t_enms {t_enms} outside [-1, 1]")
    if entropies is None:
        entropies = image_entropies(image)
    t = len(image.instances)
    if t == 0:
        return ImageScore(image.image_id, 0.0, ())

    units = unit_rows(image.features)
    categories = image.categories
    remaining = list(range(t))
    picks: list[int] = []
    total = 0.0
    while remaining:
        best = remaining[0]
        for k in remaining[1:]:
            if entropies[k] > entropies[best]:
                best = k
        remaining.remove(best)
        picks.append(best)
        total += entropies[best]
        if remaining:
            same = [j for j in remaining if categories[j] == categories[best]]
            if same:
                sims = units[same] @ units[best]
                doomed = {j for j, s in zip(same, sims) if s > t_enms}
                if doomed:
                    remaining = [j for j in remaining if j not in doomed]
    return ImageScore(image.image_id, total, tuple(picks))
