"""Foreground/background binary entropy of detections.

Entropies are in nats. The per-instance value treats the confidence
score as the foreground probability and its complement as background;
the image-level score is the plain sum over instances.
"""

from __future__ import annotations

import math

from .pool import ImagePrediction

CLAMP_EPS = 1e-12


def instance_entropy(p: float) -> float:
    """Binary entropy -p*ln(p) - (1-p)*ln(1-p) of one confidence score.

    ``p`` is clamped to [1e-12, 1 - 1e-12] before evaluation, so the
    result is finite and lies in [0, ln 2]. Raises ValueError outside
    [0, 1].
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p} outside [0, 1]")
    q = min(max(p, CLAMP_EPS), 1.0 - CLAMP_EPS)
    return -q * math.log(q) - (1.0 - q) * math.log(1.0 - q)


def image_entropies(image: ImagePrediction) -> list[float]:
    """Per-instance entropies in instance order."""
    return [instance_entropy(ins.score) for ins in image.instances]


def basic_image_entropy(image: ImagePrediction) -> float:
    """Sum of instance entropies; 0.0 for an empty image.

    Accumulated left-to-right in instance order so the result is exactly
    the sum of the :func:`instance_entropy` values.
    """
    total = 0.0
    for ins in image.instances:
        total += instance_entropy(ins.score)
    return total
