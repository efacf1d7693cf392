"""Diverse-prototype batch acquisition.

Images are scanned in order of decreasing ENMS entropy and accepted when
they are dissimilar to the already-acquired set (intra-class check) and
likely to contain an under-represented class (inter-class check backed
by per-class quotas). Whatever budget the balanced scan leaves open is
filled with the highest-entropy remaining images.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Iterable, Sequence

import numpy as np

from .enms import ZERO_NORM_EPS, cosine_similarity, enms_image
from .parallel import parallel_map
from .pool import ClassCounts, ImagePrediction, Pool, DEFAULT_SCORE_FLOOR
from .prototypes import PrototypeSet, image_prototypes
from .uncertainty import image_entropies

PROTOTYPE_SOURCES = ("all", "enms_retained")


@dataclass
class AcquisitionConfig:
    """Thresholds, ratios and budget for one acquisition run."""

    budget_b: int
    t_enms: float = 0.5
    t_intra: float = 0.7
    t_inter: float = 0.3
    alpha: float = 0.5
    beta: float = 0.75
    score_floor: float = DEFAULT_SCORE_FLOOR
    prototype_source: str = "all"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.budget_b < 1:
            raise ValueError(f"budget_b must be >= 1, got {self.budget_b}")
        if not -1.0 <= self.t_enms <= 1.0:
            raise ValueError(f"t_enms {self.t_enms} outside [-1, 1]")
        if not -1.0 <= self.t_intra <= 1.0:
            raise ValueError(f"t_intra {self.t_intra} outside [-1, 1]")
        if not 0.0 <= self.t_inter <= 1.0:
            raise ValueError(f"t_inter {self.t_inter} outside [0, 1]")
        if not 0.0 < self.alpha < self.beta < 1.0:
            raise ValueError(
                f"need 0 < alpha < beta < 1, got alpha={self.alpha} beta={self.beta}"
            )
        if not 0.0 <= self.score_floor < 1.0:
            raise ValueError(f"score_floor {self.score_floor} outside [0, 1)")
        if self.prototype_source not in PROTOTYPE_SOURCES:
            raise ValueError(
                f"prototype_source must be one of {PROTOTYPE_SOURCES}, "
                f"got {self.prototype_source!r}"
            )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class QuotaLedger:
    """Minority class ids (count-ascending order) with remaining budgets."""

    minority: list[int]
    quotas: dict[int, int]


@dataclass
class AuditRecord:
    """Decision trace for one scanned or filled image."""

    image_id: str
    phase: str  # "balanced" | "fillup" (baselines use their policy name)
    accepted: bool
    entropy_e: float | None = None
    m_g: float | None = None
    m_p: float | None = None
    decremented: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "phase": self.phase,
            "accepted": self.accepted,
            "entropy_e": self.entropy_e,
            "m_g": self.m_g,
            "m_p": self.m_p,
            "decremented": list(self.decremented),
        }


@dataclass
class AcquisitionResult:
    """Ordered selection plus the per-image decision audit."""

    selected: list[str]
    audit: list[AuditRecord]
    budget_truncated: bool = False
    config_echo: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "selected": list(self.selected),
            "audit": [rec.to_dict() for rec in self.audit],
            "budget_truncated": self.budget_truncated,
            "config_echo": self.config_echo,
        }


@dataclass
class ScoredImage:
    """Per-image scoring bundle shared by the selection policies."""

    image_id: str
    entropy_e: float
    retained: tuple[int, ...]
    prototypes: dict[int, np.ndarray]
    prototypes_unit: dict[int, np.ndarray]
    presence: dict[int, float]


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def build_minority_set(counts: ClassCounts, cfg: AcquisitionConfig) -> QuotaLedger:
    """Pick the alpha*C least-frequent classes and grant each a quota.

    Minority size is max(1, round(alpha*C)) with half-up rounding; ties
    on counts break toward the lower category id. Every minority class
    receives quota max(1, floor(beta*b / (alpha*C))).
    """
    c = counts.num_classes
    if c < 2:
        raise ValueError("need at least 2 classes to split off a minority set")
    n_minor = min(c, max(1, _round_half_up(cfg.alpha * c)))
    order = sorted(range(c), key=lambda cat: (int(counts.counts[cat]), cat))
    minority = order[:n_minor]
    quota = max(1, math.floor(cfg.beta * cfg.budget_b / (cfg.alpha * c)))
    return QuotaLedger(minority=minority, quotas={cat: quota for cat in minority})


def class_presence(image: ImagePrediction, category: int) -> float:
    """Max confidence among instances of ``category``; 0.0 when absent."""
    return image.presence.get(category, 0.0)


def inter_class_metric(image: ImagePrediction, ledger: QuotaLedger) -> float:
    """Highest presence of any current minority class; 0.0 if none remain."""
    if not ledger.minority:
        return 0.0
    return max(class_presence(image, c) for c in ledger.minority)


def intra_class_metric(
    candidate: PrototypeSet, selected: Iterable[PrototypeSet]
) -> float:
    """Redundancy of a candidate against already-selected prototype sets.

    Per category held by both the candidate and at least one selected
    image, take the max prototype similarity over the selected images;
    the metric is the min of those maxima. When no category is shared
    (including an empty selected set) the metric is 0, which never
    rejects.
    """
    best: float | None = None
    selected = list(selected)
    for category in sorted(candidate.by_class):
        sims = [
            cosine_similarity(ps.by_class[category], candidate.by_class[category])
            for ps in selected
            if category in ps.by_class
        ]
        if not sims:
            continue
        high = max(sims)
        best = high if best is None else min(best, high)
    return 0.0 if best is None else best


def _unit(vec: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(vec)
    if norm < ZERO_NORM_EPS:
        return np.zeros_like(vec)
    return vec / norm


def score_image(image: ImagePrediction, cfg: AcquisitionConfig) -> ScoredImage:
    """ENMS entropy, prototypes and class presences for one image."""
    entropies = image_entropies(image)
    score = enms_image(image, cfg.t_enms, entropies)
    subset = score.retained if cfg.prototype_source == "enms_retained" else None
    protos = image_prototypes(image, entropies, subset).by_class
    return ScoredImage(
        image_id=image.image_id,
        entropy_e=score.entropy_e,
        retained=score.retained,
        prototypes=protos,
        prototypes_unit={c: _unit(v) for c, v in protos.items()},
        presence=image.presence,
    )


def score_pool(
    pool: Pool, cfg: AcquisitionConfig, threads: int = 1
) -> dict[str, ScoredImage]:
    """Per-image scoring pass; a deterministic parallel map keyed by id."""
    scored = parallel_map(lambda img: score_image(img, cfg), pool.images, threads)
    return {s.image_id: s for s in scored}


class _SelectedProtoIndex:
    """Growing per-class stack of unit prototypes of the accepted images."""

    def __init__(self, capacity: int, dim: int) -> None:
        self.capacity = capacity
        self.dim = dim
        self._buffers: dict[int, np.ndarray] = {}
        self._sizes: dict[int, int] = {}

    def add(self, protos_unit: dict[int, np.ndarray]) -> None:
        for category, unit in protos_unit.items():
            buf = self._buffers.get(category)
            if buf is None:
                buf = np.empty((self.capacity, self.dim), dtype=np.float64)
                self._buffers[category] = buf
                self._sizes[category] = 0
            n = self._sizes[category]
            buf[n] = unit
            self._sizes[category] = n + 1

    def intra_metric(self, protos_unit: dict[int, np.ndarray]) -> float:
        best: float | None = None
        for category in sorted(protos_unit):
            n = self._sizes.get(category, 0)
            if n == 0:
                continue
            sims = self._buffers[category][:n] @ protos_unit[category]
            high = float(sims.max())
            best = high if best is None else min(best, high)
        return 0.0 if best is None else best


def entropy_sorted_ids(scored: dict[str, ScoredImage]) -> list[str]:
    """Image ids by decreasing entropy, ties by ascending id."""
    return sorted(scored, key=lambda i: (-scored[i].entropy_e, i))


def divproto_select(
    pool: Pool,
    counts: ClassCounts,
    cfg: AcquisitionConfig,
    threads: int = 1,
    scored: dict[str, ScoredImage] | None = None,
) -> AcquisitionResult:
    """Run the full two-phase acquisition over a pool.

    Phase one scans images in entropy order and accepts those passing
    both diversity checks, decrementing the quota of every minority
    class the image plausibly contains; it stops when the budget is
    met, the minority set empties, or the list ends. Phase two fills
    any remaining budget with the highest-entropy leftovers.
    """
    if counts.num_classes != pool.num_classes:
        raise ValueError(
            f"counts declare {counts.num_classes} classes, pool {pool.num_classes}"
        )
    if scored is None:
        scored = score_pool(pool, cfg, threads)
    ledger = build_minority_set(counts, cfg)
    order = entropy_sorted_ids(scored)
    b_eff = min(cfg.budget_b, len(pool))

    index = _SelectedProtoIndex(b_eff, pool.feature_dim)
    selected: list[str] = []
    taken: set[str] = set()
    audit: list[AuditRecord] = []

    for image_id in order:
        if len(selected) >= b_eff or not ledger.minority:
            break
        s = scored[image_id]
        m_g = index.intra_metric(s.prototypes_unit)
        m_p = (
            max(s.presence.get(c, 0.0) for c in ledger.minority)
            if ledger.minority
            else 0.0
        )
        accepted = m_g < cfg.t_intra and m_p > cfg.t_inter
        decremented: list[int] = []
        if accepted:
            selected.append(image_id)
            taken.add(image_id)
            index.add(s.prototypes_unit)
            for category in list(ledger.minority):
                if s.presence.get(category, 0.0) > cfg.t_inter:
                    ledger.quotas[category] -= 1
                    decremented.append(category)
                    if ledger.quotas[category] == 0:
                        ledger.minority.remove(category)
                        del ledger.quotas[category]
        audit.append(
            AuditRecord(
                image_id=image_id,
                phase="balanced",
                accepted=accepted,
                entropy_e=s.entropy_e,
                m_g=m_g,
                m_p=m_p,
                decremented=tuple(decremented),
            )
        )

    for image_id in order:
        if len(selected) >= b_eff:
            break
        if image_id in taken:
            continue
        selected.append(image_id)
        taken.add(image_id)
        audit.append(
            AuditRecord(
                image_id=image_id,
                phase="fillup",
                accepted=True,
                entropy_e=scored[image_id].entropy_e,
            )
        )

    return AcquisitionResult(
        selected=selected,
        audit=audit,
        budget_truncated=cfg.budget_b > len(pool),
        config_echo={"policy": "divproto", **cfg.to_dict()},
    )
