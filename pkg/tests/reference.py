"""Pure-Python reference implementations used as test oracles.

Everything here works on plain lists and floats, no numpy, written
directly from the algorithm definitions. Production code must agree
with these on discrete outputs exactly and on similarity values to
tight float tolerance.
"""

from __future__ import annotations

import math

CLAMP = 1e-12
ZERO_NORM = 1e-12


def ref_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p} outside [0, 1]")
    p = min(max(p, CLAMP), 1.0 - CLAMP)
    return -p * math.log(p) - (1.0 - p) * math.log(1.0 - p)


def ref_cosine(f: list[float], g: list[float]) -> float:
    nf = math.sqrt(sum(v * v for v in f))
    ng = math.sqrt(sum(v * v for v in g))
    if nf < ZERO_NORM or ng < ZERO_NORM:
        return 0.0
    dot = sum(a * b for a, b in zip(f, g))
    return dot / (nf * ng)


def _instances(image) -> list[tuple[int, float, list[float]]]:
    """Primitive (category, score, feature) triples for one image."""
    return [
        (int(ins.category), float(ins.score), [float(v) for v in ins.feature])
        for ins in image.instances
    ]


def ref_enms(image, t_enms: float) -> tuple[float, list[int]]:
    """Greedy entropy-ordered suppression; returns (E, picks in order)."""
    rows = _instances(image)
    h = [ref_entropy(score) for _, score, _ in rows]
    alive = set(range(len(rows)))
    picks: list[int] = []
    e = 0.0
    while alive:
        best = None
        for k in sorted(alive):
            if best is None or h[k] > h[best]:
                best = k
        picks.append(best)
        alive.remove(best)
        e += h[best]
        cat_b, _, feat_b = rows[best]
        for k in sorted(alive):
            cat_k, _, feat_k = rows[k]
            if cat_k == cat_b and ref_cosine(feat_b, feat_k) > t_enms:
                alive.remove(k)
    return e, picks


def ref_prototypes(image, subset: list[int] | None = None) -> dict[int, list[float]]:
    """Entropy-weighted per-class feature means with unweighted fallback."""
    rows = _instances(image)
    members = range(len(rows)) if subset is None else subset
    by_class: dict[int, list[int]] = {}
    for k in members:
        by_class.setdefault(rows[k][0], []).append(k)

    out: dict[int, list[float]] = {}
    for cat in sorted(by_class):
        ks = sorted(by_class[cat])
        dim = len(rows[ks[0]][2])
        denom = 0.0
        for k in ks:
            denom += ref_entropy(rows[k][1])
        proto = [0.0] * dim
        if denom < CLAMP:
            for k in ks:
                for j in range(dim):
                    proto[j] += rows[k][2][j]
            out[cat] = [v / len(ks) for v in proto]
        else:
            for k in ks:
                w = ref_entropy(rows[k][1])
                for j in range(dim):
                    proto[j] += w * rows[k][2][j]
            out[cat] = [v / denom for v in proto]
    return out


def ref_presence(image) -> dict[int, float]:
    out: dict[int, float] = {}
    for cat, score, _ in _instances(image):
        if score > out.get(cat, -1.0):
            out[cat] = score
    return out


def ref_minority(counts: list[int], alpha: float, beta: float, b: int):
    """(minority ids count-ascending, quota per class)."""
    c = len(counts)
    n_minor = min(c, max(1, int(math.floor(alpha * c + 0.5))))
    order = sorted(range(c), key=lambda cat: (counts[cat], cat))
    quota = max(1, math.floor(beta * b / (alpha * c)))
    return order[:n_minor], quota


def ref_divproto(pool, counts: list[int], cfg) -> dict:
    """Literal two-phase selection; returns selection, audit, trajectory.

    Trajectory entries snapshot the quota ledger after every balanced
    decision so ledger evolution can be compared step by step.
    """
    per_image = {}
    for image in pool.images:
        e, picks = ref_enms(image, cfg.t_enms)
        subset = picks if cfg.prototype_source == "enms_retained" else None
        per_image[image.image_id] = {
            "e": e,
            "picks": picks,
            "protos": ref_prototypes(image, subset),
            "presence": ref_presence(image),
        }

    minority, quota = ref_minority(counts, cfg.alpha, cfg.beta, cfg.budget_b)
    minority = list(minority)
    quotas = {cat: quota for cat in minority}
    order = sorted(per_image, key=lambda i: (-per_image[i]["e"], i))
    b_eff = min(cfg.budget_b, len(order))

    selected: list[str] = []
    audit: list[dict] = []
    trajectory: list[dict] = []

    for image_id in order:
        if len(selected) >= b_eff or not minority:
            break
        info = per_image[image_id]

        m_g = None
        for cat in sorted(info["protos"]):
            best_for_cat = None
            for sel_id in selected:
                other = per_image[sel_id]["protos"]
                if cat in other:
                    sim = ref_cosine(other[cat], info["protos"][cat])
                    if best_for_cat is None or sim > best_for_cat:
                        best_for_cat = sim
            if best_for_cat is not None:
                m_g = best_for_cat if m_g is None else min(m_g, best_for_cat)
        m_g = 0.0 if m_g is None else m_g
        m_p = max((info["presence"].get(c, 0.0) for c in minority), default=0.0)

        accepted = m_g < cfg.t_intra and m_p > cfg.t_inter
        decremented: list[int] = []
        if accepted:
            selected.append(image_id)
            for cat in list(minority):
                if info["presence"].get(cat, 0.0) > cfg.t_inter:
                    quotas[cat] -= 1
                    decremented.append(cat)
                    if quotas[cat] == 0:
                        minority.remove(cat)
                        del quotas[cat]
        audit.append(
            {
                "image_id": image_id,
                "phase": "balanced",
                "accepted": accepted,
                "entropy_e": info["e"],
                "m_g": m_g,
                "m_p": m_p,
                "decremented": tuple(decremented),
            }
        )
        trajectory.append(
            {
                "image_id": image_id,
                "minority": list(minority),
                "quotas": dict(quotas),
            }
        )

    for image_id in order:
        if len(selected) >= b_eff:
            break
        if image_id in selected:
            continue
        selected.append(image_id)
        audit.append(
            {
                "image_id": image_id,
                "phase": "fillup",
                "accepted": True,
                "entropy_e": per_image[image_id]["e"],
                "m_g": None,
                "m_p": None,
                "decremented": (),
            }
        )

    return {
        "selected": selected,
        "audit": audit,
        "trajectory": trajectory,
        "initial_minority": list(ref_minority(counts, cfg.alpha, cfg.beta, cfg.budget_b)[0]),
        "initial_quota": quota,
    }
