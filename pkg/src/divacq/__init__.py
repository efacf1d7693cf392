"""Batch active-learning acquisition for object-detection prediction pools.

Two-stage hybrid strategy: entropy-based non-maximum suppression refines
per-image uncertainty, then diverse prototype selection spends the
labeling budget across images under minority-class quotas. Ships with
baseline policies, a synthetic-pool simulator, and a CLI.
"""

from .baselines import (
    GuardLimitError,
    POLICY_IDS,
    UB_GUARD_MAX_IMAGES,
    coreset_kcenter_select,
    entropy_topk_select,
    enms_only_select,
    random_select,
    select,
    ub_pairwise_select,
)
from .divproto import (
    AcquisitionConfig,
    AcquisitionResult,
    AuditRecord,
    QuotaLedger,
    build_minority_set,
    class_presence,
    divproto_select,
    entropy_sorted_ids,
    inter_class_metric,
    intra_class_metric,
    score_image,
    score_pool,
)
from .enms import ImageScore, cosine_similarity, enms_image, unit_rows
from .pool import (
    ClassCounts,
    ImagePrediction,
    InstancePrediction,
    Pool,
    PoolFormatError,
    load_labeled_stats,
    load_pool,
    save_labeled_stats,
    save_pool,
)
from .prototypes import PrototypeSet, image_prototypes
from .simloop import (
    CycleEntry,
    CycleReport,
    SimSpec,
    class_balance_stddev,
    generate_pool,
    prototype_dispersion,
    run_cycles,
    target_class_distribution,
    write_metrics_csv,
)
from .uncertainty import basic_image_entropy, image_entropies, instance_entropy

__all__ = [
    "AcquisitionConfig",
    "AcquisitionResult",
    "AuditRecord",
    "ClassCounts",
    "CycleEntry",
    "CycleReport",
    "GuardLimitError",
    "ImagePrediction",
    "ImageScore",
    "InstancePrediction",
    "POLICY_IDS",
    "Pool",
    "PoolFormatError",
    "PrototypeSet",
    "QuotaLedger",
    "SimSpec",
    "UB_GUARD_MAX_IMAGES",
    "basic_image_entropy",
    "build_minority_set",
    "class_balance_stddev",
    "class_presence",
    "coreset_kcenter_select",
    "cosine_similarity",
    "divproto_select",
    "enms_image",
    "enms_only_select",
    "entropy_sorted_ids",
    "entropy_topk_select",
    "generate_pool",
    "image_entropies",
    "image_prototypes",
    "instance_entropy",
    "inter_class_metric",
    "intra_class_metric",
    "load_labeled_stats",
    "load_pool",
    "prototype_dispersion",
    "random_select",
    "run_cycles",
    "save_labeled_stats",
    "save_pool",
    "score_image",
    "score_pool",
    "select",
    "target_class_distribution",
    "ub_pairwise_select",
    "unit_rows",
    "write_metrics_csv",
]

__version__ = "0.1.0"
