import numpy as np

from divacq import ImagePrediction, InstancePrediction, Pool


def make_image(image_id, rows):
    """rows: (category, score, feature-iterable) triples."""
    instances = tuple(
        InstancePrediction(k, cat, score, np.asarray(feat, dtype=np.float64))
        for k, (cat, score, feat) in enumerate(rows)
    )
    return ImagePrediction(image_id, instances)


def make_pool(images, num_classes, feature_dim):
    return Pool(feature_dim, num_classes, tuple(images))


def random_image(rng, image_id, num_classes, dim, max_instances, zero_norm_rate=0.05):
    t = int(rng.integers(0, max_instances + 1))
    rows = []
    for _ in range(t):
        feat = rng.standard_normal(dim)
        if rng.random() < zero_norm_rate:
            feat = np.zeros(dim)
        rows.append((int(rng.integers(0, num_classes)), float(rng.uniform()), feat))
    return make_image(image_id, rows)


def random_pool(rng, n_images, num_classes, dim, max_instances, zero_norm_rate=0.05):
    pad = len(str(max(n_images - 1, 1)))
    images = [
        random_image(rng, f"im{i:0{pad}d}", num_classes, dim, max_instances, zero_norm_rate)
        for i in range(n_images)
    ]
    return make_pool(images, num_classes, dim)
