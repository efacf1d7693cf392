import json

import numpy as np
import pytest

from conftest import make_image, make_pool, random_pool
from divacq import (
    ClassCounts,
    PoolFormatError,
    load_labeled_stats,
    load_pool,
    save_labeled_stats,
    save_pool,
)


def write_lines(path, lines):
    path.write_text("\n".join(json.dumps(obj) for obj in lines) + "\n")


HEADER = {"format_version": 1, "feature_dim": 4, "num_classes": 3}


def record(image_id, instances):
    return {"image_id": image_id, "instances": instances}


def inst(category, score, feature, bbox=None):
    out = {"category": category, "score": score, "feature": feature}
    if bbox is not None:
        out["bbox"] = bbox
    return out


def test_load_two_valid_records(tmp_path):
    path = tmp_path / "pool.jsonl"
    write_lines(
        path,
        [
            HEADER,
            record("a", [inst(0, 0.5, [1, 2, 3, 4]), inst(2, 0.9, [0, 0, 1, 0])]),
            record("b", [inst(1, 0.4, [1, 0, 0, 0])]),
        ],
    )
    pool = load_pool(path)
    assert len(pool) == 2
    assert pool.image_ids == ["a", "b"]
    assert pool.feature_dim == 4 and pool.num_classes == 3
    assert [ins.category for ins in pool.by_id["a"].instances] == [0, 2]
    assert pool.dropped_low_score == 0


def test_feature_dimension_mismatch_names_image(tmp_path):
    path = tmp_path / "pool.jsonl"
    write_lines(path, [HEADER, record("bad-img", [inst(0, 0.5, [1, 2, 3])])])
    with pytest.raises(PoolFormatError, match=r"bad-img"):
        load_pool(path)


def test_header_only_file_is_an_error(tmp_path):
    path = tmp_path / "pool.jsonl"
    write_lines(path, [HEADER])
    with pytest.raises(PoolFormatError, match="no image records"):
        load_pool(path)


def test_missing_header(tmp_path):
    path = tmp_path / "pool.jsonl"
    path.write_text("\n")
    with pytest.raises(PoolFormatError, match="line 1"):
        load_pool(path)


def test_unsupported_version(tmp_path):
    path = tmp_path / "pool.jsonl"
    write_lines(path, [{**HEADER, "format_version": 9}, record("a", [])])
    with pytest.raises(PoolFormatError, match="format_version 9"):
        load_pool(path)


def test_invalid_json_reports_line_number(tmp_path):
    path = tmp_path / "pool.jsonl"
    path.write_text(json.dumps(HEADER) + "\n" + json.dumps(record("a", [])) + "\nnot json\n")
    with pytest.raises(PoolFormatError, match="line 3"):
        load_pool(path)


def test_duplicate_image_id(tmp_path):
    path = tmp_path / "pool.jsonl"
    write_lines(path, [HEADER, record("a", []), record("a", [])])
    with pytest.raises(PoolFormatError, match="duplicate image_id"):
        load_pool(path)


def test_category_and_score_validation(tmp_path):
    path = tmp_path / "pool.jsonl"
    write_lines(path, [HEADER, record("a", [inst(3, 0.5, [0, 0, 0, 0])])])
    with pytest.raises(PoolFormatError, match="category 3 out of range"):
        load_pool(path)
    write_lines(path, [HEADER, record("a", [inst(0, 1.5, [0, 0, 0, 0])])])
    with pytest.raises(PoolFormatError, match="score 1.5"):
        load_pool(path)


def test_bbox_arity_checked_and_value_kept(tmp_path):
    path = tmp_path / "pool.jsonl"
    write_lines(path, [HEADER, record("a", [inst(0, 0.5, [0, 0, 0, 1], bbox=[1, 2])])])
    with pytest.raises(PoolFormatError, match="bbox"):
        load_pool(path)
    write_lines(
        path, [HEADER, record("a", [inst(0, 0.5, [0, 0, 0, 1], bbox=[1, 2, 3, 4])])]
    )
    assert load_pool(path).by_id["a"].instances[0].bbox == (1.0, 2.0, 3.0, 4.0)


def test_score_floor_drops_and_reindexes(tmp_path):
    path = tmp_path / "pool.jsonl"
    write_lines(
        path,
        [
            HEADER,
            record(
                "a",
                [
                    inst(0, 0.01, [1, 0, 0, 0]),
                    inst(1, 0.5, [0, 1, 0, 0]),
                    inst(2, 0.04, [0, 0, 1, 0]),
                ],
            ),
            record("b", [inst(0, 0.02, [1, 1, 1, 1])]),
        ],
    )
    pool = load_pool(path, score_floor=0.05)
    assert pool.dropped_low_score == 3
    kept = pool.by_id["a"].instances
    assert [ins.category for ins in kept] == [1]
    assert kept[0].index == 0
    # image 'b' loses everything but stays in the pool
    assert len(pool.by_id["b"]) == 0
    assert len(load_pool(path, score_floor=0.0).by_id["a"]) == 3


def test_round_trip_is_bit_exact_at_declared_width(tmp_path):
    rng = np.random.default_rng(7)
    pool = random_pool(rng, 20, 5, 6, max_instances=8)
    first = tmp_path / "first.jsonl"
    save_pool(pool, first)
    loaded = load_pool(first, score_floor=0.0)
    assert loaded.image_ids == pool.image_ids
    for img in pool.images:
        other = loaded.by_id[img.image_id]
        assert [i.category for i in img.instances] == [i.category for i in other.instances]
        assert [i.score for i in img.instances] == [i.score for i in other.instances]
        # quantizing the original to float32 must reproduce the loaded values exactly
        want = img.features.astype(np.float32).astype(np.float64)
        got = other.features
        assert want.shape == got.shape
        assert np.array_equal(want, got)
    second = tmp_path / "second.jsonl"
    save_pool(loaded, second)
    assert first.read_text() == second.read_text()


def test_labeled_stats_fill_in(tmp_path):
    path = tmp_path / "stats.json"
    path.write_text(json.dumps({"num_classes": 3, "counts": {"0": 5, "2": 1}}))
    assert load_labeled_stats(path).counts.tolist() == [5, 0, 1]
    path.write_text(json.dumps({"num_classes": 2, "counts": {}}))
    assert load_labeled_stats(path).counts.tolist() == [0, 0]


def test_labeled_stats_validation(tmp_path):
    path = tmp_path / "stats.json"
    path.write_text(json.dumps({"num_classes": 3, "counts": {"5": 1}}))
    with pytest.raises(PoolFormatError, match="out of range"):
        load_labeled_stats(path)
    path.write_text(json.dumps({"num_classes": 3, "counts": {"1": -2}}))
    with pytest.raises(PoolFormatError, match="negative"):
        load_labeled_stats(path)
    path.write_text(json.dumps({"counts": {}}))
    with pytest.raises(PoolFormatError, match="num_classes"):
        load_labeled_stats(path)


def test_labeled_stats_round_trip(tmp_path):
    path = tmp_path / "stats.json"
    counts = ClassCounts(np.array([4, 0, 7, 1]))
    save_labeled_stats(counts, path)
    assert load_labeled_stats(path).counts.tolist() == [4, 0, 7, 1]


def test_class_counts_rejects_bad_shapes():
    with pytest.raises(PoolFormatError):
        ClassCounts(np.zeros((2, 2)))
    with pytest.raises(PoolFormatError):
        ClassCounts(np.array([1, -1]))


def test_presence_is_max_score_per_category():
    pool = make_pool(
        [make_image("a", [(0, 0.2, [1, 0]), (0, 0.8, [0, 1]), (2, 0.4, [1, 1])])],
        num_classes=3,
        feature_dim=2,
    )
    assert pool.by_id["a"].presence == {0: 0.8, 2: 0.4}
