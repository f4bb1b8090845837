"""Bindings must return exactly what the core library computes.

Every check here compares bit patterns, not tolerances: the binding
layer delegates and must not perturb a single ulp.  The module skips
itself when the bindings package is not installed so the core test
suite stands alone.
"""

import struct
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

bindings = pytest.importorskip("salbench_bindings")

import salbench
from salbench.harness.evaluate import evaluate_directory
from salbench.losses import LOSSES, LossConfig, get_loss
from salbench.masks import load_binary_mask, load_saliency_map
from salbench.metrics import METRIC_NAMES, evaluate_pair

ALL_IDS = tuple(sorted(LOSSES))


def bits(x):
    return struct.pack("<d", float(x))


def random_pair(rng, size=8):
    pred = rng.uniform(0.05, 0.95, (size, size))
    gt = (rng.random((size, size)) < 0.5).astype(np.float64)
    return pred, gt


def test_version_mirrors_core():
    assert bindings.__version__ == salbench.__version__


class TestLossParity:
    @pytest.mark.parametrize("loss_id", ALL_IDS)
    def test_value_and_gradient_bitwise(self, loss_id):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            pred, gt = random_pair(rng)
            value, gradient = bindings.loss(loss_id, pred, gt)
            want = get_loss(loss_id)(pred, gt)
            assert bits(value) == bits(want.value)
            assert gradient.tobytes() == want.gradient.tobytes()
            assert gradient.shape == pred.shape

    def test_perfect_prediction_is_the_minimum(self):
        rng = np.random.default_rng(3)
        gt = (rng.random((8, 8)) < 0.5).astype(np.float64)
        best, _ = bindings.loss("ea", gt.copy(), gt)
        want = get_loss("ea")(gt.copy(), gt)
        assert bits(best) == bits(want.value)
        worse, _ = bindings.loss("ea", np.full((8, 8), 0.5), gt)
        assert best < worse

    def test_fc_gradient_round_trips_exactly(self):
        rng = np.random.default_rng(9)
        pred, gt = random_pair(rng)
        _, gradient = bindings.loss("fc", pred, gt)
        assert gradient.tobytes() == get_loss("fc")(pred, gt).gradient.tobytes()

    def test_config_mapping_reaches_the_core(self):
        rng = np.random.default_rng(21)
        pred, gt = random_pair(rng)
        ct0_v, ct0_g = bindings.loss("ct", pred, gt,
                                     config={"contour_weight": 0.0})
        bce_v, bce_g = bindings.loss("bce", pred, gt)
        assert bits(ct0_v) == bits(bce_v)
        assert ct0_g.tobytes() == bce_g.tobytes()
        assert bindings.loss("ct", pred, gt)[0] != ct0_v

    def test_loss_config_instance_accepted(self):
        rng = np.random.default_rng(22)
        pred, gt = random_pair(rng)
        via_obj = bindings.loss("fbeta", pred, gt, config=LossConfig(beta2=1.0))
        via_map = bindings.loss("fbeta", pred, gt, config={"beta2": 1.0})
        assert bits(via_obj[0]) == bits(via_map[0])

    def test_gradient_is_fresh_per_call(self):
        rng = np.random.default_rng(4)
        pred, gt = random_pair(rng)
        _, g1 = bindings.loss("dice", pred, gt)
        _, g2 = bindings.loss("dice", pred, gt)
        assert g1 is not g2
        assert not np.shares_memory(g1, g2)
        reference = g2.copy()
        g1[:] = 0.0
        _, g3 = bindings.loss("dice", pred, gt)
        assert g3.tobytes() == reference.tobytes()

    def test_flat_buffer_with_shape(self):
        rng = np.random.default_rng(5)
        pred, gt = random_pair(rng, size=4)
        flat = bindings.loss("iou", pred.ravel(), gt.ravel(), shape=(4, 4))
        square = bindings.loss("iou", pred, gt)
        assert bits(flat[0]) == bits(square[0])
        assert flat[1].tobytes() == square[1].tobytes()
        view = bindings.loss("iou", memoryview(np.ascontiguousarray(pred).ravel()),
                             gt.ravel(), shape=(4, 4))
        assert bits(view[0]) == bits(square[0])


class TestMetricsParity:
    def test_six_scores_bitwise(self):
        for seed in range(5):
            rng = np.random.default_rng(100 + seed)
            pred = rng.random((12, 12))
            gt = (rng.random((12, 12)) < 0.5).astype(np.float64)
            got = bindings.metrics(pred, gt)
            record, _ = evaluate_pair(pred, gt)
            assert tuple(got) == METRIC_NAMES
            for name in METRIC_NAMES:
                assert bits(got[name]) == bits(getattr(record, name)), name

    def test_perfect_prediction(self):
        rng = np.random.default_rng(6)
        gt = (rng.random((10, 10)) < 0.5).astype(np.float64)
        got = bindings.metrics(gt.copy(), gt)
        assert got["max_f"] == 1.0
        assert got["fbw"] == 1.0
        assert got["mae"] == 0.0
        assert got["s_measure"] > 0.95
        assert got["e_measure"] > 0.95
        record, _ = evaluate_pair(gt.copy(), gt)
        for name in METRIC_NAMES:
            assert bits(got[name]) == bits(getattr(record, name))

    def test_subset_and_overrides(self):
        rng = np.random.default_rng(7)
        pred = rng.random((9, 9))
        gt = (rng.random((9, 9)) < 0.5).astype(np.float64)
        got = bindings.metrics(pred, gt, options={"metrics": ("mae", "fbw")})
        assert sorted(got) == ["fbw", "mae"]
        sym = bindings.metrics(pred, gt, options={"beta2": 1.0})
        record, _ = evaluate_pair(pred, gt, beta2=1.0)
        assert bits(sym["max_f"]) == bits(record.max_f)
        assert sym["max_f"] != bindings.metrics(pred, gt)["max_f"]

    def test_matches_directory_evaluation(self, tmp_path):
        from PIL import Image

        rng = np.random.default_rng(8)
        pred_dir = tmp_path / "pred"
        gt_dir = tmp_path / "gt"
        pred_dir.mkdir()
        gt_dir.mkdir()
        for i in range(5):
            gt = (rng.random((16, 16)) < 0.4).astype(np.uint8) * 255
            pred = rng.integers(0, 256, size=(16, 16)).astype(np.uint8)
            Image.fromarray(gt, mode="L").save(gt_dir / ("im%02d.png" % i))
            Image.fromarray(pred, mode="L").save(pred_dir / ("im%02d.png" % i))
        report = evaluate_directory(str(pred_dir), str(gt_dir))
        for record in report.records:
            pred = load_saliency_map(str(pred_dir / (record.image_id + ".png")))
            gt = load_binary_mask(str(gt_dir / (record.image_id + ".png")))
            got = bindings.metrics(pred, gt)
            for name in METRIC_NAMES:
                assert bits(got[name]) == bits(getattr(record, name)), \
                    (record.image_id, name)


class TestErrorPassThrough:
    def test_non_binary_ground_truth(self):
        pred = np.full((4, 4), 0.5)
        soft = np.full((4, 4), 0.5)
        with pytest.raises(ValueError, match="must be binary"):
            bindings.loss("bce", pred, soft)
        with pytest.raises(ValueError, match="must be binary"):
            bindings.metrics(pred, soft)

    def test_shape_mismatch_names_both_shapes(self):
        pred = np.full((4, 4), 0.5)
        gt = np.zeros((3, 5))
        with pytest.raises(ValueError) as exc:
            bindings.loss("bce", pred, gt)
        assert "(4, 4)" in str(exc.value)
        assert "(3, 5)" in str(exc.value)
        with pytest.raises(ValueError) as exc:
            bindings.metrics(pred, gt)
        assert "(4, 4)" in str(exc.value)
        assert "(3, 5)" in str(exc.value)

    def test_unknown_loss_id(self):
        with pytest.raises(KeyError, match="unknown loss"):
            bindings.loss("focal", np.full((2, 2), 0.5), np.zeros((2, 2)))

    def test_out_of_range_prediction(self):
        with pytest.raises(ValueError, match=r"must lie in \[0, 1\]"):
            bindings.loss("bce", np.full((2, 2), 1.5), np.zeros((2, 2)))

    def test_unknown_option_key(self):
        with pytest.raises(TypeError, match="unknown options"):
            bindings.metrics(np.full((2, 2), 0.5), np.zeros((2, 2)),
                             options={"gamma": 2.0})

    def test_unknown_metric_name(self):
        with pytest.raises(ValueError, match="unknown metric"):
            bindings.metrics(np.full((2, 2), 0.5), np.zeros((2, 2)),
                             options={"metrics": ("auc",)})


def test_reentrant_across_threads():
    rng = np.random.default_rng(11)
    pairs = [random_pair(rng) for _ in range(16)]
    serial = [bindings.loss("ea", p, g) for p, g in pairs]
    with ThreadPoolExecutor(max_workers=4) as pool:
        threaded = list(pool.map(lambda pg: bindings.loss("ea", *pg), pairs))
    for (sv, sg), (tv, tg) in zip(serial, threaded):
        assert bits(sv) == bits(tv)
        assert sg.tobytes() == tg.tobytes()
