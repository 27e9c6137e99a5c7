import math

import numpy as np
import pytest

import openinc


def test_blobs_shape_and_determinism():
    a = openinc.generate_blobs(num_classes=4, samples_per_class=10, input_dim=3, seed=2)
    b = openinc.generate_blobs(num_classes=4, samples_per_class=10, input_dim=3, seed=2)
    assert a["inputs"].shape == (40, 3)
    assert a["split"].count("train") == 32
    assert np.array_equal(a["inputs"], b["inputs"])
    assert a["fingerprint"] == b["fingerprint"]


def test_loss_values():
    assert openinc.ce_loss(np.zeros((2, 4)), [0, 3]) == pytest.approx(math.log(4))
    proj = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
    assert openinc.supcon_loss(proj, [0, 0, 1, 1], tau=1.0) > 0.0
    logits = np.array([[1.0, -1.0], [0.5, 0.2]])
    assert openinc.response_kd_loss(logits, logits) == pytest.approx(0.0, abs=1e-12)
    feats = np.random.default_rng(0).normal(size=(6, 3))
    assert openinc.rkd_loss(feats, feats) == pytest.approx(0.0, abs=1e-12)
    assert openinc.rkd_loss(feats, 2.0 * feats) > 0.0


def test_osr_pieces():
    assert openinc.auroc([0.9, 0.8], [0.8, 0.1]) == 0.875
    score, predicted = openinc.osr_score([0.6, 0.4])
    assert score == pytest.approx(0.6)
    assert predicted == 0
    sims = openinc.knn_class_similarity([0.0, 3.0], {0: np.array([[1.0, 0.0]]), 1: np.array([[0.0, 1.0]])}, 1)
    assert sims == pytest.approx([0.0, 1.0])
    indices, ranks = openinc.isometric_select(np.arange(10.0).reshape(10, 1), 5)
    assert ranks == [0, 2, 4, 6, 8]
    assert len(indices) == 5


def test_spread_report():
    r = openinc.spread_report(np.array([[0.0, 0.0], [2.0, 0.0], [10.0, 0.0], [10.0, 2.0]]), [4, 4, 7, 7])
    assert r["s_intra"] == 1.0
    assert r["s_inter"] == 82.0


def test_errors_map_to_exceptions():
    with pytest.raises(openinc.OpenIncError, match="EmptySide"):
        openinc.auroc([], [0.1])
    with pytest.raises(openinc.ConfigError, match="alpha_kd"):
        openinc.validate_config({"dataset": "default", "methods": ["supcon_rkd"], "seeds": [1], "alpha_kd": 0.2})


def test_small_run():
    reports = openinc.run_method(
        "supcon_rkd",
        seed=3,
        dataset={"blobs": {"num_classes": 6, "samples_per_class": 20, "input_dim": 5}},
        epochs_base=2,
        epochs_incremental=2,
        memory=8,
        hidden_dims=[8],
        feature_dim=4,
        proj_dim=3,
    )
    assert [r["classes"] for r in reports] == [2, 4]
    assert all(0.0 <= r["accuracy"] <= 1.0 for r in reports)
    assert reports[-1]["auroc"] is not None


def test_experiment_tree(tmp_path):
    config = {
        "dataset": {"blobs": {"num_classes": 6, "samples_per_class": 20, "input_dim": 5}},
        "methods": ["ce_joint"],
        "seeds": [1, 2],
        "epochs_base": 2,
        "output_dir": str(tmp_path),
    }
    code, log = openinc.run_experiment(config)
    assert code == 0, log
    assert (tmp_path / "summary.csv").exists()
    assert (tmp_path / "ce_joint" / "seed_2" / "results.csv").exists()
