import warnings

import numpy as np
import pytest

from cerml.dataset import Dataset, SetSpec, synthesize
from cerml.errors import ValidationError
from cerml.experiments import fixture_train_config
from cerml.pipeline import (baseline_rank1, build_kernels, evaluate, final_objective, prepare, score_matrix, train,
                            training_problem)


def test_synthesize_deterministic_and_shaped():
    a_tr, a_te = synthesize(3, 5, 4, 6, 2.0, seed=7)
    b_tr, b_te = synthesize(3, 5, 4, 6, 2.0, seed=7)
    assert a_tr.features.tobytes() == b_tr.features.tobytes()
    assert a_tr.sets == b_tr.sets and a_te.sets == b_te.sets
    assert len(a_tr.videos()) == 9 and len(a_te.videos()) == 6
    X, lx = a_tr.stills()
    assert X.shape == (6, 18) and np.bincount(lx).tolist() == [6, 6, 6]


def test_zero_separation_gives_identical_class_means():
    # no per-set shift and no noise leaves only the class mean
    tr, _ = synthesize(3, 2, 5, 4, 0.0, seed=1, spread=0.0, floor=0.0, offset=0.0)
    assert np.allclose(tr.features, 0.0)


def test_dataset_validation():
    F = np.zeros((5, 2))
    with pytest.raises(ValidationError):
        Dataset(F, [SetSpec(0, 3, 0, "video"), SetSpec(2, 2, 1, "video")])
    with pytest.raises(ValidationError):
        Dataset(F, [SetSpec(4, 2, 0, "video")])
    with pytest.raises(ValidationError):
        Dataset(F, [SetSpec(0, 1, 0, "photo")])
    with pytest.raises(ValidationError):
        Dataset(np.array([[np.nan]]), [])


def test_training_embeddings_match_kernel_columns(small_split):
    tr, te = small_split
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        m = train(tr, fixture_train_config(), [te])
        data, bundle, _ = training_problem(tr, m.config)
    ex = m.embed("x", data.stills)
    np.testing.assert_allclose(ex, (m.W["x"].T @ bundle.features["x"]).T, atol=1e-10)
    ez = m.embed("z", data.sets)
    np.testing.assert_allclose(ez, (m.W["z"].T @ bundle.features["z"]).T, atol=1e-10)


def test_s2v_is_transpose_of_v2s(small_split):
    tr, te = small_split
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        m = train(tr, fixture_train_config(), [te])
    d1, p1, g1 = score_matrix(m, te, te, "v2s")
    d2, p2, g2 = score_matrix(m, te, te, "s2v")
    assert np.array_equal(d1, d2.T) and np.array_equal(p1, g2) and np.array_equal(g1, p2)
    with pytest.raises(ValidationError):
        score_matrix(m, te, te, "v2v")


def test_self_gallery_rank1_and_exclusion(small_split):
    tr, te = small_split
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        m = train(tr, fixture_train_config(mode="two_view"), [te])
    assert evaluate(m, tr, None, "v2v")["rank1"] == 1.0
    r = evaluate(m, tr, None, "v2v", exclude_self=True)
    assert 0.0 <= r["rank1"] <= 1.0 and r["probes"] == r["gallery"]


def test_duplicated_training_still_duplicates_kernel_row(small_split):
    tr, _ = small_split
    cfg = fixture_train_config()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        data = prepare(tr, cfg, 5)
        bundle, _ = build_kernels(data, cfg)
        X = data.stills
        data2 = prepare(tr, cfg, 5)
        data2.stills = np.hstack([X, X[:, :1]])
        data2.still_labels = np.append(data.still_labels, data.still_labels[0])
        dists = None
        bundle2, _ = build_kernels(data2, cfg, dists)
    K2 = bundle2.square["x"]
    n = X.shape[1]
    np.testing.assert_allclose(K2[n, :n], K2[0, :n], atol=1e-12)


def test_baseline_and_objective(small_split):
    tr, te = small_split
    for p in ("v2s", "s2v", "v2v"):
        assert 0.0 <= baseline_rank1(te, tr, p) <= 1.0
    with pytest.raises(ValidationError):
        baseline_rank1(te, tr, "x2y")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        m = train(tr, fixture_train_config(), [te])
    assert final_objective(m)[0] == pytest.approx(m.trace[-1], rel=1e-12)


def test_three_view_needs_stills(small_split):
    tr, _ = small_split
    videos_only = tr.subset(lambda s: s.role == "video")
    with pytest.raises(ValidationError):
        train(videos_only, fixture_train_config())
