import dataclasses
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cerml.errors import ValidationError
from cerml.graph import AffinityGraph, cross_affinity, intra_affinity
from cerml.experiments import fixture_train_config
from cerml.pipeline import training_problem
from cerml.solver import (TrainConfig, eigen_residual, gradient, init_fisher, objective, solve,
                          top_generalized_eigvecs, update_block, view_normalize)


def toy_problem(rng, sizes, p_extra=0, out_dim=2, n_classes=2, three=False):
    """Random kernel features, labels and graph for a small two- or three-view problem."""
    views = ("x", "y", "z") if three else ("x", "y")
    lab = {v: rng.permutation(np.arange(sizes[v]) % n_classes) for v in views}
    F, W, intra = {}, {}, {}
    for v in views:
        n = sizes[v]
        F[v] = rng.standard_normal((n + p_extra, n))
        W[v] = rng.standard_normal((n + p_extra, out_dim))
        pts = rng.standard_normal((n, 2))
        D = np.linalg.norm(pts[:, None] - pts[None], axis=2)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            intra[v] = intra_affinity(D, lab[v], 1, 2, 1.0)
    cross = {("x", "y"): cross_affinity(lab["x"], lab["y"])}
    if three:
        cross[("x", "z")] = cross_affinity(lab["x"], lab["z"])
    return F, W, AffinityGraph(cross, intra)


def brute_objective(W, F, g, l1, l2):
    E = {v: (W[v].T @ F[v]).T for v in W}  # rows are items
    D = sum(0.5 * A[i, j] * np.sum((E[u][i] - E[v][j]) ** 2)
            for (u, v), A in g.cross.items() for i in range(A.shape[0]) for j in range(A.shape[1]))
    G = sum(0.5 * A[i, j] * np.sum((E[v][i] - E[v][j]) ** 2)
            for v, A in g.intra.items() for i in range(A.shape[0]) for j in range(A.shape[1]))
    T = 0.5 * sum(np.sum(E[v] ** 2) for v in E)
    return D + l1 * G + l2 * T, D, G, T


@given(st.integers(0, 2**31 - 1), st.integers(2, 8), st.integers(2, 8), st.booleans())
def test_objective_matches_double_sum(seed, m, n, three):
    rng = np.random.default_rng(seed)
    F, W, g = toy_problem(rng, {"x": m, "y": n, "z": max(2, n - 1)}, three=three)
    got = objective(W, F, g, 0.3, 0.7)
    want = brute_objective(W, F, g, 0.3, 0.7)
    np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-10 * max(1.0, abs(want[0])))


def test_objective_zero_and_scaling(rng):
    F, W, g = toy_problem(rng, {"x": 4, "y": 3})
    assert objective({v: 0 * w for v, w in W.items()}, F, g, 0.1, 0.1) == (0.0, 0.0, 0.0, 0.0)
    J = objective(W, F, g, 0.1, 0.1)[0]
    assert objective({v: 3 * w for v, w in W.items()}, F, g, 0.1, 0.1)[0] == pytest.approx(9 * J)
    with pytest.raises(ValidationError):
        objective({"x": W["x"][:-1], "y": W["y"]}, F, g, 0.1, 0.1)


def _fd_gradient(view, W, F, g, l1, l2, h=1e-3):
    out = np.zeros_like(W[view])
    for idx in np.ndindex(*out.shape):
        Wp, Wm = dict(W), dict(W)
        Wp[view] = W[view].copy()
        Wm[view] = W[view].copy()
        Wp[view][idx] += h
        Wm[view][idx] -= h
        out[idx] = (objective(Wp, F, g, l1, l2)[0] - objective(Wm, F, g, l1, l2)[0]) / (2 * h)
    return out


@pytest.mark.parametrize("three", [False, True])
def test_analytic_gradient_matches_finite_differences(rng, three):
    F, W, g = toy_problem(rng, {"x": 5, "y": 4, "z": 3}, p_extra=1, three=three)
    for v in W:
        np.testing.assert_allclose(gradient(v, W, F, g, 0.2, 0.5), _fd_gradient(v, W, F, g, 0.2, 0.5),
                                   rtol=1e-7, atol=1e-8)


@pytest.mark.parametrize("three", [False, True])
def test_block_update_is_stationary(rng, three):
    F, W, g = toy_problem(rng, {"x": 6, "y": 5, "z": 4}, three=three)
    for v in W:
        before = np.linalg.norm(_fd_gradient(v, W, F, g, 0.01, 0.1))
        W[v] = update_block(v, W, F, g, 0.01, 0.1, jitter=1e-12)
        after = np.linalg.norm(_fd_gradient(v, W, F, g, 0.01, 0.1))
        assert after < 1e-6 * before


def test_block_update_zero_rhs_and_idempotence(rng):
    F, W, g = toy_problem(rng, {"x": 5, "y": 4})
    Wz = {"x": W["x"], "y": np.zeros_like(W["y"])}
    assert not update_block("x", Wz, F, g, 0.01, 0.1).any()
    once = update_block("x", W, F, g, 0.01, 0.1)
    twice = update_block("x", {**W, "x": once}, F, g, 0.01, 0.1)
    np.testing.assert_allclose(twice, once, atol=1e-10)


def test_generalized_eigvecs_identity_gives_canonical_basis():
    lam, V = top_generalized_eigvecs(np.eye(4), np.eye(4), 2)
    np.testing.assert_allclose(lam, 1.0)
    assert np.allclose(np.sort(np.abs(V), axis=0)[-1], 1.0) and np.allclose(V.T @ V, np.eye(2))
    with pytest.raises(ValidationError):
        top_generalized_eigvecs(np.eye(2), np.eye(2), 3)


@pytest.mark.parametrize("three", [False, True])
def test_fisher_init_residual(rng, three):
    F, _, g = toy_problem(rng, {"x": 8, "y": 6, "z": 6}, n_classes=3, three=three)
    views = tuple(F)
    W, lam, sysm = init_fisher(F, g, 0.01, 2, views, jitter=1e-2)
    assert eigen_residual(sysm, W, lam) < 1e-8
    assert np.all(np.diff(lam) <= 0)
    assert np.allclose(sysm.Mb, sysm.Mb.T) and np.allclose(sysm.Mw, sysm.Mw.T)
    V = np.vstack([W[v] for v in views])
    np.testing.assert_allclose(V.T @ sysm.Mw @ V, np.eye(2), atol=1e-8)


def test_view_normalize_unit_rms(rng):
    F, W, _ = toy_problem(rng, {"x": 5, "y": 4})
    for v, w in view_normalize(W, F).items():
        E = w.T @ F[v]
        assert np.sum(E ** 2) / F[v].shape[1] == pytest.approx(1.0)


def test_config_defaults_and_validation():
    c = TrainConfig()
    assert (c.lambda1, c.lambda2, c.k1, c.k2, c.max_iters) == (0.01, 0.1, 1, 20, 20)
    assert c.order == ("x", "y", "z") and TrainConfig(mode="two_view").order == ("y", "z")
    for bad in [dict(mode="four_view"), dict(lambda2=0.0), dict(max_iters=0), dict(rel_tol=0.0),
                dict(normalize="l2"), dict(update_order="xy"), dict(sigma_scale=-1.0)]:
        with pytest.raises(ValidationError):
            TrainConfig(**bad)


def test_solve_converges_and_is_deterministic(small_split):
    train_ds, _ = small_split
    cfg = fixture_train_config()
    _, bundle, graph = training_problem(train_ds, cfg)
    r1 = solve(bundle.features, graph, cfg, 3)
    r2 = solve(bundle.features, graph, cfg, 3)
    assert r1.converged and abs(r1.trace[-1] - r1.trace[-2]) < cfg.rel_tol * abs(r1.trace[-2])
    for v in r1.W:
        assert r1.W[v].tobytes() == r2.W[v].tobytes()
        assert np.all(np.isfinite(r1.W[v])) and r1.W[v].shape[1] == 3


@pytest.mark.parametrize("normalize", ["fisher", "none"])
def test_other_normalizations_run(small_split, normalize):
    train_ds, _ = small_split
    cfg = dataclasses.replace(fixture_train_config(), normalize=normalize, max_iters=3)
    _, bundle, graph = training_problem(train_ds, cfg)
    res = solve(bundle.features, graph, cfg, 3)
    assert len(res.trace) >= 2 and all(np.isfinite(res.trace))
