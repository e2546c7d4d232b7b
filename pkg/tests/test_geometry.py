import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import minimize

from cerml.errors import ValidationError
from cerml.geometry import (d_affine, d_logeuclidean, d_point_affine, d_point_spd, d_point_subspace,
                            d_projection, euclidean_distances, manifold_distances, point_model_distances)
from cerml.representation import AffinePoint, GrassmannPoint, SetRepresentation, SpdPoint

from conftest import random_orthonormal, random_spd

seeds = st.integers(0, 2**31 - 1)
E1, E2 = np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]])


def _proj_oracle(a, b):
    return np.linalg.norm(a.U @ a.U.T - b.U @ b.U.T) / np.sqrt(2)


# -- projection metric ------------------------------------------------------

def test_projection_examples(rng):
    a = GrassmannPoint(random_orthonormal(rng, 5, 2))
    assert d_projection(a, a) == pytest.approx(0.0, abs=1e-7)
    assert d_projection(GrassmannPoint(E1), GrassmannPoint(E2)) == pytest.approx(1.0, abs=1e-12)
    Q = random_orthonormal(rng, 2, 2)
    assert d_projection(a, GrassmannPoint(a.U @ Q)) == pytest.approx(0.0, abs=1e-7)


@given(seeds, st.integers(3, 9), st.integers(1, 4))
def test_projection_matches_explicit_projectors_and_bound(seed, D, d):
    rng = np.random.default_rng(seed)
    d = min(d, D)
    a, b = (GrassmannPoint(random_orthonormal(rng, D, d)) for _ in range(2))
    assert d_projection(a, b) == pytest.approx(_proj_oracle(a, b), abs=1e-7)
    assert d_projection(a, b) <= np.sqrt(d) + 1e-8


def test_projection_rejects_mixed_dimension(rng):
    with pytest.raises(ValidationError):
        d_projection(GrassmannPoint(random_orthonormal(rng, 4, 1)), GrassmannPoint(random_orthonormal(rng, 4, 2)))
    with pytest.raises(ValidationError):
        d_projection(GrassmannPoint(random_orthonormal(rng, 4, 1)), GrassmannPoint(random_orthonormal(rng, 5, 1)))


# -- affine -----------------------------------------------------------------

def test_affine_examples(rng):
    U = random_orthonormal(rng, 4, 2)
    mu = rng.standard_normal(4)
    a = AffinePoint(U, mu)
    assert d_affine(a, a) == pytest.approx(0.0, abs=1e-7)
    assert d_affine(a, AffinePoint(U, mu + U @ rng.standard_normal(2))) == pytest.approx(0.0, abs=1e-7)
    got = d_affine(AffinePoint(E1, np.zeros(2)), AffinePoint(E1, np.array([0.0, 3.0])))
    assert got == pytest.approx(3.0 / np.sqrt(2), abs=1e-12)


@given(seeds)
def test_affine_matches_explicit_formula(seed):
    rng = np.random.default_rng(seed)
    a, b = (AffinePoint(random_orthonormal(rng, 6, 2), rng.standard_normal(6)) for _ in range(2))
    Pa, Pb = a.U @ a.U.T, b.U @ b.U.T
    I = np.eye(6)
    want = (np.linalg.norm(Pa - Pb) + np.linalg.norm((I - Pa) @ a.offset - (I - Pb) @ b.offset)) / np.sqrt(2)
    assert d_affine(a, b) == pytest.approx(want, abs=1e-7)


# -- Log-Euclidean ----------------------------------------------------------

def test_logeuclidean_examples(rng):
    assert d_logeuclidean(SpdPoint(np.eye(2)), SpdPoint(np.e * np.eye(2))) == pytest.approx(np.sqrt(2), abs=1e-12)
    C1, C2 = random_spd(rng, 4), random_spd(rng, 4)
    R = random_orthonormal(rng, 4, 4)
    d = d_logeuclidean(SpdPoint(C1), SpdPoint(C2))
    d_rot = d_logeuclidean(SpdPoint(R @ C1 @ R.T), SpdPoint(R @ C2 @ R.T))
    assert d_rot == pytest.approx(d, abs=1e-8)
    assert d_logeuclidean(SpdPoint(C1), SpdPoint(C1)) == 0.0


# -- point to model ---------------------------------------------------------

def test_point_subspace_examples(rng):
    U = random_orthonormal(rng, 5, 2)
    g = GrassmannPoint(U)
    assert d_point_subspace(U @ [1.0, -2.0], g) == pytest.approx(0.0, abs=1e-12)
    assert d_point_subspace([0.0, 1.0], GrassmannPoint(E1)) == pytest.approx(1.0)
    x = rng.standard_normal(5)
    alpha = np.linalg.lstsq(U, x, rcond=None)[0]
    assert d_point_subspace(x, g) == pytest.approx(np.linalg.norm(U @ alpha - x), abs=1e-10)


def test_point_affine_examples(rng):
    a = AffinePoint(random_orthonormal(rng, 5, 2), rng.standard_normal(5))
    assert d_point_affine(a.offset, a) == pytest.approx(0.0, abs=1e-12)
    assert d_point_affine(a.offset + a.U @ [0.3, 4.0], a) == pytest.approx(0.0, abs=1e-12)


def test_point_affine_matches_iterative_minimization(rng):
    for _ in range(100):
        D, d = rng.integers(3, 8), 0
        d = int(rng.integers(1, D))
        a = AffinePoint(random_orthonormal(rng, D, d), rng.standard_normal(D))
        x = rng.standard_normal(D)
        res = minimize(lambda al: np.sum((a.U @ al + a.offset - x) ** 2), np.zeros(d), method="BFGS",
                       jac=lambda al: 2 * a.U.T @ (a.U @ al + a.offset - x), options={"gtol": 1e-12})
        assert d_point_affine(x, a) == pytest.approx(np.sqrt(res.fun), abs=1e-8)


def test_point_spd_examples(rng):
    mu = rng.standard_normal(3)
    s = SpdPoint(random_spd(rng, 3))
    assert d_point_spd(mu, mu, s) == 0.0
    x = rng.standard_normal(3)
    assert d_point_spd(x, mu, SpdPoint(np.eye(3))) == pytest.approx(np.linalg.norm(x - mu))
    assert d_point_spd([2.0, 0.0], [0.0, 0.0], SpdPoint(np.diag([4.0, 1.0]))) == pytest.approx(1.0)


def test_point_distance_dimension_mismatch(rng):
    with pytest.raises(ValidationError):
        d_point_subspace(np.ones(3), GrassmannPoint(random_orthonormal(rng, 4, 1)))


# -- metric axioms (200 random triples each) --------------------------------

def _triples(kind, rng, n=200):
    for _ in range(n):
        if kind == "projection":
            yield [GrassmannPoint(random_orthonormal(rng, 6, 2)) for _ in range(3)], d_projection
        elif kind == "affine":
            yield [AffinePoint(random_orthonormal(rng, 6, 2), rng.standard_normal(6)) for _ in range(3)], d_affine
        else:
            yield [SpdPoint(random_spd(rng, 4)) for _ in range(3)], d_logeuclidean


@pytest.mark.parametrize("kind", ["projection", "affine", "logE"])
def test_metric_axioms(kind, rng):
    for (a, b, c), dist in _triples(kind, rng):
        assert dist(a, b) == pytest.approx(dist(b, a), abs=1e-10)
        assert dist(a, a) <= 1e-7
        assert dist(a, c) <= dist(a, b) + dist(b, c) + 1e-8


# -- batched forms ----------------------------------------------------------

def test_batched_distances_match_pairwise(rng):
    A, B = rng.standard_normal((4, 5)), rng.standard_normal((4, 3))
    np.testing.assert_allclose(euclidean_distances(A, B),
                               [[np.linalg.norm(A[:, i] - B[:, j]) for j in range(3)] for i in range(5)], atol=1e-10)
    for make, dist in [(lambda: GrassmannPoint(random_orthonormal(rng, 6, 2)), d_projection),
                       (lambda: AffinePoint(random_orthonormal(rng, 6, 2), rng.standard_normal(6)), d_affine),
                       (lambda: SpdPoint(random_spd(rng, 4)), d_logeuclidean)]:
        P = [make() for _ in range(5)]
        M = manifold_distances(P)
        np.testing.assert_allclose(M, [[dist(p, q) for q in P] for p in P], atol=1e-7)
        assert np.array_equal(M, M.T) and np.all(np.diag(M) == 0)


def test_point_model_distances_match_scalar(rng):
    X = rng.standard_normal((5, 4))
    sets = []
    for _ in range(3):
        U, mu, C = random_orthonormal(rng, 5, 2), rng.standard_normal(5), random_spd(rng, 5)
        sets.append((SetRepresentation(mu, GrassmannPoint(U)), SetRepresentation(mu, AffinePoint(U, mu)),
                     SetRepresentation(mu, SpdPoint(C))))
    for k, (mode, fn) in enumerate([("subspace", lambda x, s: d_point_subspace(x, s.variation)),
                                    ("affine", lambda x, s: d_point_affine(x, s.variation)),
                                    ("spd", lambda x, s: d_point_spd(x, s.mean, s.variation))]):
        S = [t[k] for t in sets]
        got = point_model_distances(X, S, mode)
        np.testing.assert_allclose(got, [[fn(X[:, i], s) for s in S] for i in range(4)], atol=1e-10)
    with pytest.raises(ValidationError):
        point_model_distances(X, [sets[0][0]], "spd")


def test_manifold_distances_reject_mixed_types(rng):
    with pytest.raises(ValidationError):
        manifold_distances([GrassmannPoint(random_orthonormal(rng, 3, 1)), SpdPoint(np.eye(3))])
