"""Distances between variation models and from Euclidean points to models."""
from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ValidationError
from .representation import AffinePoint, GrassmannPoint, SetRepresentation, SpdPoint

INV_SQRT2 = 2.0 ** -0.5
# 2d - 2||Ua^T Ub||^2 cancels to ~d*eps for equal subspaces; treat that as zero
CANCEL_TOL = 100 * np.finfo(float).eps


def _gap_from_sq(sq, d):
    sq = np.asarray(sq, dtype=float)
    return np.sqrt(np.where(sq > CANCEL_TOL * d, sq, 0.0))


def _check_same(a, b):
    if a.D != b.D:
        raise ValidationError(f"ambient dimension mismatch: {a.D} vs {b.D}")
    if hasattr(a, "d") and a.d != b.d:
        raise ValidationError(f"subspace dimension mismatch: {a.d} vs {b.d}")


def _projector_gap(Ua: np.ndarray, Ub: np.ndarray) -> float:
    """||Ua Ua^T - Ub Ub^T||_F for equal-width orthonormal bases."""
    D, d = Ua.shape
    if 2 * d > D:
        return float(np.linalg.norm(Ua @ Ua.T - Ub @ Ub.T))
    return float(_gap_from_sq(2.0 * d - 2.0 * np.sum((Ua.T @ Ub) ** 2), d))


def d_projection(a: GrassmannPoint, b: GrassmannPoint) -> float:
    """Projection metric between two linear subspaces."""
    _check_same(a, b)
    return INV_SQRT2 * _projector_gap(a.U, b.U)


def _offset_residual(p: AffinePoint) -> np.ndarray:
    return p.offset - p.U @ (p.U.T @ p.offset)


def d_affine(a: AffinePoint, b: AffinePoint) -> float:
    """Affine-Grassmann distance: projector gap plus residual-offset gap, scaled by 2^-1/2."""
    _check_same(a, b)
    gap = _projector_gap(a.U, b.U)
    off = np.linalg.norm(_offset_residual(a) - _offset_residual(b))
    return INV_SQRT2 * (gap + float(off))


def d_logeuclidean(a: SpdPoint, b: SpdPoint) -> float:
    _check_same(a, b)
    return float(np.linalg.norm(a.logC - b.logC))


def _check_vec(x, D: int) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != D:
        raise ValidationError(f"point has length {x.shape[0]}, model lives in dimension {D}")
    return x


def d_point_subspace(x, g: GrassmannPoint) -> float:
    """Distance from ``x`` to its projection on span(U)."""
    x = _check_vec(x, g.D)
    return float(np.linalg.norm(x - g.U @ (g.U.T @ x)))


def d_point_affine(x, a: AffinePoint) -> float:
    """min over alpha of ||U alpha + mu - x||, in closed form."""
    r = _check_vec(x, a.D) - a.offset
    return float(np.linalg.norm(r - a.U @ (a.U.T @ r)))


def d_point_spd(x, mean, s: SpdPoint) -> float:
    """Mahalanobis distance of ``x`` from ``mean`` under covariance ``s.C``."""
    r = _check_vec(x, s.D) - _check_vec(mean, s.D)
    c = cho_factor(s.C, lower=True)
    return float(np.sqrt(max(r @ cho_solve(c, r), 0.0)))


# ---------------------------------------------------------------------------
# batched forms used to assemble kernel and affinity matrices

METRICS = {GrassmannPoint: "projection", AffinePoint: "affine", SpdPoint: "logE"}


def metric_for(points: Sequence) -> str:
    kinds = {type(p) for p in points}
    if len(kinds) != 1:
        raise ValidationError(f"mixed point types: {sorted(k.__name__ for k in kinds)}")
    return METRICS[kinds.pop()]


def euclidean_distances(A, B) -> np.ndarray:
    """Column-wise distances between ``A`` (D x m) and ``B`` (D x n)."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape[0] != B.shape[0]:
        raise ValidationError(f"feature dimension mismatch: {A.shape[0]} vs {B.shape[0]}")
    sq = (A * A).sum(0)[:, None] + (B * B).sum(0)[None, :] - 2.0 * A.T @ B
    return np.sqrt(np.maximum(sq, 0.0))


def _flatten(points: Sequence, metric: str) -> tuple[np.ndarray, np.ndarray | None]:
    if metric == "logE":
        return np.stack([p.logC.reshape(-1) for p in points], axis=1), None
    bases = np.stack([p.U for p in points])  # n x D x d
    if metric == "affine":
        res = np.stack([_offset_residual(p) for p in points], axis=1)
        return bases, res
    return bases, None


def manifold_distances(P: Sequence, Q: Sequence | None = None, metric: str | None = None) -> np.ndarray:
    """Distance matrix between two lists of variation models of one type."""
    symmetric = Q is None
    Q = P if Q is None else Q
    metric = metric or metric_for(list(P) + list(Q))
    if metric != metric_for(list(P) + list(Q)):
        raise ValidationError(f"metric {metric!r} does not match point type")
    for p in list(P) + list(Q):
        _check_same(P[0], p)
    if metric == "logE":
        a, _ = _flatten(P, metric)
        b, _ = _flatten(Q, metric)
        out = euclidean_distances(a, b)
    else:
        Ua, ra = _flatten(P, metric)
        Ub, rb = _flatten(Q, metric)
        d = Ua.shape[2]
        # ||Ua^T Ub||_F^2 for every pair
        overlap = np.einsum("iab,jac->ijbc", Ua, Ub, optimize=True)
        gap = _gap_from_sq(2.0 * d - 2.0 * np.sum(overlap ** 2, axis=(2, 3)), d)
        out = INV_SQRT2 * gap if metric == "projection" else INV_SQRT2 * (gap + euclidean_distances(ra, rb))
    if symmetric:
        out = 0.5 * (out + out.T)
        np.fill_diagonal(out, 0.0)
    return out


def point_model_distances(X, sets: Sequence[SetRepresentation], mode: str) -> np.ndarray:
    """``m x n`` distances from columns of ``X`` to each set's variation model.

    ``mode`` is ``subspace`` (nearest feature subspace), ``affine`` (hyperplane
    distance) or ``spd`` (Mahalanobis about the set mean).
    """
    X = np.asarray(X, dtype=float)
    out = np.empty((X.shape[1], len(sets)))
    for j, s in enumerate(sets):
        v = s.variation
        if v.D != X.shape[0]:
            raise ValidationError(f"feature dimension {X.shape[0]} does not match model dimension {v.D}")
        if mode == "subspace":
            if not isinstance(v, GrassmannPoint):
                raise ValidationError("subspace mode needs GrassmannPoint models")
            R = X - v.U @ (v.U.T @ X)
        elif mode == "affine":
            if not isinstance(v, AffinePoint):
                raise ValidationError("affine mode needs AffinePoint models")
            Xc = X - v.offset[:, None]
            R = Xc - v.U @ (v.U.T @ Xc)
        elif mode == "spd":
            if not isinstance(v, SpdPoint):
                raise ValidationError("spd mode needs SpdPoint models")
            Xc = X - np.asarray(s.mean, dtype=float)[:, None]
            c = cho_factor(v.C, lower=True)
            out[:, j] = np.sqrt(np.maximum(np.sum(Xc * cho_solve(c, Xc), axis=0), 0.0))
            continue
        else:
            raise ValidationError(f"unknown cross mode {mode!r}")
        out[:, j] = np.linalg.norm(R, axis=0)
    return out
