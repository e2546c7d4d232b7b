"""Signed affinity graphs: cross-view labels, intra-view kNN, templates, Laplacians."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


def cross_affinity(labels_x, labels_y) -> np.ndarray:
    """+1/S on same-label pairs, -1/T on different-label pairs.

    S and T are the total counts of similar and dissimilar pairs.
    """
    lx = np.asarray(labels_x).reshape(-1)
    ly = np.asarray(labels_y).reshape(-1)
    same = lx[:, None] == ly[None, :]
    S = int(same.sum())
    T = same.size - S
    if S == 0 or T == 0:
        raise ValidationError(f"degenerate labels: {S} similar and {T} dissimilar pairs")
    return np.where(same, 1.0 / S, -1.0 / T)


def knn_mask(dists: np.ndarray, k: int) -> np.ndarray:
    """Symmetric kNN relation: True where i is among j's k nearest or vice versa.

    Self is excluded; ties at equal distance go to the smaller index.
    """
    n = dists.shape[0]
    if k <= 0 or n < 2:
        return np.zeros((n, n), dtype=bool)
    D = np.array(dists, dtype=float, copy=True)
    np.fill_diagonal(D, np.inf)
    # stable argsort keeps index order among equal distances
    nn = np.argsort(D, axis=1, kind="stable")[:, :k]
    M = np.zeros((n, n), dtype=bool)
    M[np.repeat(np.arange(n), k), nn.reshape(-1)] = True
    np.fill_diagonal(M, False)
    return M | M.T


def _clamp_k(k: int, n: int, name: str) -> int:
    if k >= n:
        warnings.warn(f"{name}={k} >= number of points {n}; clamped to {n - 1}", stacklevel=3)
        return n - 1
    return k


def intra_affinity(dists, labels, k1: int = 1, k2: int = 20, sigma: float = 1.0) -> np.ndarray:
    """Signed geometry-preserving affinity within one view.

    Same-label k1-neighbours get +a_ij, different-label k2-neighbours get
    -a_ij, with heat weight a_ij = exp(-d_ij^2 / sigma^2).
    """
    D = np.asarray(dists, dtype=float)
    lab = np.asarray(labels).reshape(-1)
    n = D.shape[0]
    if D.shape != (n, n) or lab.shape[0] != n:
        raise ValidationError(f"distance matrix {D.shape} does not match {lab.shape[0]} labels")
    if not sigma > 0:
        raise ValidationError("sigma must be positive")
    k1 = _clamp_k(k1, n, "k1")
    k2 = _clamp_k(k2, n, "k2")
    D = 0.5 * (D + D.T)
    a = np.exp(-(D ** 2) / sigma ** 2)
    same = lab[:, None] == lab[None, :]
    A = np.zeros((n, n))
    pos = same & knn_mask(D, k1)
    neg = ~same & knn_mask(D, k2)
    A[pos] = a[pos]
    A[neg] = -a[neg]
    np.fill_diagonal(A, 0.0)
    return A


def balance_affinity(A) -> np.ndarray:
    """Divide positive entries by their count and negative entries by theirs.

    This is the count normalization of the cross-view affinity applied to
    the heat weights, so each sign carries at most unit total mass and the
    intra-view term stays on the scale of the cross-view term.
    """
    A = np.asarray(A, dtype=float)
    out = np.zeros_like(A)
    pos, neg = A > 0, A < 0
    if pos.any():
        out[pos] = A[pos] / pos.sum()
    if neg.any():
        out[neg] = A[neg] / neg.sum()
    return out


def split_templates(A) -> tuple[np.ndarray, np.ndarray]:
    """(within, between): magnitudes of the positive and negative entries."""
    A = np.asarray(A, dtype=float)
    return np.where(A > 0, A, 0.0), np.where(A < 0, -A, 0.0)


def degree_and_laplacian(A) -> tuple[np.ndarray, np.ndarray]:
    """Row-degree diagonal ``B`` and ``L = B - A`` for a square affinity."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"Laplacian needs a square affinity, got {A.shape}")
    B = np.diag(A.sum(axis=1))
    return B, B - A


def cross_degrees(A) -> tuple[np.ndarray, np.ndarray]:
    """Row and column degree diagonals of a rectangular cross affinity."""
    A = np.asarray(A, dtype=float)
    return np.diag(A.sum(axis=1)), np.diag(A.sum(axis=0))


@dataclass
class AffinityGraph:
    """Cross-view affinities per coupled pair and intra-view affinities per view.

    ``cross[(u, v)]`` is oriented with rows indexing view ``u``.
    """

    cross: dict[tuple[str, str], np.ndarray]
    intra: dict[str, np.ndarray]

    def laplacian(self, view: str, part: str = "signed") -> np.ndarray:
        A = self.intra[view]
        if part != "signed":
            A = split_templates(A)[0 if part == "within" else 1]
        return degree_and_laplacian(A)[1]

    def pairs_of(self, view: str):
        """Yield ``(other, A)`` with ``A`` oriented rows=view for every pair touching ``view``."""
        for (u, v), A in self.cross.items():
            if u == view:
                yield v, A
            elif v == view:
                yield u, A.T
