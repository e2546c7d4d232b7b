"""Gaussian and linear kernels on Euclidean data and variation models."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import NumericalError, ValidationError
from .geometry import euclidean_distances, manifold_distances, metric_for, point_model_distances
from .representation import AffinePoint, GrassmannPoint, SpdPoint


def gaussian(dist: np.ndarray, sigma: float) -> np.ndarray:
    """exp(-d^2 / (2 sigma^2)) applied elementwise."""
    if not sigma > 0:
        raise ValidationError(f"bandwidth must be positive, got {sigma}")
    dist = np.asarray(dist, dtype=float)
    return np.exp(-(dist ** 2) / (2.0 * sigma ** 2))


def rbf_kernel(A, B, sigma: float) -> np.ndarray:
    return gaussian(euclidean_distances(A, B), sigma)


def riemann_kernel(points: Sequence, sigma: float, metric: str | None = None, others: Sequence | None = None) -> np.ndarray:
    """Gaussian kernel on a manifold metric (projection, affine or logE)."""
    return gaussian(manifold_distances(points, others, metric), sigma)


def cross_kernel(X, sets, sigma: float, mode: str) -> np.ndarray:
    """Gaussian kernel on point-to-model distances, ``m x n``."""
    return gaussian(point_model_distances(X, sets, mode), sigma)


def bandwidth_from_mean_distance(dists) -> float:
    """Mean of the supplied distances; a zero mean is rejected."""
    dists = np.asarray(dists, dtype=float).reshape(-1)
    if dists.size == 0:
        raise ValidationError("no distances to average")
    sigma = float(np.mean(dists))
    if not np.isfinite(sigma) or sigma <= 0:
        raise ValidationError(f"mean distance is {sigma}; cannot set a bandwidth")
    return sigma


def offdiag(D: np.ndarray) -> np.ndarray:
    """Strict upper triangle of a square distance matrix, flattened."""
    return D[np.triu_indices(D.shape[0], k=1)]


def augment_kernels(K_x, K_y, K_xy):
    """Concatenate the cross-view kernel onto both single-view kernels.

    Returns ``([K_x | K_xy], [K_y | K_xy^T])``.
    """
    K_x, K_y, K_xy = (np.asarray(k, dtype=float) for k in (K_x, K_y, K_xy))
    m, n = K_x.shape[0], K_y.shape[0]
    if K_x.shape != (m, m) or K_y.shape != (n, n) or K_xy.shape != (m, n):
        raise ValidationError(f"cannot augment shapes {K_x.shape}, {K_y.shape}, {K_xy.shape}")
    return np.hstack([K_x, K_xy]), np.hstack([K_y, K_xy.T])


def split_augmented(K_hat, m: int):
    """Inverse of ``augment_kernels`` for one view: (square block, cross block)."""
    K_hat = np.asarray(K_hat)
    return K_hat[:, :m], K_hat[:, m:]


def model_coordinates(points: Sequence) -> np.ndarray:
    """Flattened coordinates used by the linear kernel on variation models."""
    metric = metric_for(points)
    cols = []
    for p in points:
        if metric == "logE":
            cols.append(p.logC.reshape(-1))
        else:
            P = p.U @ p.U.T
            if metric == "projection":
                cols.append(P.reshape(-1))
            else:
                cols.append(np.concatenate([P.reshape(-1), p.offset - P @ p.offset]))
    return np.stack(cols, axis=1)


def linear_kernel(A, B=None) -> np.ndarray:
    """Inner-product kernel on feature columns or on variation models."""
    def coords(Z):
        if not isinstance(Z, np.ndarray) and isinstance(Z[0], (GrassmannPoint, AffinePoint, SpdPoint)):
            return model_coordinates(Z)
        return np.asarray(Z, dtype=float)

    a = coords(A)
    b = a if B is None else coords(B)
    if a.shape[0] != b.shape[0]:
        raise ValidationError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return a.T @ b


@dataclass
class PsdReport:
    lam_min: float
    lam_max: float
    tol: float
    passed: bool
    jitter: float = 0.0

    def lines(self, prefix: str = "") -> list[str]:
        return [
            f"{prefix}lambda_min = {self.lam_min:.6e}",
            f"{prefix}lambda_max = {self.lam_max:.6e}",
            f"{prefix}pass = {str(self.passed).lower()}",
        ]


def check_psd(K, tol: float = 1e-8) -> PsdReport:
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValidationError(f"PSD check needs a square matrix, got {K.shape}")
    if not np.all(np.isfinite(K)):
        raise NumericalError("kernel matrix has non-finite entries")
    w = np.linalg.eigvalsh(0.5 * (K + K.T))
    lo, hi = float(w[0]), float(w[-1])
    return PsdReport(lo, hi, tol, lo >= -tol * max(hi, 0.0))


def repair_psd(K, tol: float = 1e-8) -> tuple[np.ndarray, PsdReport]:
    """Add one diagonal jitter if ``K`` fails the PSD test; raise if it still fails."""
    rep = check_psd(K, tol)
    if rep.passed:
        return np.asarray(K, dtype=float), rep
    jitter = -rep.lam_min + 1e-10
    K2 = np.asarray(K, dtype=float) + jitter * np.eye(K.shape[0])
    rep2 = check_psd(K2, tol)
    if not rep2.passed:
        raise NumericalError(f"kernel is not PSD after jitter (lambda_min={rep2.lam_min:.3e})")
    rep2.jitter = jitter
    return K2, rep2


@dataclass
class KernelBundle:
    """Per-view kernel feature matrices for training.

    ``features[v]`` is ``p_v x N_v``: column ``i`` is the kernel feature vector
    of training item ``i`` of view ``v`` (its row of the possibly augmented
    kernel). ``square[v]`` keeps the plain ``N_v x N_v`` kernel.
    """

    features: dict[str, np.ndarray]
    square: dict[str, np.ndarray]
    bandwidths: dict[str, float]
    augmented: bool = False
    psd: dict[str, PsdReport] = field(default_factory=dict)

    def rows(self, view: str) -> int:
        return self.features[view].shape[0]
