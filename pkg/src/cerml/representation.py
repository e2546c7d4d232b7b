"""Set representations: first-order mean plus a second-order variation model.

Feature matrices follow the column convention: ``X`` is ``D x m`` with one
sample per column.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ValidationError

EIG_FLOOR = 1e-12
TRACE_EPS = 1e-12


def _as_features(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValidationError(f"feature matrix must be D x m with D, m >= 1, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValidationError("feature matrix contains non-finite entries")
    return X


def sign_canonical(U: np.ndarray) -> np.ndarray:
    """Flip columns so the largest-magnitude entry of each is positive.

    Ties on magnitude resolve to the first index, which keeps the result stable.
    """
    U = np.array(U, dtype=float, copy=True)
    if U.size == 0:
        return U
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def covariance(X) -> np.ndarray:
    """Population (1/m) covariance about the column mean."""
    X = _as_features(X)
    Xc = X - X.mean(axis=1, keepdims=True)
    C = Xc @ Xc.T / X.shape[1]
    return 0.5 * (C + C.T)


def sym_logm(C: np.ndarray, floor: float = EIG_FLOOR) -> np.ndarray:
    """Matrix logarithm of a symmetric PSD matrix with eigenvalues clamped at ``floor``."""
    w, V = np.linalg.eigh(0.5 * (C + C.T))
    L = (V * np.log(np.maximum(w, floor))) @ V.T
    return 0.5 * (L + L.T)


def sym_expm(L: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (L + L.T))
    E = (V * np.exp(w)) @ V.T
    return 0.5 * (E + E.T)


@dataclass(frozen=True)
class GrassmannPoint:
    """Linear subspace given by an orthonormal ``D x d`` basis."""

    U: np.ndarray

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        if U.ndim != 2 or not 1 <= U.shape[1] <= U.shape[0]:
            raise ValidationError(f"basis must be D x d with 1 <= d <= D, got {U.shape}")
        if np.linalg.norm(U.T @ U - np.eye(U.shape[1])) > 1e-8:
            raise ValidationError("basis columns are not orthonormal")
        # C order keeps BLAS results independent of how the basis was produced
        object.__setattr__(self, "U", np.ascontiguousarray(U))

    @property
    def D(self) -> int:
        return self.U.shape[0]

    @property
    def d(self) -> int:
        return self.U.shape[1]


@dataclass(frozen=True)
class AffinePoint:
    """Affine subspace: orthonormal basis ``U`` shifted by ``offset``."""

    U: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        g = GrassmannPoint(self.U)
        mu = np.asarray(self.offset, dtype=float).reshape(-1)
        if mu.shape[0] != g.D or not np.all(np.isfinite(mu)):
            raise ValidationError("offset must be a finite vector of length D")
        object.__setattr__(self, "U", g.U)
        object.__setattr__(self, "offset", np.ascontiguousarray(mu))

    @property
    def D(self) -> int:
        return self.U.shape[0]

    @property
    def d(self) -> int:
        return self.U.shape[1]


@dataclass(frozen=True)
class SpdPoint:
    """SPD matrix with its cached matrix logarithm."""

    C: np.ndarray
    logC: np.ndarray = None

    def __post_init__(self):
        C = np.asarray(self.C, dtype=float)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise ValidationError(f"SPD matrix must be square, got {C.shape}")
        if np.max(np.abs(C - C.T), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(C))):
            raise ValidationError("SPD matrix is not symmetric")
        C = 0.5 * (C + C.T)
        if np.linalg.eigvalsh(C)[0] <= 0:
            raise ValidationError("matrix is not positive definite")
        logC = sym_logm(C) if self.logC is None else np.asarray(self.logC, dtype=float)
        object.__setattr__(self, "C", np.ascontiguousarray(C))
        object.__setattr__(self, "logC", np.ascontiguousarray(logC))

    @property
    def D(self) -> int:
        return self.C.shape[0]


Variation = Union[GrassmannPoint, AffinePoint, SpdPoint]

MODEL_TYPES = {"subspace": GrassmannPoint, "affine": AffinePoint, "spd": SpdPoint}


@dataclass(frozen=True)
class SetRepresentation:
    mean: np.ndarray
    variation: Variation
    label: int = -1

    def __post_init__(self):
        object.__setattr__(self, "mean", np.ascontiguousarray(self.mean, dtype=float).reshape(-1))


def compute_mean(X) -> np.ndarray:
    """Arithmetic mean of the columns of ``X``."""
    X = _as_features(X)
    return X.mean(axis=1)


def fit_subspace(X, d: int) -> GrassmannPoint:
    """Top-``d`` eigenvectors of the sample covariance of ``X``.

    Raises ``ValidationError`` when ``d`` exceeds ``min(D, m)`` or the
    covariance has numerical rank below ``d``.
    """
    X = _as_features(X)
    D, m = X.shape
    if not 1 <= d <= min(D, m):
        raise ValidationError(f"subspace dimension d={d} outside [1, min(D, m)={min(D, m)}]")
    w, V = np.linalg.eigh(covariance(X))
    order = np.argsort(-w, kind="stable")
    w, V = w[order], V[:, order]
    tol = max(D, m) * np.finfo(float).eps * max(w[0], 0.0)
    rank = int(np.sum(w > tol))
    if rank < d:
        raise ValidationError(f"covariance rank {rank} is below requested subspace dimension {d}")
    U = sign_canonical(V[:, :d])
    # eigh output is orthonormal to ~1e-15; re-orthonormalize to keep the invariant tight
    Q, R = np.linalg.qr(U)
    Q = Q * np.sign(np.diag(R))
    return GrassmannPoint(Q)


def fit_affine(X, d: int) -> AffinePoint:
    return AffinePoint(fit_subspace(X, d).U, compute_mean(X))


def fit_spd(X, ridge: float = 1e-6) -> SpdPoint:
    """Covariance plus a trace-relative ridge, with cached log.

    ``C = cov + ridge * (trace(cov)/D + 1e-12) * I``.
    """
    X = _as_features(X)
    if ridge < 0:
        raise ValidationError("ridge must be non-negative")
    C = covariance(X)
    D = C.shape[0]
    C = C + ridge * (np.trace(C) / D + TRACE_EPS) * np.eye(D)
    return SpdPoint(C)


def effective_dim(X, d: int) -> int:
    """Clamp ``d`` to what the set supports, warning when clamping happens."""
    X = _as_features(X)
    D, m = X.shape
    w = np.linalg.eigvalsh(covariance(X))
    tol = max(D, m) * np.finfo(float).eps * max(w[-1], 0.0)
    rank = max(1, int(np.sum(w > tol)))
    if d > rank:
        warnings.warn(f"subspace dimension {d} clamped to covariance rank {rank}", stacklevel=2)
        return rank
    return d


def represent(X, model_type: str, d: int = 10, ridge: float = 1e-6, label: int = -1) -> SetRepresentation:
    """Mean plus the requested variation model for one sample set."""
    X = _as_features(X)
    if model_type == "subspace":
        variation = fit_subspace(X, effective_dim(X, d))
    elif model_type == "affine":
        variation = fit_affine(X, effective_dim(X, d))
    elif model_type == "spd":
        variation = fit_spd(X, ridge)
    else:
        raise ValidationError(f"unknown model type {model_type!r}; expected one of {sorted(MODEL_TYPES)}")
    return SetRepresentation(compute_mean(X), variation, int(label))
