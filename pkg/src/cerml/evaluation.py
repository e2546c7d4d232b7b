"""Embedding into the common space and recognition metrics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class KernelColumns:
    """Kernel columns of test items against a training set.

    ``values`` is ``p x N`` (one column per test item); ``fingerprint``
    identifies the training set and augmentation mode they were built from.
    """

    values: np.ndarray
    fingerprint: str = ""
    view: str = ""


def embed(columns, W, fingerprint: str | None = None) -> np.ndarray:
    """``W^T k`` for every kernel column ``k``; returns ``N x out_dim``."""
    if isinstance(columns, KernelColumns):
        if fingerprint is not None and columns.fingerprint != fingerprint:
            raise ValidationError("kernel columns were built against a different training set")
        values = columns.values
    else:
        values = np.asarray(columns, dtype=float)
    W = np.asarray(W, dtype=float)
    if values.shape[0] != W.shape[0]:
        raise ValidationError(f"kernel columns have {values.shape[0]} rows, projection expects {W.shape[0]}")
    return (W.T @ values).T


def _pairwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    sq = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    return np.sqrt(np.maximum(sq, 0.0))


def pair_distance_v2s(x_embed, y_embed, z_embed, weights=(1.0, 1.0)) -> float:
    """||psi_x - psi_y|| + ||psi_x - psi_z|| for one still and one video."""
    x, y, z = (np.asarray(e, dtype=float).reshape(-1) for e in (x_embed, y_embed, z_embed))
    return float(weights[0] * np.linalg.norm(x - y) + weights[1] * np.linalg.norm(x - z))


def pair_distance_v2v(set_i, set_j, weights=(1.0, 1.0)) -> float:
    """Sum of mean-view and variation-view distances between two sets.

    ``set_i`` and ``set_j`` are ``(mean_embed, variation_embed)`` pairs.
    """
    (yi, zi), (yj, zj) = set_i, set_j
    return float(weights[0] * np.linalg.norm(np.ravel(yi) - np.ravel(yj))
                 + weights[1] * np.linalg.norm(np.ravel(zi) - np.ravel(zj)))


def v2s_distances(x_embed, y_embed, z_embed, weights=(1.0, 1.0)) -> np.ndarray:
    """Still-by-video distance matrix (rows stills, columns videos)."""
    return weights[0] * _pairwise(x_embed, y_embed) + weights[1] * _pairwise(x_embed, z_embed)


def v2v_distances(probe_y, probe_z, gallery_y, gallery_z, weights=(1.0, 1.0)) -> np.ndarray:
    return weights[0] * _pairwise(probe_y, gallery_y) + weights[1] * _pairwise(probe_z, gallery_z)


def rank1_identification(dist, probe_labels, gallery_labels, exclude=None) -> float:
    """Fraction of probes whose nearest gallery item carries the same label.

    ``dist`` is probes x gallery. ``exclude`` is an optional boolean mask of
    the same shape marking pairs to skip (e.g. a probe matched with itself).
    Ties go to the smaller gallery index.
    """
    dist = np.array(dist, dtype=float, copy=True)
    pl = np.asarray(probe_labels).reshape(-1)
    gl = np.asarray(gallery_labels).reshape(-1)
    if dist.shape != (pl.shape[0], gl.shape[0]):
        raise ValidationError(f"distance matrix {dist.shape} does not match {pl.shape[0]} probes x {gl.shape[0]} gallery")
    if pl.shape[0] == 0:
        raise ValidationError("no probes")
    if exclude is not None:
        dist[np.asarray(exclude, dtype=bool)] = np.inf
    best = np.argmin(dist, axis=1)  # argmin returns the first minimum
    return float(np.mean(gl[best] == pl))


def verification_at_far(scores, same, far: float = 0.01) -> float:
    """True-accept rate at the largest threshold whose false-accept rate is <= ``far``.

    ``scores`` are similarities (negated distances); a pair is accepted when
    its score is >= the threshold.
    """
    scores = np.asarray(scores, dtype=float).reshape(-1)
    same = np.asarray(same, dtype=bool).reshape(-1)
    if scores.shape != same.shape:
        raise ValidationError("scores and labels differ in length")
    imp = np.sort(scores[~same])[::-1]
    gen = scores[same]
    if imp.size == 0:
        raise ValidationError("no impostor pairs")
    if gen.size == 0:
        raise ValidationError("no genuine pairs")
    # accepting k impostors needs a threshold above imp[k]; allow at most floor(far * n) of them
    k = int(np.floor(far * imp.size + 1e-12))
    if k >= imp.size:
        return 1.0
    thr = imp[k]
    return float(np.mean(gen > thr))


def nearest_class_mean(probe, gallery, gallery_labels, probe_labels) -> float:
    """Rank-1 rate of matching probe columns to per-class means of gallery columns."""
    gallery = np.asarray(gallery, dtype=float)
    gl = np.asarray(gallery_labels).reshape(-1)
    classes = np.unique(gl)
    means = np.stack([gallery[:, gl == c].mean(axis=1) for c in classes], axis=1)
    d = _pairwise(np.asarray(probe, dtype=float).T, means.T)
    return float(np.mean(classes[np.argmin(d, axis=1)] == np.asarray(probe_labels).reshape(-1)))
