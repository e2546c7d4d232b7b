"""Labelled collections of still images and video sets backed by one feature table."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

ROLES = ("still", "video")


@dataclass(frozen=True)
class SetSpec:
    start: int
    length: int
    label: int
    role: str


@dataclass
class Dataset:
    """Rows of ``features`` are samples; each :class:`SetSpec` names a row range."""

    features: np.ndarray
    sets: list[SetSpec] = field(default_factory=list)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim != 2:
            raise ValidationError("feature table must be 2-D (rows = samples)")
        if not np.all(np.isfinite(self.features)):
            raise ValidationError("feature table contains non-finite values")
        N = self.features.shape[0]
        used = np.zeros(N, dtype=bool)
        for s in self.sets:
            if s.role not in ROLES:
                raise ValidationError(f"unknown role {s.role!r}")
            if s.length < 1 or s.start < 0 or s.start + s.length > N:
                raise ValidationError(f"set range [{s.start}, {s.start + s.length}) out of bounds for {N} rows")
            if used[s.start:s.start + s.length].any():
                raise ValidationError(f"set range starting at {s.start} overlaps another set")
            used[s.start:s.start + s.length] = True

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def videos(self) -> list[tuple[np.ndarray, int]]:
        """``(D x m_i, label)`` for every video set."""
        return [(self.features[s.start:s.start + s.length].T, s.label) for s in self.sets if s.role == "video"]

    def stills(self) -> tuple[np.ndarray, np.ndarray]:
        """All still-image rows as a ``D x m`` matrix and their labels."""
        cols, labels = [], []
        for s in self.sets:
            if s.role == "still":
                cols.append(self.features[s.start:s.start + s.length].T)
                labels.extend([s.label] * s.length)
        if not cols:
            return np.zeros((self.dim, 0)), np.zeros(0, dtype=int)
        return np.hstack(cols), np.asarray(labels, dtype=int)

    def subset(self, predicate) -> "Dataset":
        return Dataset(self.features, [s for s in self.sets if predicate(s)])


def synthesize(classes: int = 10, sets_per_class: int = 5, samples_per_set: int = 20, dim: int = 20,
               separation: float = 5.0, seed: int = 0, stills_per_class: int | None = None,
               train_sets_per_class: int | None = None, rank: int | None = None,
               spread: float = 3.0, floor: float = 0.3,
               offset: float = 0.5) -> tuple[Dataset, Dataset]:
    """Gaussian classes with class-specific low-rank variation.

    Class ``c`` has mean ``separation * g_c / sqrt(dim)`` (``g_c`` standard
    normal) and covariance ``Q_c diag(s) Q_c^T`` with a random rotation,
    ``rank`` directions of standard deviation ``spread`` and the rest at
    ``floor``. Each class yields ``sets_per_class`` video sets and
    ``stills_per_class`` single-frame stills (default twice the video count). Each video covers only part of
    its class: its mean is shifted inside the class's leading directions by
    ``offset * spread`` standard deviations, which moves set means but
    leaves subspaces and affine residuals intact. The first
    ``train_sets_per_class`` of each go to the training split.
    """
    if min(classes, sets_per_class, samples_per_set, dim) < 1:
        raise ValidationError("classes, sets_per_class, samples_per_set and dim must be >= 1")
    rng = np.random.default_rng(seed)
    stills_per_class = 2 * sets_per_class if stills_per_class is None else stills_per_class
    n_train = max(1, (3 * sets_per_class) // 5) if train_sets_per_class is None else train_sets_per_class
    rank = max(1, dim // 4) if rank is None else rank
    sd = np.full(dim, floor)
    sd[:rank] = spread

    rows, train_sets, test_sets = [], [], []
    cursor = 0

    def emit(block, label, role, train):
        nonlocal cursor
        rows.append(block)
        spec = SetSpec(cursor, block.shape[0], label, role)
        (train_sets if train else test_sets).append(spec)
        cursor += block.shape[0]

    for c in range(classes):
        mean = separation * rng.standard_normal(dim) / np.sqrt(dim)
        Q, R = np.linalg.qr(rng.standard_normal((dim, dim)))
        Q = Q * np.sign(np.diag(R))
        factor = Q * sd  # samples = mean + factor @ eps
        for k in range(sets_per_class):
            eps = rng.standard_normal((samples_per_set, dim))
            shift = Q[:, :rank] @ (offset * spread * rng.standard_normal(rank))
            emit(mean + shift + eps @ factor.T, c, "video", k < n_train)
        n_still_train = max(1, (stills_per_class * n_train) // sets_per_class)
        for k in range(stills_per_class):
            eps = rng.standard_normal((1, dim))
            emit(mean + eps @ factor.T, c, "still", k < n_still_train)

    feats = np.vstack(rows)
    return Dataset(feats, train_sets), Dataset(feats, test_sets)
