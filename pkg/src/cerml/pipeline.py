"""End-to-end training and scoring: datasets -> kernels -> graphs -> projections."""
from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .errors import ValidationError
from .evaluation import KernelColumns, embed, nearest_class_mean, rank1_identification, v2s_distances, v2v_distances, verification_at_far
from .geometry import euclidean_distances, manifold_distances, point_model_distances
from .graph import AffinityGraph, balance_affinity, cross_affinity, intra_affinity
from .kernels import KernelBundle, bandwidth_from_mean_distance, gaussian, offdiag, repair_psd
from .representation import AffinePoint, GrassmannPoint, SetRepresentation, SpdPoint, effective_dim, represent
from .solver import TrainConfig, objective, solve

CROSS_MODE = {GrassmannPoint: "subspace", AffinePoint: "affine", SpdPoint: "spd"}


@dataclass
class TrainingData:
    """Representations the kernels are built on: stills (x), set means (y), set variations (z)."""

    sets: list[SetRepresentation]
    stills: np.ndarray | None = None
    still_labels: np.ndarray | None = None

    def __post_init__(self):
        if self.stills is not None:
            self.stills = np.ascontiguousarray(self.stills, dtype=float)
            self.still_labels = np.asarray(self.still_labels, dtype=int).reshape(-1)

    @property
    def means(self) -> np.ndarray:
        return np.stack([s.mean for s in self.sets], axis=1)

    @property
    def variations(self) -> list:
        return [s.variation for s in self.sets]

    @property
    def set_labels(self) -> np.ndarray:
        return np.asarray([s.label for s in self.sets], dtype=int)

    @property
    def cross_mode(self) -> str:
        return CROSS_MODE[type(self.sets[0].variation)]

    def labels(self, view: str) -> np.ndarray:
        return self.still_labels if view == "x" else self.set_labels

    def fingerprint(self, augmented: bool) -> str:
        h = hashlib.sha256()
        h.update(f"aug={int(augmented)};".encode())
        if self.stills is not None:
            h.update(np.ascontiguousarray(self.stills).tobytes())
            h.update(np.ascontiguousarray(self.still_labels, dtype=np.int64).tobytes())
        for s in self.sets:
            h.update(np.ascontiguousarray(s.mean).tobytes())
            v = s.variation
            for arr in ((v.C, v.logC) if isinstance(v, SpdPoint) else (v.U,) + ((v.offset,) if isinstance(v, AffinePoint) else ())):
                h.update(np.ascontiguousarray(arr).tobytes())
            h.update(str(s.label).encode())
        return h.hexdigest()[:32]


def common_dim(datasets, d: int) -> int:
    """Largest subspace dimension <= ``d`` supported by every video set."""
    out = d
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for ds in datasets:
            for X, _ in ds.videos():
                out = min(out, effective_dim(X, d))
    if out < d:
        warnings.warn(f"subspace dimension clamped from {d} to {out} to fit the smallest set", stacklevel=2)
    return out


def represent_sets(ds: Dataset, model_type: str, d: int, ridge: float) -> list[SetRepresentation]:
    return [represent(X, model_type, d, ridge, label) for X, label in ds.videos()]


def prepare(ds: Dataset, config: TrainConfig, d: int | None = None) -> TrainingData:
    d = config.subspace_dim if d is None else d
    sets = represent_sets(ds, config.model_type, d, config.ridge)
    if not sets:
        raise ValidationError("dataset has no video sets")
    if config.mode == "three_view":
        X, lx = ds.stills()
        if X.shape[1] == 0:
            raise ValidationError("three-view training needs still images")
        return TrainingData(sets, X, lx)
    return TrainingData(sets)


# ---------------------------------------------------------------------------
# kernel and graph assembly

def view_distances(data: TrainingData, views) -> dict[str, np.ndarray]:
    out = {}
    if "x" in views:
        out["x"] = euclidean_distances(data.stills, data.stills)
        np.fill_diagonal(out["x"], 0.0)
        out["xy"] = euclidean_distances(data.stills, data.means)
        out["xz"] = point_model_distances(data.stills, data.sets, data.cross_mode)
    out["y"] = euclidean_distances(data.means, data.means)
    np.fill_diagonal(out["y"], 0.0)
    out["z"] = manifold_distances(data.variations)
    return out


def build_kernels(data: TrainingData, config: TrainConfig, dists=None) -> tuple[KernelBundle, dict]:
    views = config.views
    dists = view_distances(data, views) if dists is None else dists
    scale = config.sigma_scale
    sig = {v: scale * bandwidth_from_mean_distance(offdiag(dists[v])) for v in views}
    square, psd = {}, {}
    for v in views:
        square[v], psd[v] = repair_psd(gaussian(dists[v], sig[v]))
    features = dict(square)
    augmented = config.mode == "three_view" and config.cross_augment
    if augmented:
        for pair in ("xy", "xz"):
            sig[pair] = scale * bandwidth_from_mean_distance(dists[pair])
        K_xy = gaussian(dists["xy"], sig["xy"])
        K_xz = gaussian(dists["xz"], sig["xz"])
        features["x"] = np.vstack([square["x"], K_xy.T, K_xz.T])
        features["y"] = np.vstack([square["y"], K_xy])
        features["z"] = np.vstack([square["z"], K_xz])
    return KernelBundle(features, square, sig, augmented, psd), dists


def build_graph(data: TrainingData, config: TrainConfig, dists, bandwidths) -> AffinityGraph:
    views = config.views
    if config.mode == "three_view":
        cross = {("x", "y"): cross_affinity(data.still_labels, data.set_labels),
                 ("x", "z"): cross_affinity(data.still_labels, data.set_labels)}
    else:
        cross = {("y", "z"): cross_affinity(data.set_labels, data.set_labels)}
    intra = {v: intra_affinity(dists[v], data.labels(v), config.k1, config.k2, bandwidths[v]) for v in views}
    if config.balance_intra:
        intra = {v: balance_affinity(A) for v, A in intra.items()}
    return AffinityGraph(cross, intra)


# ---------------------------------------------------------------------------
# model

@dataclass
class ProjectionModel:
    config: TrainConfig
    W: dict[str, np.ndarray]
    bandwidths: dict[str, float]
    data: TrainingData
    trace: list[float] = field(default_factory=list)
    converged: bool = False
    augmented: bool = False
    out_dim: int = 0

    def __post_init__(self):
        self.W = {v: np.ascontiguousarray(w, dtype=float) for v, w in self.W.items()}
        self.trace = [float(t) for t in self.trace]

    @property
    def fingerprint(self) -> str:
        return self.data.fingerprint(self.augmented)

    # -- test-time kernel columns ------------------------------------------
    def columns(self, view: str, items) -> KernelColumns:
        """Kernel columns for new items of ``view``.

        ``items`` is a ``D x N`` matrix of stills for ``x`` and a list of
        :class:`SetRepresentation` for ``y`` and ``z``.
        """
        d, s = self.data, self.bandwidths
        if view == "x":
            X = np.asarray(items, dtype=float)
            blocks = [gaussian(euclidean_distances(d.stills, X), s["x"])]
            if self.augmented:
                blocks.append(gaussian(euclidean_distances(d.means, X), s["xy"]))
                blocks.append(gaussian(point_model_distances(X, d.sets, d.cross_mode).T, s["xz"]))
        elif view == "y":
            M = np.stack([r.mean for r in items], axis=1)
            blocks = [gaussian(euclidean_distances(d.means, M), s["y"])]
            if self.augmented:
                blocks.append(gaussian(euclidean_distances(d.stills, M), s["xy"]))
        elif view == "z":
            blocks = [gaussian(manifold_distances(d.variations, [r.variation for r in items]), s["z"])]
            if self.augmented:
                blocks.append(gaussian(point_model_distances(d.stills, list(items), d.cross_mode), s["xz"]))
        else:
            raise ValidationError(f"unknown view {view!r}")
        return KernelColumns(np.vstack(blocks), self.fingerprint, view)

    def embed(self, view: str, items) -> np.ndarray:
        if view not in self.W:
            raise ValidationError(f"model trained in {self.config.mode} mode has no view {view!r}")
        return embed(self.columns(view, items), self.W[view], self.fingerprint)


def train(ds: Dataset, config: TrainConfig, extra_datasets=()) -> ProjectionModel:
    """Fit projections on a training dataset.

    ``extra_datasets`` only influence the common subspace dimension so that
    test sets represented later stay comparable with the training ones.
    """
    d = config.subspace_dim
    if config.model_type in ("subspace", "affine"):
        d = common_dim([ds, *extra_datasets], d)
    data = prepare(ds, config, d)
    bundle, dists = build_kernels(data, config)
    graph = build_graph(data, config, dists, bundle.bandwidths)
    n_classes = len(np.unique(data.set_labels))
    out_dim = config.out_dim or max(1, n_classes - 1)
    res = solve(bundle.features, graph, config, out_dim)
    cfg = TrainConfig(**{**config.__dict__, "subspace_dim": d})
    return ProjectionModel(cfg, res.W, bundle.bandwidths, data, res.trace, res.converged, bundle.augmented, out_dim)


def training_problem(ds: Dataset, config: TrainConfig):
    """Kernels, graph and training data without solving; used by diagnostics."""
    d = config.subspace_dim
    if config.model_type in ("subspace", "affine"):
        d = common_dim([ds], d)
    data = prepare(ds, config, d)
    bundle, dists = build_kernels(data, config)
    graph = build_graph(data, config, dists, bundle.bandwidths)
    return data, bundle, graph


# ---------------------------------------------------------------------------
# protocols

def _test_sets(model: ProjectionModel, ds: Dataset):
    c = model.config
    return represent_sets(ds, c.model_type, c.subspace_dim, c.ridge)


def score_matrix(model: ProjectionModel, probes: Dataset, gallery: Dataset, protocol: str, weights=(1.0, 1.0)):
    """Distances probes x gallery plus label vectors for one protocol."""
    if protocol in ("v2s", "s2v"):
        if model.config.mode != "three_view":
            raise ValidationError(f"{protocol} needs a three-view model")
        video_ds, still_ds = (probes, gallery) if protocol == "v2s" else (gallery, probes)
        sets = _test_sets(model, video_ds)
        X, lx = still_ds.stills()
        if X.shape[1] == 0 or not sets:
            raise ValidationError(f"{protocol} needs stills and videos")
        ex = model.embed("x", X)
        ey, ez = model.embed("y", sets), model.embed("z", sets)
        dist = v2s_distances(ex, ey, ez, weights)  # stills x videos
        lv = np.asarray([s.label for s in sets])
        return (dist.T, lv, lx) if protocol == "v2s" else (dist, lx, lv)
    if protocol == "v2v":
        if model.config.mode != "two_view":
            raise ValidationError("v2v needs a two-view model")
        ps, gs = _test_sets(model, probes), _test_sets(model, gallery)
        dist = v2v_distances(model.embed("y", ps), model.embed("z", ps), model.embed("y", gs), model.embed("z", gs), weights)
        return dist, np.asarray([s.label for s in ps]), np.asarray([s.label for s in gs])
    raise ValidationError(f"unknown protocol {protocol!r}")


def evaluate(model: ProjectionModel, probes: Dataset, gallery: Dataset | None = None, protocol: str = "v2s",
             exclude_self: bool = False, far: float = 0.01) -> dict[str, float]:
    """Rank-1 identification and verification rate for one protocol.

    With ``gallery=None`` probes and gallery come from the same dataset; for
    ``v2v`` ``exclude_self`` then drops each set's match with itself.
    """
    gallery = probes if gallery is None else gallery
    dist, pl, gl = score_matrix(model, probes, gallery, protocol)
    exclude = None
    if exclude_self and protocol == "v2v" and gallery is probes:
        exclude = np.eye(dist.shape[0], dtype=bool)
    same = pl[:, None] == gl[None, :]
    keep = np.ones_like(same) if exclude is None else ~exclude
    return {
        "rank1": rank1_identification(dist, pl, gl, exclude),
        "vr_at_far": verification_at_far(-dist[keep], same[keep], far),
        "probes": float(len(pl)),
        "gallery": float(len(gl)),
    }


def baseline_rank1(probes: Dataset, gallery: Dataset, protocol: str) -> float:
    """Nearest-class-mean matching on raw features (set means for videos)."""
    def video_means(ds):
        v = ds.videos()
        return np.stack([X.mean(axis=1) for X, _ in v], axis=1), np.asarray([l for _, l in v])

    if protocol == "v2s":
        P, pl = video_means(probes)
        G, gl = gallery.stills()
    elif protocol == "s2v":
        P, pl = probes.stills()
        G, gl = video_means(gallery)
    elif protocol == "v2v":
        P, pl = video_means(probes)
        G, gl = video_means(gallery)
    else:
        raise ValidationError(f"unknown protocol {protocol!r}")
    return nearest_class_mean(P, G, gl, pl)


def final_objective(model: ProjectionModel):
    _, bundle, graph = training_problem_from_model(model)
    return objective(model.W, bundle.features, graph, model.config.lambda1, model.config.lambda2)


def training_problem_from_model(model: ProjectionModel):
    cfg = model.config
    bundle, dists = build_kernels(model.data, cfg)
    graph = build_graph(model.data, cfg, dists, bundle.bandwidths)
    return model.data, bundle, graph
