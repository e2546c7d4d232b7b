"""Objective, Fisher initialization and alternating closed-form block updates.

Every view ``v`` has a kernel feature matrix ``F[v]`` (``p_v x N_v``, one
column per training item) and a projection ``W[v]`` (``p_v x out_dim``); the
embedding of item ``i`` is ``W[v].T @ F[v][:, i]``. Views are coupled through
the signed cross affinities of an :class:`~cerml.graph.AffinityGraph`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields
from typing import Mapping

import numpy as np
import scipy.linalg

from .errors import NumericalError, ValidationError
from .graph import AffinityGraph, degree_and_laplacian, split_templates
from .representation import sign_canonical

log = logging.getLogger(__name__)

MODES = {"three_view": ("x", "y", "z"), "two_view": ("y", "z")}
NORMALIZERS = ("view", "fisher", "none")


@dataclass
class TrainConfig:
    lambda1: float = 0.01
    lambda2: float = 0.1
    k1: int = 1
    k2: int = 20
    out_dim: int = 0  # 0 means (#classes - 1)
    max_iters: int = 20
    rel_tol: float = 1e-4
    mode: str = "three_view"
    jitter: float = 1e-8
    fisher_reg: float = 1e-2
    cross_augment: bool = True
    model_type: str = "subspace"
    subspace_dim: int = 10
    ridge: float = 1e-6
    sigma_scale: float = 1.0  # kernel width = sigma_scale * mean training distance
    balance_intra: bool = True
    normalize: str = "view"
    update_order: str = ""
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {sorted(MODES)}, got {self.mode!r}")
        if self.lambda1 < 0 or self.lambda2 <= 0:
            raise ValidationError("need lambda1 >= 0 and lambda2 > 0")
        if self.out_dim < 0 or self.max_iters < 1 or self.rel_tol <= 0 or self.jitter < 0:
            raise ValidationError("need out_dim >= 0, max_iters >= 1, rel_tol > 0, jitter >= 0")
        if self.k1 < 0 or self.k2 < 0:
            raise ValidationError("neighbourhood sizes must be non-negative")
        if self.normalize not in NORMALIZERS:
            raise ValidationError(f"normalize must be one of {NORMALIZERS}, got {self.normalize!r}")
        if not self.sigma_scale > 0:
            raise ValidationError("sigma_scale must be positive")
        if self.fisher_reg < 0:
            raise ValidationError("fisher_reg must be non-negative")
        order = self.order
        if sorted(order) != sorted(MODES[self.mode]):
            raise ValidationError(f"update order {order} does not match views {MODES[self.mode]}")

    @property
    def views(self) -> tuple[str, ...]:
        return MODES[self.mode]

    @property
    def order(self) -> tuple[str, ...]:
        return tuple(self.update_order) if self.update_order else MODES[self.mode]

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


# ---------------------------------------------------------------------------
# objective and gradient

def _embed_all(W, F):
    return {v: W[v].T @ F[v] for v in W}


def objective(W: Mapping[str, np.ndarray], F: Mapping[str, np.ndarray], graph: AffinityGraph,
              lambda1: float, lambda2: float) -> tuple[float, float, float, float]:
    """Return ``(J, D, G, T)`` with ``J = D + lambda1*G + lambda2*T``."""
    for v in W:
        if W[v].shape[0] != F[v].shape[0]:
            raise ValidationError(f"view {v}: W has {W[v].shape[0]} rows, kernel features have {F[v].shape[0]}")
    E = _embed_all(W, F)
    Dt = 0.0
    for (u, v), A in graph.cross.items():
        if A.shape != (E[u].shape[1], E[v].shape[1]):
            raise ValidationError(f"affinity {u}{v} has shape {A.shape}")
        su = np.sum(E[u] ** 2, axis=0)
        sv = np.sum(E[v] ** 2, axis=0)
        Dt += 0.5 * (su @ A.sum(axis=1) + sv @ A.sum(axis=0) - 2.0 * np.sum(E[u] * (E[v] @ A.T)))
    Gt = 0.0
    for v in W:
        L = degree_and_laplacian(graph.intra[v])[1]
        Gt += np.sum(E[v] * (E[v] @ L))
    Tt = 0.5 * sum(np.sum(E[v] ** 2) for v in W)
    J = Dt + lambda1 * Gt + lambda2 * Tt
    return float(J), float(Dt), float(Gt), float(Tt)


def _block_terms(view, graph: AffinityGraph, lambda1, lambda2):
    """Coefficient matrix ``Q`` with dJ/dW_v = F_v (Q E_v^T - sum_u A_vu E_u^T)."""
    n = graph.intra[view].shape[0]
    deg = np.zeros(n)
    for _, A in graph.pairs_of(view):
        deg += A.sum(axis=1)
    L = degree_and_laplacian(graph.intra[view])[1]
    return np.diag(deg) + 2.0 * lambda1 * L + lambda2 * np.eye(n)


def gradient(view: str, W, F, graph: AffinityGraph, lambda1: float, lambda2: float) -> np.ndarray:
    """Analytic gradient of ``J`` with respect to ``W[view]``."""
    Q = _block_terms(view, graph, lambda1, lambda2)
    Ev = W[view].T @ F[view]
    inner = Q @ Ev.T
    for u, A in graph.pairs_of(view):
        inner -= A @ (W[u].T @ F[u]).T
    return F[view] @ inner


def update_block(view: str, W, F, graph: AffinityGraph, lambda1: float, lambda2: float,
                 jitter: float = 1e-8) -> np.ndarray:
    """Closed-form minimizer of ``J`` in ``W[view]`` with the other blocks fixed.

    Solves ``(F Q F^T + eps I) W = F sum_u A_vu F_u^T W_u`` where
    ``Q = B' + 2 lambda1 L + lambda2 I`` and ``eps = jitter * mean|diag|``.
    """
    Fv = F[view]
    S = Fv @ _block_terms(view, graph, lambda1, lambda2) @ Fv.T
    S = 0.5 * (S + S.T)
    rhs = np.zeros((Fv.shape[0], next(iter(W.values())).shape[1]))
    for u, A in graph.pairs_of(view):
        rhs += Fv @ (A @ (F[u].T @ W[u]))
    eps = jitter * float(np.mean(np.abs(np.diag(S))))
    S[np.diag_indices_from(S)] += eps
    try:
        out = scipy.linalg.solve(S, rhs, assume_a="sym")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"block system for view {view} is singular: {exc}") from exc
    if not np.all(np.isfinite(out)):
        raise NumericalError(f"block update for view {view} produced non-finite values")
    return out


# ---------------------------------------------------------------------------
# Fisher initialization

@dataclass
class FisherSystem:
    Mb: np.ndarray
    Mw: np.ndarray
    views: tuple[str, ...]
    sizes: tuple[int, ...]
    asymmetry: float = 0.0

    def split(self, Wstack: np.ndarray) -> dict[str, np.ndarray]:
        out, start = {}, 0
        for v, p in zip(self.views, self.sizes):
            out[v] = Wstack[start:start + p]
            start += p
        return out


def fisher_system(F, graph: AffinityGraph, lambda1: float, views, jitter: float = 1e-8) -> FisherSystem:
    """Block between/within matrices of the Fisher criterion.

    Diagonal block of view ``v``: ``F_v (B'_v + 2 lambda1 L_v) F_v^T`` built
    from the template of each part; off-diagonal block of a coupled pair
    ``(u, v)``: ``-F_u A_uv F_v^T``. Uncoupled pairs get zero blocks.
    """
    sizes = tuple(F[v].shape[0] for v in views)
    offs = np.concatenate([[0], np.cumsum(sizes)])
    idx = {v: slice(offs[i], offs[i + 1]) for i, v in enumerate(views)}
    mats = []
    asym = 0.0
    for part in (1, 0):  # between, within
        M = np.zeros((offs[-1], offs[-1]))
        for v in views:
            n = F[v].shape[1]
            deg = np.zeros(n)
            for _, A in graph.pairs_of(v):
                deg += split_templates(A)[part].sum(axis=1)
            L = degree_and_laplacian(split_templates(graph.intra[v])[part])[1]
            M[idx[v], idx[v]] = F[v] @ (np.diag(deg) + 2.0 * lambda1 * L) @ F[v].T
        for (u, v), A in graph.cross.items():
            At = split_templates(A)[part]
            blk = -F[u] @ At @ F[v].T
            M[idx[u], idx[v]] = blk
            M[idx[v], idx[u]] = blk.T
        asym = max(asym, float(np.linalg.norm(M - M.T)))
        mats.append(0.5 * (M + M.T))
    Mb, Mw = mats
    eps = jitter * float(np.mean(np.abs(np.diag(Mw))))
    Mw[np.diag_indices_from(Mw)] += eps
    return FisherSystem(Mb, Mw, tuple(views), sizes, asym)


def init_fisher(F, graph: AffinityGraph, lambda1: float, out_dim: int, views, jitter: float = 1e-8):
    """Top generalized eigenvectors of ``Mb w = lam Mw w``.

    Returns ``(W, eigenvalues, system)``; ``W`` is a dict of per-view blocks
    with ``W^T Mw W = I``.
    """
    sysm = fisher_system(F, graph, lambda1, views, jitter)
    lam, V = top_generalized_eigvecs(sysm.Mb, sysm.Mw, out_dim)
    return sysm.split(V), lam, sysm


def top_generalized_eigvecs(Mb, Mw, k: int):
    """Leading ``k`` solutions of ``Mb v = lam Mw v``, largest first, sign-canonical."""
    total = Mb.shape[0]
    if not 1 <= k <= total:
        raise ValidationError(f"out_dim={k} outside [1, {total}]")
    try:
        lam, V = scipy.linalg.eigh(Mb, Mw, subset_by_index=[total - k, total - 1])
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"generalized eigensolver failed: {exc}") from exc
    return lam[::-1], sign_canonical(V[:, ::-1])


def eigen_residual(sysm: FisherSystem, W: Mapping[str, np.ndarray], lam) -> float:
    V = np.vstack([W[v] for v in sysm.views])
    MbV = sysm.Mb @ V
    return float(np.linalg.norm(MbV - sysm.Mw @ V * np.asarray(lam)[None, :]) / np.linalg.norm(MbV))


def fisher_normalize(W: Mapping[str, np.ndarray], sysm: FisherSystem) -> dict[str, np.ndarray]:
    """Rescale ``W`` symmetrically so that ``W^T Mw W = I``."""
    V = np.vstack([W[v] for v in sysm.views])
    G = V.T @ sysm.Mw @ V
    w, U = np.linalg.eigh(0.5 * (G + G.T))
    if w[0] <= 0:
        raise NumericalError("projection lost rank; cannot renormalize")
    V = V @ ((U / np.sqrt(w)) @ U.T)
    return sysm.split(V)


def view_normalize(W: Mapping[str, np.ndarray], F: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Rescale each block so its training embeddings have unit RMS norm."""
    out = {}
    for v, w in W.items():
        rms = np.sqrt(np.sum((w.T @ F[v]) ** 2) / F[v].shape[1])
        if not rms > 0:
            raise NumericalError(f"view {v} collapsed to a zero embedding")
        out[v] = w / rms
    return out


# ---------------------------------------------------------------------------
# training loop

@dataclass
class SolveResult:
    W: dict[str, np.ndarray]
    W_init: dict[str, np.ndarray]
    eigenvalues: np.ndarray
    trace: list[float]
    converged: bool
    system: FisherSystem = field(repr=False)


def solve(F, graph: AffinityGraph, config: TrainConfig, out_dim: int) -> SolveResult:
    """Fisher initialization followed by alternating block updates.

    The objective is recorded after every sweep; iteration stops once the
    relative change drops below ``rel_tol`` or after ``max_iters`` sweeps.
    Block updates are linear in the fixed blocks, so the iterates only carry
    a direction; each sweep ends by fixing the scale, either per view
    (``normalize='view'``, unit RMS embedding) or jointly through the
    initialization constraint ``W^T Mw W = I`` (``'fisher'``).
    """
    views = config.views
    W, lam, sysm = init_fisher(F, graph, config.lambda1, out_dim, views, config.fisher_reg)
    W_init = {v: w.copy() for v, w in W.items()}
    W = view_normalize(W, F) if config.normalize == "view" else dict(W)
    J = objective(W, F, graph, config.lambda1, config.lambda2)[0]
    trace = [J]
    converged = False
    for it in range(config.max_iters):
        for v in config.order:
            W[v] = update_block(v, W, F, graph, config.lambda1, config.lambda2, config.jitter)
        if config.normalize == "fisher":
            W = fisher_normalize(W, sysm)
        elif config.normalize == "view":
            W = view_normalize(W, F)
        J_new = objective(W, F, graph, config.lambda1, config.lambda2)[0]
        if not np.isfinite(J_new):
            raise NumericalError(f"objective became non-finite at iteration {it + 1}")
        trace.append(J_new)
        rel = abs(J_new - J) / max(abs(J), np.finfo(float).tiny)
        log.debug("iter %d  J=%.6e  rel=%.3e", it + 1, J_new, rel)
        J = J_new
        if rel < config.rel_tol:
            converged = True
            break
    if not converged:
        log.info("stopped after %d iterations without reaching rel_tol=%g", config.max_iters, config.rel_tol)
    return SolveResult(W, W_init, lam, trace, converged, sysm)
