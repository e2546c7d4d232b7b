"""Synthetic benchmark fixture and the end-to-end runs built on it."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass

from .dataset import Dataset, synthesize
from .pipeline import baseline_rank1, evaluate, train
from .representation import MODEL_TYPES
from .solver import TrainConfig


@dataclass(frozen=True)
class FixtureConfig:
    classes: int = 10
    sets_per_class: int = 5
    samples_per_set: int = 20
    dim: int = 20
    separation: float = 5.0
    seed: int = 0
    offset: float = 0.5

    def make(self) -> tuple[Dataset, Dataset]:
        return synthesize(**asdict(self))


# Settings tuned for the 20-sample, 20-dim sets of the fixture. The
# learning weights (lambda1, lambda2, k1, k2) stay at their defaults.
FIXTURE_OVERRIDES = dict(subspace_dim=5, ridge=1e-2, sigma_scale=0.5, max_iters=50)


def fixture_train_config(**overrides) -> TrainConfig:
    return TrainConfig(**{**FIXTURE_OVERRIDES, **overrides})


def recognition_report(fixture: FixtureConfig = FixtureConfig(), model_types=None, **overrides) -> dict[str, float]:
    """Held-out V2S and V2V rank-1 per model type plus the mean-only baselines.

    V2S probes are the held-out videos against the held-out stills; V2V
    probes are the held-out videos against the training videos.
    """
    train_ds, test_ds = fixture.make()
    out = {
        "baseline_v2s": baseline_rank1(test_ds, test_ds, "v2s"),
        "baseline_v2v": baseline_rank1(test_ds, train_ds, "v2v"),
    }
    for mt in model_types or MODEL_TYPES:
        t0 = time.perf_counter()
        m3 = train(train_ds, fixture_train_config(model_type=mt, **overrides), [test_ds])
        m2 = train(train_ds, fixture_train_config(model_type=mt, mode="two_view", **overrides), [test_ds])
        out[f"{mt}_v2s"] = evaluate(m3, test_ds, test_ds, "v2s")["rank1"]
        out[f"{mt}_v2v"] = evaluate(m2, test_ds, train_ds, "v2v")["rank1"]
        out[f"{mt}_iters"] = float(len(m3.trace) - 1)
        out[f"{mt}_seconds"] = time.perf_counter() - t0
    return out
