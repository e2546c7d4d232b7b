"""Cross Euclidean-to-Riemannian metric learning (CERML).

Still images live in a Euclidean view; video sets are summarized by a mean
and a variation model on a Riemannian manifold (Grassmann, affine Grassmann
or SPD). Kernel maps and learned projections bring every view into one
common Euclidean space where still-to-video and video-to-video matching is a
plain distance comparison.
"""
from .dataset import Dataset, SetSpec, synthesize
from .errors import NumericalError, ValidationError
from .pipeline import ProjectionModel, evaluate, train
from .representation import represent
from .solver import TrainConfig

__all__ = [
    "Dataset", "SetSpec", "synthesize", "NumericalError", "ValidationError",
    "ProjectionModel", "evaluate", "train", "represent", "TrainConfig",
]
__version__ = "0.1.0"
