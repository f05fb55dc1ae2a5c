"""Busemann embeddings of hyperbolic discs and their volume-non-increasing projections.

Modules
-------
hyperboloid   Minkowski-model geometry and the disc chart.
sphere        Quadrature grids on the ideal boundary and boundary functions.
metric        Exact and conformally perturbed metrics, geodesics.
embedding     The Busemann embedding, its gradients and densities.
projector     The projection P and its differential.
compression   The compressed projection P_sigma.
verification  Property checks, sweeps and fitted constants.
filling       Discrete filling experiment on a disc.
config, cli   Run configuration and the ``hypfill`` command.
"""
from .embedding import EmbeddingField
from .metric import ConformalBump, MetricField, default_bump
from .projector import differential, project
from .sphere import BoundaryFunction, make_grid

__all__ = [
    "BoundaryFunction",
    "ConformalBump",
    "EmbeddingField",
    "MetricField",
    "default_bump",
    "differential",
    "make_grid",
    "project",
]
__version__ = "0.1.0"
