"""Q-valued functions: the metric space A_Q(R^n), its embeddings, extension and selection
algorithms, a discrete Dirichlet minimiser on planar meshes and frequency analysis."""

from .aq_core import DimensionError, Matching, PreconditionError, QPoint, metric_g

__version__ = "0.1.0"

__all__ = ["DimensionError", "Matching", "PreconditionError", "QPoint", "metric_g", "__version__"]
