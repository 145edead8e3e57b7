"""Series solutions of the prescribed mean-curvature equation over R^3."""

from .grid_fields import GeometrySign, GridSpec, ScalarField, VectorField

__version__ = "0.1.0"

__all__ = ["GeometrySign", "GridSpec", "ScalarField", "VectorField", "__version__"]
