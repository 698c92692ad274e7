"""Numerical laboratory for coherent-state propagators on constant-curvature models."""

__version__ = "0.1.0"

from .geometry import ModelName, ModelSpec, PhasePoint, make_model

__all__ = ["ModelName", "ModelSpec", "PhasePoint", "make_model", "__version__"]
