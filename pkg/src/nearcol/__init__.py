"""Regularized flows, manifold curves and ejection-collision searches for the planar circular restricted three-body problem."""
from .core import EnergyContext, Tolerances, DEFAULT_TOLERANCES, make_context
from .charts import Chart, PhasePoint, convert, energy

__version__ = "0.1.0"
__all__ = ["EnergyContext", "Tolerances", "DEFAULT_TOLERANCES", "make_context",
           "Chart", "PhasePoint", "convert", "energy"]
