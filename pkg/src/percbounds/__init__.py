"""Upper bounds on percolation thresholds, with simulation checks."""

from .bounds import BoundResult, best_bound, generate_table
from .lattice import FAMILIES, ModelSpec

__all__ = ["BoundResult", "FAMILIES", "ModelSpec", "best_bound", "generate_table"]
__version__ = "0.1.0"
