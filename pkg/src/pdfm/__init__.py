"""Fréchet means and 2-Wasserstein geometry of persistence diagrams."""

from .diagram import (
    DIAGONAL,
    PersistenceDiagram,
    PlanePoint,
    diagonal_projection,
    load_diagram,
    load_diagram_dir,
    perp_norm,
    perpendicular,
    save_diagram,
)
from .errors import CapExceededError, DiagramParseError, DiagramValidationError
from .frechet import (
    FrechetResult,
    brute_force_optimal_grouping,
    certify_unique_mean,
    enumerate_groupings,
    frechet_function,
    turner_mean,
)
from .grouping import (
    FlatnessReport,
    Grouping,
    check_flatness,
    find_flat_grouping,
    mean_diagram,
    mean_point,
    variance_closed_form,
    variance_definitional,
)
from .wasserstein import Matching, brute_force_w2, geodesic, total_persistence, w2_distance

__version__ = "0.1.0"
