"""Bounded Voronoi diagrams in a square and CVT optimization with geometric penalties."""
from .artifacts import area_histogram, edge_ratio_curve, render_svg, sample_uniform_sites
from .energy import cvt_energy, cvt_gradient_explicit, cvt_gradient_integral, lloyd_step
from .estimator import CVTEstimator
from .exceptions import DegenerateError, DegenerateInput, DegenerateRange, DegenerateVertex
from .geometry import BoxDomain, Diagram, SiteSet, build_diagram, check_nondegeneracy, nearest_site
from .optimizer import Bounds, OptimizerConfig, RunReport, Termination, minimize
from .penalties import MeritKind, MeritSpec, MeritValue, make_density, merit_eval

__version__ = "0.1.0"

__all__ = [
    "BoxDomain", "Bounds", "CVTEstimator", "Diagram", "DegenerateError", "DegenerateInput",
    "DegenerateRange", "DegenerateVertex", "MeritKind", "MeritSpec", "MeritValue",
    "OptimizerConfig", "RunReport", "SiteSet", "Termination", "area_histogram",
    "build_diagram", "check_nondegeneracy", "cvt_energy", "cvt_gradient_explicit",
    "cvt_gradient_integral", "edge_ratio_curve", "lloyd_step", "make_density", "merit_eval",
    "minimize", "nearest_site", "render_svg", "sample_uniform_sites",
]
