"""diracsplit: time-splitting Fourier pseudospectral solvers for the
1D/2D Dirac equation with an electric potential, plus the symbolic
order-condition machinery behind the compact sixth-order scheme and a
convergence benchmark harness.
"""

from .model import (
    Grid,
    PhysParams,
    Potential,
    SpinorField,
    current,
    custom_sampled_potential,
    density,
    gaussian_ic,
    honeycomb_potential,
    make_grid,
    mass,
    rational_potential_1d,
    zero_potential,
)
from .harness import (
    ErrorRecord,
    OrderFit,
    Problem,
    ReferenceProtocol,
    SpatialStudy,
    SuperresResult,
    SweepSpec,
    TemporalStudy,
    error_metrics,
    fit_order,
    gaussian_problem_1d,
    honeycomb_problem,
    mass_series,
    per_step_time,
    reference_self_distance,
    reference_solution,
    resolve_cache_dir,
    spatial_convergence,
    successive_rates,
    superres_problem,
    superres_sweep,
    temporal_convergence,
)
from .schemes import CATALOG_NAMES, SchemeSpec, SchemeStep, catalog, evolve, op_count, step
from .spectral import (
    SpectralCache,
    WFlowCache,
    apply_T_flow,
    apply_W_flow,
    build_cache,
    forward_transform,
    inverse_transform,
)

__version__ = "0.1.0"

__all__ = [
    "Grid",
    "PhysParams",
    "Potential",
    "SpinorField",
    "current",
    "custom_sampled_potential",
    "density",
    "gaussian_ic",
    "honeycomb_potential",
    "make_grid",
    "mass",
    "rational_potential_1d",
    "zero_potential",
    "ErrorRecord",
    "OrderFit",
    "Problem",
    "ReferenceProtocol",
    "SpatialStudy",
    "SuperresResult",
    "SweepSpec",
    "TemporalStudy",
    "error_metrics",
    "fit_order",
    "gaussian_problem_1d",
    "honeycomb_problem",
    "mass_series",
    "per_step_time",
    "reference_self_distance",
    "reference_solution",
    "resolve_cache_dir",
    "spatial_convergence",
    "successive_rates",
    "superres_problem",
    "superres_sweep",
    "temporal_convergence",
    "CATALOG_NAMES",
    "SchemeSpec",
    "SchemeStep",
    "catalog",
    "evolve",
    "op_count",
    "step",
    "SpectralCache",
    "WFlowCache",
    "apply_T_flow",
    "apply_W_flow",
    "build_cache",
    "forward_transform",
    "inverse_transform",
    "__version__",
]
