"""Biharmonic (clamped-plate) Green functions: exact kernels, a planar
finite-difference solver, and empirical checks of the two-sided estimates."""

from .kernels import (
    ball_green,
    boggio_integral,
    comparison_kernel,
    comparison_kernel_casewise,
    fundamental_solution,
    halfspace_green,
    unit_ball_volume,
)
from .geometry import (
    Disk,
    Domain,
    Ellipse,
    GridMask,
    Limacon,
    PointPair,
    Rectangle,
    grid_discretize,
    parse_domain,
    sample_pairs,
)
from .solver import (
    GreenSample,
    GridField,
    GridOperator,
    SolverError,
    assemble_bilaplacian,
    convergence_study,
    discrete_green,
    green_samples,
    green_value,
    solve,
)
from .analysis import (
    BlowupResult,
    BlowupStep,
    EstimateBand,
    NegativePartReport,
    NehariResult,
    ReflectionField,
    RegionSamples,
    ball_pair_samples,
    band_violations,
    blowup_sequence,
    duffin_extend,
    duffin_refinement_study,
    duffin_residual,
    estimate_constants,
    exact_disk_samples,
    halfplane_field,
    halfspace_slice_field,
    negative_part_report,
    nehari_region_check,
    positivity_radius,
)

__version__ = "0.1.0"
