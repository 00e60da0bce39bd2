"""Non-local multicontinuum upscaling for PDEs on perforated domains.

Builds constrained energy minimizing multiscale bases on oversampled
coarse regions (one background continuum per block plus perforation
boundary continua), assembles the non-local coarse systems T = R A R^T,
and solves steady Laplace/elasticity and time-dependent problems with
Neumann or Robin data on the perforation boundaries.
"""

from .basis import (
    BasisFunction,
    BasisWorkspace,
    DofLabel,
    ProjectionMatrix,
    basis_decay_profile,
    build_basis_elasticity,
    build_basis_scalar,
    build_constraints,
    measures_for,
    solve_local_basis,
)
from .coarse import (
    UpscaledSystem,
    assemble_parabolic,
    assemble_robin,
    assemble_steady,
    coarse_time_march,
    downscale,
    solve_steady,
    zero_row_sum,
)
from .errors import (
    ConfigError,
    DegenerateTriangle,
    DimensionMismatch,
    EmptyBlock,
    GeometryError,
    InvalidContinuum,
    NlmcError,
    NonNestedGrids,
    NotConverged,
    PerforationOverlap,
    PerforationTooSmall,
    RankDeficientConstraints,
    SaddleSolveFailure,
    SingularSystem,
    SolverError,
    ZeroReference,
)
from .fem import MaterialParams
from .geometry import PerforatedGeometry, Perforation, generate_layout, read_geometry, write_geometry
from .mesh import (
    CoarseGrid,
    FineMesh,
    OversampleRegion,
    SegmentIndex,
    build_coarse_grid,
    build_fine_mesh,
    index_perforation_segments,
    oversample,
)
from .metrics import CellAverageField, ErrorReport, cell_average, relative_l2
from .scenario import ScenarioSpec, geometry_for, load_scenario
from .experiments import reproduce_tables, run_scenario

__version__ = "0.1.0"

__all__ = [
    "BasisFunction",
    "BasisWorkspace",
    "CellAverageField",
    "CoarseGrid",
    "ConfigError",
    "DegenerateTriangle",
    "DimensionMismatch",
    "DofLabel",
    "EmptyBlock",
    "ErrorReport",
    "FineMesh",
    "GeometryError",
    "InvalidContinuum",
    "MaterialParams",
    "NlmcError",
    "NonNestedGrids",
    "NotConverged",
    "OversampleRegion",
    "Perforation",
    "PerforatedGeometry",
    "PerforationOverlap",
    "PerforationTooSmall",
    "ProjectionMatrix",
    "RankDeficientConstraints",
    "SaddleSolveFailure",
    "ScenarioSpec",
    "SegmentIndex",
    "SingularSystem",
    "SolverError",
    "UpscaledSystem",
    "ZeroReference",
    "assemble_parabolic",
    "assemble_robin",
    "assemble_steady",
    "basis_decay_profile",
    "build_basis_elasticity",
    "build_basis_scalar",
    "build_coarse_grid",
    "build_constraints",
    "build_fine_mesh",
    "cell_average",
    "coarse_time_march",
    "downscale",
    "generate_layout",
    "geometry_for",
    "index_perforation_segments",
    "load_scenario",
    "measures_for",
    "oversample",
    "read_geometry",
    "relative_l2",
    "reproduce_tables",
    "run_scenario",
    "solve_local_basis",
    "solve_steady",
    "write_geometry",
    "zero_row_sum",
]
