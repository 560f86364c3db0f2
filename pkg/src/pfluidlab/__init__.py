"""pfluid-lab: finite element laboratory for incompressible power-law fluids.

Semi-implicit Euler time stepping with Taylor-Hood elements on periodic
boxes, constitutive algebra for (p, delta)-structured stress, natural
distance error measurement with convergence-order experiments, and a
numeric verifier for the generalized discrete Gronwall inequality that
drives the error analysis.
"""

from ._backend import backend_name
from .constitutive import PDeltaParams
from .errors import (
    ConvergenceTable,
    ErrorSeries,
    ManufacturedSolution,
    beltrami_3d,
    convergence_study,
    coupling_schedule,
    eoc,
    forcing_from_solution,
    gronwall_diagnostics,
    measure_errors,
    taylor_green_2d,
    zero_solution,
)
from .gronwall import (
    GronwallData,
    GronwallVerdict,
    check_hypotheses,
    check_recursions,
    derive_constants,
    make_valid_instance,
    verify_conclusion,
)
from .mesh import PeriodicMesh, build_structured, patch, quality_report
from .solver import (
    DiscreteState,
    RunConfig,
    StepFailure,
    assemble_residual,
    convection_form,
    run,
    solve_timestep,
)
from .spaces import (
    FEFunction,
    TaylorHoodSpace,
    VectorField,
    check_projection_orders,
    project_div_preserving,
    project_patch_average,
)

__version__ = "0.1.0"

__all__ = [
    "PDeltaParams",
    "PeriodicMesh",
    "build_structured",
    "patch",
    "quality_report",
    "TaylorHoodSpace",
    "FEFunction",
    "VectorField",
    "project_div_preserving",
    "project_patch_average",
    "check_projection_orders",
    "RunConfig",
    "DiscreteState",
    "StepFailure",
    "convection_form",
    "assemble_residual",
    "solve_timestep",
    "run",
    "ManufacturedSolution",
    "taylor_green_2d",
    "beltrami_3d",
    "zero_solution",
    "forcing_from_solution",
    "measure_errors",
    "ErrorSeries",
    "coupling_schedule",
    "eoc",
    "ConvergenceTable",
    "convergence_study",
    "gronwall_diagnostics",
    "GronwallData",
    "GronwallVerdict",
    "check_hypotheses",
    "check_recursions",
    "derive_constants",
    "verify_conclusion",
    "make_valid_instance",
    "backend_name",
    "__version__",
]
