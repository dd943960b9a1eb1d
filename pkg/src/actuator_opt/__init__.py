"""Optimal actuator positioning and design for controlled diffusion equations."""
from .discretization import (
    SystemMatrices,
    actuator_load,
    assemble_fem_1d,
    assemble_spectral_2d,
    project_initial_condition,
)
from .geometry import (
    GridIndicator2D,
    Intervals1D,
    LevelSetField,
    count_components,
    disk,
    levelset_from_shape,
    measure,
    reinitialize,
    shape_from_levelset,
    symmetric_difference_measure,
    translate,
)
from .lqr import CostReport, lq_cost, simulate_closed_loop, solve_lq, total_cost, worst_case_cost, worst_case_initial
from .optimize import (
    OptimizeConfig,
    RunRecord,
    continuation,
    levelset_design,
    position_descent,
    position_scan,
    worst_case_design,
)
from .riccati import RiccatiSolution, solve_are, solve_lyapunov
from .sensitivity import Quadrature, fd_shape_oracle, fd_topo_oracle, shape_gradient, topological_field

__version__ = "0.1.0"
