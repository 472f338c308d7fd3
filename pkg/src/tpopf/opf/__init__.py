from .build import (
    COUPLINGS,
    CURRENT_VOLTAGE,
    FORMULATIONS,
    OBJECTIVES,
    POWER_VOLTAGE,
    DimensionMismatch,
    MissingLimit,
    OpfOptions,
    OpfProblem,
    branch_rating_pu,
    build_current_voltage,
    build_opf,
    build_power_voltage,
)
from .layout import VariableLayout
from .quadratic import Affine, QuadraticBuilder, QuadraticMap
from .solution import OpfSolution, extract_solution, flatten_solution, solve_opf
