from .derivatives import DerivativeReport, check_derivatives
from .ipm import (
    INFEASIBLE,
    MAX_ITER,
    NUMERICAL_FAILURE,
    OPTIMAL,
    IterationLog,
    SolveReport,
    SolverOptions,
    solve,
)
from .problem import Multipliers, NlpProblem, kkt_residuals
