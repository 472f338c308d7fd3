"""Evaluator contract shared by the interior-point solver and its callers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp


def _empty_constraints(x):
    return np.zeros(0)


@dataclass
class NlpProblem:
    """``min f(x)  s.t.  c_eq(x) = 0,  c_ineq(x) <= 0,  lower <= x <= upper``.

    Jacobian callbacks may return dense arrays or scipy sparse matrices.
    ``hessian(x, obj_factor, y_eq, y_ineq)`` is optional and must return the
    full symmetric Hessian of ``obj_factor*f + y_eq.c_eq + y_ineq.c_ineq``;
    when absent the solver falls back to a damped BFGS approximation.
    """

    n: int
    objective: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    eq_constraints: Callable[[np.ndarray], np.ndarray] | None = None
    eq_jacobian: Callable | None = None
    ineq_constraints: Callable[[np.ndarray], np.ndarray] | None = None
    ineq_jacobian: Callable | None = None
    m_eq: int = 0
    m_ineq: int = 0
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    hessian: Callable | None = None
    x0: np.ndarray | None = None

    def __post_init__(self):
        self.lower = np.full(self.n, -np.inf) if self.lower is None else np.asarray(self.lower, float)
        self.upper = np.full(self.n, np.inf) if self.upper is None else np.asarray(self.upper, float)
        if self.lower.shape != (self.n,) or self.upper.shape != (self.n,):
            raise ValueError("bounds must have length n")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        if self.m_eq and (self.eq_constraints is None or self.eq_jacobian is None):
            raise ValueError("equality constraints declared without evaluators")
        if self.m_ineq and (self.ineq_constraints is None or self.ineq_jacobian is None):
            raise ValueError("inequality constraints declared without evaluators")

    def c_eq(self, x) -> np.ndarray:
        if not self.m_eq:
            return np.zeros(0)
        return np.asarray(self.eq_constraints(x), dtype=float)

    def c_ineq(self, x) -> np.ndarray:
        if not self.m_ineq:
            return np.zeros(0)
        return np.asarray(self.ineq_constraints(x), dtype=float)

    def jac_eq(self, x) -> sp.csr_matrix:
        if not self.m_eq:
            return sp.csr_matrix((0, self.n))
        return sp.csr_matrix(self.eq_jacobian(x))

    def jac_ineq(self, x) -> sp.csr_matrix:
        if not self.m_ineq:
            return sp.csr_matrix((0, self.n))
        return sp.csr_matrix(self.ineq_jacobian(x))


@dataclass
class Multipliers:
    eq: np.ndarray
    ineq: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @classmethod
    def zeros(cls, prob: NlpProblem) -> "Multipliers":
        return cls(np.zeros(prob.m_eq), np.zeros(prob.m_ineq), np.zeros(prob.n), np.zeros(prob.n))


def kkt_residuals(prob: NlpProblem, x, mult: Multipliers) -> tuple[float, float, float]:
    """Infinity norms of (stationarity, primal infeasibility, complementarity).

    Sign convention: ``grad f + J_eq' y_eq + J_ineq' y_ineq - z_lower + z_upper = 0``
    with ``y_ineq, z_lower, z_upper >= 0``.
    """
    x = np.asarray(x, dtype=float)
    grad = np.asarray(prob.gradient(x), dtype=float).copy()
    c_eq, c_in = prob.c_eq(x), prob.c_ineq(x)
    if prob.m_eq:
        grad += prob.jac_eq(x).T @ mult.eq
    if prob.m_ineq:
        grad += prob.jac_ineq(x).T @ mult.ineq
    grad += -mult.lower + mult.upper
    stat = float(np.max(np.abs(grad), initial=0.0))
    has_l, has_u = np.isfinite(prob.lower), np.isfinite(prob.upper)
    feas = max(
        float(np.max(np.abs(c_eq), initial=0.0)),
        float(np.max(c_in, initial=0.0)),
        float(np.max(prob.lower[has_l] - x[has_l], initial=0.0)),
        float(np.max(x[has_u] - prob.upper[has_u], initial=0.0)),
    )
    comp = max(
        float(np.max(np.abs(mult.ineq * c_in), initial=0.0)),
        float(np.max(np.abs(mult.lower[has_l] * (x[has_l] - prob.lower[has_l])), initial=0.0)),
        float(np.max(np.abs(mult.upper[has_u] * (prob.upper[has_u] - x[has_u])), initial=0.0)),
    )
    return stat, max(feas, 0.0), comp
