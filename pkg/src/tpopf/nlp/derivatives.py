"""Central finite-difference check of user-supplied derivatives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem import NlpProblem


@dataclass
class DerivativeReport:
    max_error: float
    worst: tuple[str, int, int] | None  # (which, row, col)
    errors: dict[str, float]

    def __str__(self) -> str:
        return f"max relative error {self.max_error:.3e} at {self.worst}"


def _relative(analytic, numeric):
    return np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))


def check_derivatives(prob: NlpProblem, x, step: float = 1e-6) -> DerivativeReport:
    """Compare gradient and both Jacobians with central differences.

    Errors are ``|analytic - fd| / max(1, |fd|)``; the worst entry is reported
    with its (row, column). The gradient is reported as row 0.
    """
    x = np.asarray(x, dtype=float)
    n = prob.n
    fd_grad = np.zeros(n)
    fd_eq = np.zeros((prob.m_eq, n))
    fd_in = np.zeros((prob.m_ineq, n))
    for k in range(n):
        xp, xm = x.copy(), x.copy()
        xp[k] += step
        xm[k] -= step
        fd_grad[k] = (prob.objective(xp) - prob.objective(xm)) / (2 * step)
        if prob.m_eq:
            fd_eq[:, k] = (prob.c_eq(xp) - prob.c_eq(xm)) / (2 * step)
        if prob.m_ineq:
            fd_in[:, k] = (prob.c_ineq(xp) - prob.c_ineq(xm)) / (2 * step)
    blocks = {
        "gradient": (np.asarray(prob.gradient(x), dtype=float)[None, :], fd_grad[None, :]),
        "eq_jacobian": (prob.jac_eq(x).toarray(), fd_eq),
        "ineq_jacobian": (prob.jac_ineq(x).toarray(), fd_in),
    }
    errors: dict[str, float] = {}
    worst, max_err = None, 0.0
    for name, (analytic, numeric) in blocks.items():
        if analytic.size == 0:
            errors[name] = 0.0
            continue
        err = _relative(analytic, numeric)
        r, c = np.unravel_index(int(np.argmax(err)), err.shape)
        errors[name] = float(err[r, c])
        if err[r, c] > max_err or worst is None:
            max_err, worst = float(err[r, c]), (name, int(r), int(c))
    return DerivativeReport(max_err, worst, errors)
