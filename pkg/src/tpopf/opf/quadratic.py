"""Vectors of quadratic functions with analytic Jacobians and Hessians.

Every OPF constraint in rectangular coordinates is at most quadratic in the
decision vector, so one container covers all of them:

    c_k(x) = sum_t coef_t * x[i_t] * x[j_t] + sum_l a_l * x[col_l] + b_k
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class Affine:
    """Affine expression ``sum coef*x[idx] + const`` used while building rows."""

    terms: tuple[tuple[int, float], ...] = ()
    const: float = 0.0

    @staticmethod
    def var(idx: int, coef: float = 1.0) -> "Affine":
        return Affine(((int(idx), float(coef)),))

    @staticmethod
    def constant(value: float) -> "Affine":
        return Affine((), float(value))

    def __add__(self, other: "Affine") -> "Affine":
        return Affine(self.terms + other.terms, self.const + other.const)

    def __sub__(self, other: "Affine") -> "Affine":
        return self + other * -1.0

    def __mul__(self, scale: float) -> "Affine":
        return Affine(tuple((i, c * scale) for i, c in self.terms), self.const * scale)

    __rmul__ = __mul__

    def __neg__(self) -> "Affine":
        return self * -1.0


def affine_sum(items) -> Affine:
    terms: list[tuple[int, float]] = []
    const = 0.0
    for item in items:
        terms.extend(item.terms)
        const += item.const
    return Affine(tuple(terms), const)


class QuadraticBuilder:
    def __init__(self, n: int):
        self.n = n
        self.tags: list[tuple] = []
        self._q_rows: list[int] = []
        self._q_i: list[int] = []
        self._q_j: list[int] = []
        self._q_c: list[float] = []
        self._l_rows: list[int] = []
        self._l_cols: list[int] = []
        self._l_c: list[float] = []
        self._const: list[float] = []

    @property
    def n_rows(self) -> int:
        return len(self._const)

    def row(self, tag: tuple = ()) -> int:
        self.tags.append(tag)
        self._const.append(0.0)
        return len(self._const) - 1

    def add(self, row: int, expr: Affine, scale: float = 1.0) -> None:
        for idx, coef in expr.terms:
            self._l_rows.append(row)
            self._l_cols.append(idx)
            self._l_c.append(coef * scale)
        self._const[row] += expr.const * scale

    def add_product(self, row: int, a: Affine, b: Affine, scale: float = 1.0) -> None:
        """Add ``scale * a * b``."""
        if scale == 0.0:
            return
        for ia, ca in a.terms:
            for ib, cb in b.terms:
                self._q_rows.append(row)
                self._q_i.append(ia)
                self._q_j.append(ib)
                self._q_c.append(scale * ca * cb)
        if b.const:
            self.add(row, Affine(a.terms), scale * b.const)
        if a.const:
            self.add(row, Affine(b.terms), scale * a.const)
        self._const[row] += scale * a.const * b.const

    def add_square(self, row: int, a: Affine, scale: float = 1.0) -> None:
        self.add_product(row, a, a, scale)

    def build(self) -> "QuadraticMap":
        return QuadraticMap(
            self.n_rows,
            self.n,
            np.array(self._q_rows, dtype=np.int64),
            np.array(self._q_i, dtype=np.int64),
            np.array(self._q_j, dtype=np.int64),
            np.array(self._q_c, dtype=float),
            np.array(self._l_rows, dtype=np.int64),
            np.array(self._l_cols, dtype=np.int64),
            np.array(self._l_c, dtype=float),
            np.array(self._const, dtype=float),
            list(self.tags),
        )


class QuadraticMap:
    """Evaluator for a vector of quadratic functions with fixed sparsity."""

    def __init__(self, m, n, q_rows, q_i, q_j, q_c, l_rows, l_cols, l_c, const, tags=None):
        self.m, self.n = m, n
        self.q_rows, self.q_i, self.q_j, self.q_c = q_rows, q_i, q_j, q_c
        self.l_rows, self.l_cols, self.l_c = l_rows, l_cols, l_c
        self.const = const
        self.tags = tags if tags is not None else [()] * m
        # Jacobian: d/dx_i -> coef*x_j, d/dx_j -> coef*x_i, plus linear part
        rows = np.concatenate([q_rows, q_rows, l_rows])
        cols = np.concatenate([q_i, q_j, l_cols])
        self._jac_key, self._jac_inv = np.unique(rows * n + cols, return_inverse=True)
        self.jac_rows, self.jac_cols = np.divmod(self._jac_key, n) if n else (self._jac_key, self._jac_key)
        self._jac_lin = np.bincount(
            self._jac_inv[2 * q_rows.size :], weights=l_c, minlength=self._jac_key.size
        ).astype(float)
        hr = np.concatenate([q_i, q_j])
        hc = np.concatenate([q_j, q_i])
        self._hess_key, self._hess_inv = np.unique(hr * n + hc, return_inverse=True)
        self.hess_rows, self.hess_cols = np.divmod(self._hess_key, n) if n else (self._hess_key, self._hess_key)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = self.const.copy()
        if self.q_c.size:
            out += np.bincount(self.q_rows, weights=self.q_c * x[self.q_i] * x[self.q_j], minlength=self.m)
        if self.l_c.size:
            out += np.bincount(self.l_rows, weights=self.l_c * x[self.l_cols], minlength=self.m)
        return out

    def jacobian_values(self, x) -> np.ndarray:
        """Jacobian entries at ``(jac_rows, jac_cols)``."""
        x = np.asarray(x, dtype=float)
        vals = np.concatenate([self.q_c * x[self.q_j], self.q_c * x[self.q_i]])
        nq = vals.size
        out = self._jac_lin.copy()
        if nq:
            out += np.bincount(self._jac_inv[:nq], weights=vals, minlength=self._jac_key.size)
        return out

    def jacobian(self, x) -> sp.csr_matrix:
        return sp.csr_matrix((self.jacobian_values(x), (self.jac_rows, self.jac_cols)), shape=(self.m, self.n))

    def hessian(self, weights) -> sp.csr_matrix:
        """Hessian of ``weights . c(x)`` (constant, since c is quadratic)."""
        w = np.asarray(weights, dtype=float)
        coef = self.q_c * w[self.q_rows] if self.q_c.size else self.q_c
        vals = np.bincount(
            self._hess_inv, weights=np.concatenate([coef, coef]), minlength=self._hess_key.size
        ).astype(float)
        return sp.csr_matrix((vals, (self.hess_rows, self.hess_cols)), shape=(self.n, self.n))
