"""Primal-dual interior-point method for smooth nonlinear programs.

Inequalities become equalities with non-negative slacks, ``c_ineq(x) + s = 0``,
and all simple bounds (including ``s >= 0``) are handled with a logarithmic
barrier. Each iteration takes a regularised Newton step on the perturbed KKT
conditions, cut back by the fraction-to-boundary rule and an l1 merit line
search with one second-order correction. The barrier parameter follows a
monotone Fiacco-McCormick schedule.

Variables whose bounds coincide are fixed and removed from the linear
algebra. The Hessian of the Lagrangian is exact when the problem supplies
one, otherwise a Powell-damped BFGS approximation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .problem import Multipliers, NlpProblem, kkt_residuals

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
MAX_ITER = "max-iter"
INFEASIBLE = "infeasible-detected"
NUMERICAL_FAILURE = "numerical-failure"


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-6
    constr_tol: float = 1e-8
    max_iter: int = 300
    mu0: float = 0.1
    mu_factor: float = 0.2
    tau: float = 0.995
    kappa_eps: float = 10.0
    reg_min: float = 1e-8
    reg_max: float = 1e20
    bound_push: float = 1e-2
    infeasible_window: int = 30
    hessian: str = "auto"  # "auto" | "exact" | "bfgs"

    def __post_init__(self):
        if min(self.tol, self.constr_tol, self.mu0, self.mu_factor, self.reg_min) <= 0 or self.max_iter < 0:
            raise ValueError("solver options must be positive")
        if not 0 < self.tau < 1 or not 0 < self.mu_factor < 1:
            raise ValueError("tau and mu_factor must lie in (0, 1)")
        if self.hessian not in ("auto", "exact", "bfgs"):
            raise ValueError("hessian must be auto, exact or bfgs")


@dataclass
class IterationLog:
    iteration: int
    mu: float
    objective: float
    inf_pr: float
    inf_du: float
    compl: float
    alpha_pr: float
    alpha_du: float
    reg: float
    min_gap: float
    ls_trials: int


@dataclass
class SolveReport:
    status: str
    x: np.ndarray
    objective: float
    multipliers: Multipliers
    kkt: tuple[float, float, float]
    iterations: int
    log: list[IterationLog] = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.status == OPTIMAL

    def log_rows(self) -> list[dict]:
        return [asdict(r) for r in self.log]


class _Workspace:
    """Evaluation cache for the reduced (free-variable) problem."""

    def __init__(self, prob: NlpProblem, free: np.ndarray, x_full: np.ndarray):
        self.prob = prob
        self.free = free
        self.x_full = x_full

    def full(self, xf):
        x = self.x_full.copy()
        x[self.free] = xf
        return x

    def evaluate(self, xf):
        x = self.full(xf)
        f = float(self.prob.objective(x))
        c_eq = self.prob.c_eq(x)
        c_in = self.prob.c_ineq(x)
        return x, f, c_eq, c_in

    def derivatives(self, x):
        g = np.asarray(self.prob.gradient(x), dtype=float)[self.free]
        j_eq = self.prob.jac_eq(x)[:, self.free]
        j_in = self.prob.jac_ineq(x)[:, self.free]
        return g, j_eq.tocsr(), j_in.tocsr()


def _push_into_interior(x, lo, hi, push):
    x = x.copy()
    has_l, has_u = np.isfinite(lo), np.isfinite(hi)
    width = np.where(has_l & has_u, hi - lo, np.inf)
    p_l = np.minimum(push * np.maximum(1.0, np.abs(np.where(has_l, lo, 0.0))), push * width)
    p_u = np.minimum(push * np.maximum(1.0, np.abs(np.where(has_u, hi, 0.0))), push * width)
    x = np.where(has_l, np.maximum(x, lo + p_l), x)
    x = np.where(has_u, np.minimum(x, hi - p_u), x)
    return x


def _fraction_to_boundary(value, step, tau):
    """Largest alpha in (0, 1] keeping ``value + alpha*step >= (1-tau)*value``."""
    neg = step < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-tau * value[neg] / step[neg])))


def solve(prob: NlpProblem, opts: SolverOptions | None = None, x0=None) -> SolveReport:
    opts = opts or SolverOptions()
    if x0 is None:
        x0 = prob.x0 if prob.x0 is not None else np.zeros(prob.n)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (prob.n,) or not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be a finite vector of length n")
    if opts.hessian == "exact" and prob.hessian is None:
        raise ValueError("exact Hessian requested but problem has none")
    use_exact = prob.hessian is not None and opts.hessian != "bfgs"

    lo, hi = prob.lower, prob.upper
    fixed = np.isfinite(lo) & np.isfinite(hi) & (hi - lo <= 1e-12 * np.maximum(1.0, np.abs(lo)))
    free = np.flatnonzero(~fixed)
    x_full = x0.copy()
    x_full[fixed] = lo[fixed]
    x_full[free] = _push_into_interior(x0[free], lo[free], hi[free], opts.bound_push)
    ws = _Workspace(prob, free, x_full)

    nf, m_eq, m_in = free.size, prob.m_eq, prob.m_ineq
    nw = nf + m_in
    m = m_eq + m_in
    lw = np.concatenate([lo[free], np.zeros(m_in)])
    uw = np.concatenate([hi[free], np.full(m_in, np.inf)])
    has_l, has_u = np.isfinite(lw), np.isfinite(uw)
    il, iu = np.flatnonzero(has_l), np.flatnonzero(has_u)

    x, f, c_eq, c_in = ws.evaluate(x_full[free])
    s = np.maximum(-c_in, opts.bound_push)
    w = np.concatenate([x[free], s])
    mu = opts.mu0
    mu_min = opts.tol / 10.0
    gap_l, gap_u = w[il] - lw[il], uw[iu] - w[iu]
    z_l, z_u = mu / gap_l, mu / gap_u
    y = np.zeros(m)
    nu = 1.0
    delta_last = 0.0
    bfgs = np.eye(nf) if not use_exact else None

    def assemble(g, j_eq, j_in):
        jt = sp.bmat([[j_eq, None], [j_in, sp.identity(m_in)]], format="csr") if m else sp.csr_matrix((0, nw))
        grad = np.concatenate([g, np.zeros(m_in)])
        return jt, grad

    def barrier_objective(fval, wv):
        val = fval
        if il.size:
            val -= mu * np.sum(np.log(wv[il] - lw[il]))
        if iu.size:
            val -= mu * np.sum(np.log(uw[iu] - wv[iu]))
        return val

    def constraint_vector(ce, ci, wv):
        return np.concatenate([ce, ci + wv[nf:]])

    def merit(fval, wv, cvec):
        return barrier_objective(fval, wv) + nu * np.sum(np.abs(cvec))

    g, j_eq, j_in = ws.derivatives(x)
    jt, grad = assemble(g, j_eq, j_in)
    ctil = constraint_vector(c_eq, c_in, w)

    # least-squares multiplier estimate
    if m:
        k0 = sp.bmat([[sp.identity(nw), jt.T], [jt, None]], format="csc")
        rhs = -np.concatenate([grad - _scatter(z_l, il, nw) + _scatter(z_u, iu, nw), np.zeros(m)])
        try:
            sol = spla.splu(k0).solve(rhs)
            y_ls = sol[nw:]
            if np.all(np.isfinite(y_ls)) and np.max(np.abs(y_ls), initial=0.0) <= 1e3:
                y = y_ls
        except RuntimeError:
            pass

    history: list[IterationLog] = []
    status = MAX_ITER
    alpha_pr = alpha_du = 0.0
    ls_trials = 0
    best_inf = math.inf
    last_improve = 0
    it = 0
    while True:
        gap_l, gap_u = w[il] - lw[il], uw[iu] - w[iu]
        zl_full, zu_full = _scatter(z_l, il, nw), _scatter(z_u, iu, nw)
        dual = grad + (jt.T @ y if m else 0.0) - zl_full + zu_full
        inf_du = float(np.max(np.abs(dual), initial=0.0))
        inf_pr = float(np.max(np.abs(ctil), initial=0.0))
        prods = np.concatenate([gap_l * z_l, gap_u * z_u])
        compl = float(np.max(prods, initial=0.0))
        min_gap = float(min(np.min(gap_l, initial=np.inf), np.min(gap_u, initial=np.inf)))
        history.append(IterationLog(it, mu, f, inf_pr, inf_du, compl, alpha_pr, alpha_du, delta_last, min_gap, ls_trials))
        log.debug("it %3d mu %.2e f %.6e pr %.2e du %.2e co %.2e", it, mu, f, inf_pr, inf_du, compl)

        if not (math.isfinite(f) and math.isfinite(inf_du) and math.isfinite(inf_pr)):
            status = NUMERICAL_FAILURE
            break
        if inf_du <= opts.tol and compl <= opts.tol and inf_pr <= opts.constr_tol:
            mult = _full_multipliers(prob, ws, x, y, z_l, z_u, il, iu, nf, m_eq)
            stat, feas, comp = kkt_residuals(prob, x, mult)
            if stat <= opts.tol and comp <= opts.tol and feas <= opts.constr_tol:
                status = OPTIMAL
                break
        if inf_pr < 0.99 * best_inf:
            best_inf, last_improve = inf_pr, it
        elif inf_pr > max(opts.constr_tol, opts.tol) and it - last_improve >= opts.infeasible_window:
            status = INFEASIBLE
            break
        if it >= opts.max_iter:
            status = MAX_ITER
            break

        # barrier update
        while mu > mu_min:
            e_mu = max(inf_du, inf_pr, float(np.max(np.abs(prods - mu), initial=0.0)))
            if e_mu > opts.kappa_eps * mu:
                break
            mu = max(mu_min, opts.mu_factor * mu)
            nu = 1.0

        # Newton system
        if use_exact:
            y_eq, y_in = y[:m_eq], y[m_eq:]
            hx = sp.csr_matrix(prob.hessian(x, 1.0, y_eq, y_in))[free][:, free]
        else:
            hx = sp.csr_matrix(bfgs)
        sigma = np.zeros(nw)
        sigma[il] += z_l / gap_l
        sigma[iu] += z_u / gap_u
        grad_phi = grad.copy()
        grad_phi[il] -= mu / gap_l
        grad_phi[iu] += mu / gap_u
        rhs = -np.concatenate([grad_phi + (jt.T @ y if m else 0.0), ctil])
        h_block = sp.bmat([[hx, None], [None, sp.csr_matrix((m_in, m_in))]], format="csr") if m_in else hx
        step = _solve_kkt(h_block, sigma, jt, rhs, nw, m, opts, delta_last)
        if step is None:
            status = NUMERICAL_FAILURE
            break
        dw, dy, delta_last, lu, delta_c, curv = step
        dz_l = mu / gap_l - z_l - (z_l / gap_l) * dw[il]
        dz_u = mu / gap_u - z_u + (z_u / gap_u) * dw[iu]

        tau = max(opts.tau, 1.0 - mu)
        alpha_max = min(
            _fraction_to_boundary(gap_l, dw[il], tau),
            _fraction_to_boundary(gap_u, -dw[iu], tau),
        )
        alpha_du = min(_fraction_to_boundary(z_l, dz_l, tau), _fraction_to_boundary(z_u, dz_u, tau))

        c_norm = float(np.sum(np.abs(ctil)))
        slope_obj = float(grad_phi @ dw)
        # below rounding level the violation carries no signal; raising the
        # penalty on it would let noise in |c| veto every trial step
        if c_norm > 1e-12 * max(1.0, m):
            nu_trial = (slope_obj + 0.5 * max(curv, 0.0)) / (0.9 * c_norm)
            if nu < nu_trial:
                nu = nu_trial + 1.0
        phi0 = merit(f, w, ctil)
        slope = slope_obj - nu * c_norm
        slack_eps = 10.0 * np.finfo(float).eps * max(1.0, abs(phi0))
        accepted = None
        alpha = alpha_max
        ls_trials = 0
        while alpha > 1e-14:
            ls_trials += 1
            w_try = w + alpha * dw
            x_t, f_t, ce_t, ci_t = ws.evaluate(w_try[:nf])
            c_t = constraint_vector(ce_t, ci_t, w_try)
            phi_t = merit(f_t, w_try, c_t)
            if math.isfinite(phi_t) and phi_t <= phi0 + 1e-4 * alpha * slope + slack_eps:
                accepted = (alpha, w_try, x_t, f_t, ce_t, ci_t, c_t, dy)
                break
            if ls_trials == 1 and m:
                # second-order correction on the full trial step
                rhs_soc = rhs.copy()
                rhs_soc[nw:] = -(alpha * ctil + c_t)
                sol = lu.solve(rhs_soc)
                dw_soc = sol[:nw]
                a_soc = min(
                    _fraction_to_boundary(gap_l, dw_soc[il], tau),
                    _fraction_to_boundary(gap_u, -dw_soc[iu], tau),
                )
                w_soc = w + a_soc * dw_soc
                x_s, f_s, ce_s, ci_s = ws.evaluate(w_soc[:nf])
                c_s = constraint_vector(ce_s, ci_s, w_soc)
                phi_s = merit(f_s, w_soc, c_s)
                if math.isfinite(phi_s) and phi_s <= phi0 + 1e-4 * alpha * slope + slack_eps:
                    accepted = (alpha, w_soc, x_s, f_s, ce_s, ci_s, c_s, dy)
                    ls_trials += 1
                    break
            alpha *= 0.5
        if accepted is None:
            # no acceptable decrease: take a short step so the iteration can continue
            alpha = min(alpha_max, 1e-6)
            w_try = w + alpha * dw
            x_t, f_t, ce_t, ci_t = ws.evaluate(w_try[:nf])
            accepted = (alpha, w_try, x_t, f_t, ce_t, ci_t, constraint_vector(ce_t, ci_t, w_try), dy)
        alpha_pr, w_new, x_new, f, c_eq, c_in, ctil, dy = accepted

        g_new, j_eq, j_in = ws.derivatives(x_new)
        jt_new, grad_new = assemble(g_new, j_eq, j_in)
        y_new = y + alpha_pr * dy
        if not use_exact:
            _damped_bfgs(bfgs, w_new[:nf] - w[:nf], grad_new[:nf] + (jt_new.T @ y_new)[:nf] - grad[:nf] - (jt.T @ y_new)[:nf])
        z_l = z_l + alpha_du * dz_l
        z_u = z_u + alpha_du * dz_u
        w, x, y, jt, grad = w_new, x_new, y_new, jt_new, grad_new
        gap_l, gap_u = w[il] - lw[il], uw[iu] - w[iu]
        kappa = 1e10
        z_l = np.clip(z_l, mu / (kappa * gap_l), kappa * mu / gap_l)
        z_u = np.clip(z_u, mu / (kappa * gap_u), kappa * mu / gap_u)
        it += 1

    mult = _full_multipliers(prob, ws, x, y, z_l, z_u, il, iu, nf, m_eq)
    kkt = kkt_residuals(prob, x, mult)
    return SolveReport(status, x, float(prob.objective(x)), mult, kkt, it, history)


def _scatter(values, idx, size):
    out = np.zeros(size)
    out[idx] = values
    return out


def _solve_kkt(h_block, sigma, jt, rhs, nw, m, opts: SolverOptions, delta_last):
    """Factor the regularised KKT matrix until the step has positive curvature.

    Returns (dw, dy, delta_w, lu, delta_c, curvature) or None on failure.
    """
    base = h_block + sp.diags(sigma)
    delta = 0.0 if delta_last == 0.0 else max(opts.reg_min, delta_last / 3.0)
    delta_c = 0.0
    while True:
        upper = base + delta * sp.identity(nw) if delta else base
        if m:
            lower_right = -delta_c * sp.identity(m) if delta_c else None
            kkt = sp.bmat([[upper, jt.T], [jt, lower_right]], format="csc")
        else:
            kkt = upper.tocsc()
        try:
            lu = spla.splu(kkt)
            sol = lu.solve(rhs)
            ok = np.all(np.isfinite(sol))
        except RuntimeError:
            ok = False
            if delta_c == 0.0 and m:
                delta_c = 1e-8
                continue
        if ok:
            dw = sol[:nw]
            curv = float(dw @ (upper @ dw))
            if curv >= 1e-12 * float(dw @ dw):
                return dw, sol[nw:], delta, lu, delta_c, curv
        delta = opts.reg_min if delta == 0.0 else 10.0 * delta
        if delta > opts.reg_max:
            return None


def _damped_bfgs(b, s, yv):
    ss = float(s @ s)
    if ss < 1e-24:
        return
    bs = b @ s
    sbs = float(s @ bs)
    sy = float(s @ yv)
    if sy >= 0.2 * sbs:
        r = yv
    else:
        theta = 0.8 * sbs / (sbs - sy)
        r = theta * yv + (1.0 - theta) * bs
    sr = float(s @ r)
    if sbs <= 0 or sr <= 0:
        return
    b -= np.outer(bs, bs) / sbs
    b += np.outer(r, r) / sr


def _full_multipliers(prob, ws, x, y, z_l, z_u, il, iu, nf, m_eq) -> Multipliers:
    n = prob.n
    zl_w, zu_w = _scatter(z_l, il, nf + prob.m_ineq), _scatter(z_u, iu, nf + prob.m_ineq)
    lower, upper = np.zeros(n), np.zeros(n)
    lower[ws.free] = zl_w[:nf]
    upper[ws.free] = zu_w[:nf]
    y_eq, y_in = y[:m_eq].copy(), y[m_eq:].copy()
    fixed = np.setdiff1d(np.arange(n), ws.free)
    if fixed.size:
        r = np.asarray(prob.gradient(x), dtype=float).copy()
        if prob.m_eq:
            r += prob.jac_eq(x).T @ y_eq
        if prob.m_ineq:
            r += prob.jac_ineq(x).T @ y_in
        lower[fixed] = np.maximum(r[fixed], 0.0)
        upper[fixed] = np.maximum(-r[fixed], 0.0)
    return Multipliers(y_eq, y_in, lower, upper)
