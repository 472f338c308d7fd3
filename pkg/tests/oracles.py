"""Independent reference implementations used as test oracles.

Nothing here calls into the package's numerical code: impedances, the
admittance matrix and power flows are rebuilt from the raw network data with
plain formulas, so agreement is evidence rather than tautology.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

A = cmath.exp(2j * math.pi / 3)


def sequence_parts(ua, ub, uc):
    """(zero, positive, negative) sequence phasors by the textbook formulas."""
    v0 = (ua + ub + uc) / 3
    v1 = (ua + A * ub + A * A * uc) / 3
    v2 = (ua + A * A * ub + A * uc) / 3
    return v0, v1, v2


def unbalance(ua, ub, uc) -> float:
    _, v1, v2 = sequence_parts(ua, ub, uc)
    return abs(v2) / abs(v1)


def phase_matrix(z0, z1) -> np.ndarray:
    """Phase impedance of a transposed element with z2 == z1."""
    d = (z0 + 2 * z1) / 3
    o = (z0 - z1) / 3
    return np.array([[d, o, o], [o, d, o], [o, o, d]], dtype=complex)


def _element_admittance(net, br) -> np.ndarray:
    if hasattr(br, "length_km"):
        base_kv = next(b.base_kv for b in net.buses if b.id == br.from_bus)
        zb = base_kv**2 / net.base_mva
        z1 = complex(br.r_ohm_per_km, br.x_ohm_per_km) * br.length_km / zb
        z0 = complex(br.r0_ohm_per_km, br.x0_ohm_per_km) * br.length_km / zb
    else:
        scale = net.base_mva / br.s_rated_mva
        z1 = complex(br.vkr_percent, math.sqrt(br.vk_percent**2 - br.vkr_percent**2)) / 100 * scale
        z0 = z1
    return np.linalg.inv(phase_matrix(z0, z1))


def _ends(br):
    return (br.from_bus, br.to_bus) if hasattr(br, "length_km") else (br.hv_bus, br.lv_bus)


def stamp_ybus(net) -> np.ndarray:
    """Dense admittance matrix, one scalar entry at a time."""
    ids = sorted(b.id for b in net.buses)
    pos = {bid: k for k, bid in enumerate(ids)}
    n = 3 * len(ids)
    y = np.zeros((n, n), dtype=complex)
    for br in list(net.lines) + list(net.transformers):
        yb = _element_admittance(net, br)
        i, j = (pos[b] for b in _ends(br))
        for p in range(3):
            for q in range(3):
                y[3 * i + p, 3 * i + q] += yb[p, q]
                y[3 * j + p, 3 * j + q] += yb[p, q]
                y[3 * i + p, 3 * j + q] -= yb[p, q]
                y[3 * j + p, 3 * i + q] -= yb[p, q]
    return y


def slack_phasors(m):
    return np.array([m, m * cmath.exp(-2j * math.pi / 3), m * cmath.exp(2j * math.pi / 3)])


def fixed_point_pf(net, injections, tol=1e-13, max_iter=20000):
    """Solve V_n = Y_nn^-1 (conj(S_n / V_n) - Y_ns V_s) by plain iteration.

    ``injections`` is (N, 3) complex p.u. (generation minus load), bus order
    sorted by id. Returns (N, 3) voltages.
    """
    ids = sorted(b.id for b in net.buses)
    slack = ids.index(next(b.id for b in net.buses if b.kind == "slack"))
    y = stamp_ybus(net)
    sl = list(range(3 * slack, 3 * slack + 3))
    nn = [k for k in range(y.shape[0]) if k not in sl]
    vs = slack_phasors(net.slack_voltage_pu)
    y_nn_inv = np.linalg.inv(y[np.ix_(nn, nn)])
    y_ns_vs = y[np.ix_(nn, sl)] @ vs
    s = np.asarray(injections, dtype=complex).reshape(-1)[nn]
    v = np.tile(vs, len(ids) - 1)
    for _ in range(max_iter):
        v_new = y_nn_inv @ (np.conj(s / v) - y_ns_vs)
        if np.max(np.abs(v_new - v)) < tol:
            v = v_new
            break
        v = v_new
    else:
        raise RuntimeError("fixed-point oracle did not converge")
    full = np.empty(3 * len(ids), dtype=complex)
    full[nn] = v
    full[sl] = vs
    return full.reshape(-1, 3)


def period_injection(net, t, pv_kw_per_phase=None):
    """(N, 3) injection at period t; ``pv_kw_per_phase`` maps bus id -> (3,) kW."""
    ids = sorted(b.id for b in net.buses)
    kw_base = 1000 * net.base_mva / 3
    s = np.zeros((len(ids), 3), dtype=complex)
    for load in net.loads:
        k = ids.index(load.bus)
        for p in range(3):
            s[k, p] -= complex(load.p_kw[p][t], load.q_kvar[p][t]) / kw_base
    for bus, kw in (pv_kw_per_phase or {}).items():
        s[ids.index(bus)] += np.asarray(kw, dtype=float) / kw_base
    return s


def operating_point_ok(net, volts, tol=0.0) -> bool:
    """Voltage-magnitude, unbalance and thermal checks on a (N, 3) solution."""
    lim = net.limits
    ids = sorted(b.id for b in net.buses)
    slack = ids.index(next(b.id for b in net.buses if b.kind == "slack"))
    for k in range(len(ids)):
        if k == slack:
            continue
        mag = np.abs(volts[k])
        if mag.min() < lim.u_min - tol or mag.max() > lim.u_max + tol:
            return False
        if lim.vuf_buses is None or ids[k] in lim.vuf_buses:
            if unbalance(*volts[k]) > lim.vuf_max + tol:
                return False
    for br in net.lines:
        if br.max_i_ka is None:
            continue
        base_kv = next(b.base_kv for b in net.buses if b.id == br.from_bus)
        i_max = math.sqrt(3) * base_kv * br.max_i_ka / net.base_mva
        i, j = (ids.index(b) for b in _ends(br))
        current = _element_admittance(net, br) @ (volts[i] - volts[j])
        if np.abs(current).max() > i_max + tol:
            return False
    return True


def bisect_capacity(net, unit=0, rel_tol=1e-5):
    """Largest capacity of one PV unit for which every period's PF is admissible."""
    pv = net.pv_units[unit]
    phases = [0, 1, 2] if pv.connection == "abc" else ["abc".index(pv.connection)]

    def feasible(cap):
        for t in range(net.horizon):
            kw = np.zeros(3)
            kw[phases] = cap * pv.profile[t] / len(phases)
            v = fixed_point_pf(net, period_injection(net, t, {pv.bus: kw}), tol=1e-12)
            if not operating_point_ok(net, v):
                return False
        return True

    lo, hi = 0.0, pv.p_max_kw
    if feasible(hi):
        return hi
    while hi - lo > rel_tol * max(hi, 1.0):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if feasible(mid) else (lo, mid)
    return lo


class StreamingStats:
    """Single-pass max/min/mean/rms; median from a sorted copy at the end."""

    def __init__(self):
        self.n, self.total, self.sq = 0, 0.0, 0.0
        self.hi, self.lo = -math.inf, math.inf
        self.values = []

    def push(self, x: float) -> None:
        self.n += 1
        self.total += x
        self.sq += x * x
        self.hi, self.lo = max(self.hi, x), min(self.lo, x)
        self.values.append(x)

    def result(self) -> dict:
        vals = sorted(self.values)
        mid = self.n // 2
        median = vals[mid] if self.n % 2 else 0.5 * (vals[mid - 1] + vals[mid])
        return {
            "max": self.hi, "min": self.lo, "average": self.total / self.n,
            "median": median, "rmse": math.sqrt(self.sq / self.n), "samples": self.n,
        }


def random_interior_point(prob, rng, spread=0.05):
    """Random point strictly inside the variable box (fixed entries kept)."""
    x = prob.x0 + spread * rng.normal(size=prob.n)
    lo, hi = prob.lower, prob.upper
    boxed = np.isfinite(lo) & np.isfinite(hi) & (hi > lo)
    x[boxed] = lo[boxed] + (hi[boxed] - lo[boxed]) * rng.uniform(0.1, 0.9, size=boxed.sum())
    fixed = np.isfinite(lo) & (lo == hi)
    x[fixed] = lo[fixed]
    return x
