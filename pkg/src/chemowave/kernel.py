"""Nonlocal chemical field and its gradient via O(n) exponential sweeps.

The chemical concentration is

    v(x) = (1/(2*sqrt(lam))) * int exp(-sqrt(lam)|x-y|) (mu1*u1 + mu2*u2) dy,

which solves 0 = v_xx - lam*v + mu1*u1 + mu2*u2. Splitting the integral at
x gives two one-sided convolutions L and R, each satisfying a first-order
recurrence along the grid. With the source extended by constants beyond the
domain, both tails integrate in closed form, so the only discretization
error is the O(h^2) piecewise-linear interpolation of the source.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .grids import Field, Grid, require_same_grid
from .params import Params, b_lambda_kappa


def _sweep_weights(alpha: float, h: float) -> tuple[float, float, float]:
    """Exact integration of exp(-alpha*s) against the linear interpolant.

    Returns (E, A, B) for the recurrence L_j = E*L_{j-1} + A*s_{j-1} + B*s_j,
    where L_j = int_{-inf}^{x_j} exp(-alpha*(x_j - y)) s(y) dy.
    """
    E = math.exp(-alpha * h)
    A = (1.0 - E * (1.0 + alpha * h)) / (alpha * alpha * h)
    B = (1.0 - E) / alpha - A
    return E, A, B


def _one_sided_sweeps(source: Field, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Left and right one-sided exponential convolutions of the source."""
    h = source.grid.h
    s = source.values
    E, A, B = _sweep_weights(alpha, h)
    b, a = [B, A], [1.0, -E]
    # initial filter state pins the first output to the closed-form tail value
    zi_l = [source.left_tail / alpha - B * s[0]]
    L, _ = lfilter(b, a, s, zi=zi_l)
    sr = s[::-1]
    zi_r = [source.right_tail / alpha - B * sr[0]]
    Rrev, _ = lfilter(b, a, sr, zi=zi_r)
    return L, Rrev[::-1]


def _combined_source(u1: Field, u2: Field, p: Params) -> Field:
    require_same_grid(u1, u2)
    return Field(u1.grid, p.mu1 * u1.values + p.mu2 * u2.values,
                 p.mu1 * u1.left_tail + p.mu2 * u2.left_tail,
                 p.mu1 * u1.right_tail + p.mu2 * u2.right_tail)


def solve_scalar(source: Field, lam: float) -> tuple[Field, Field]:
    """(w, w_x) with w solving 0 = w_xx - lam*w + source."""
    alpha = math.sqrt(lam)
    L, R = _one_sided_sweeps(source, alpha)
    w = Field(source.grid, (L + R) / (2.0 * alpha),
              source.left_tail / lam, source.right_tail / lam)
    wx = Field(source.grid, (R - L) / 2.0, 0.0, 0.0)
    return w, wx


def solve_v(u1: Field, u2: Field, p: Params) -> Field:
    """Chemical field v on the common grid of u1, u2."""
    s = _combined_source(u1, u2, p)
    alpha = p.sqrt_lam
    L, R = _one_sided_sweeps(s, alpha)
    vals = (L + R) / (2.0 * alpha)
    return Field(s.grid, vals, s.left_tail / p.lam, s.right_tail / p.lam)


def solve_v_x(u1: Field, u2: Field, p: Params) -> Field:
    """Gradient of the chemical field, from the signed-kernel formula.

    v_x = (R - L)/2 where L, R are the one-sided sweeps; this avoids
    boundary differencing artifacts entirely.
    """
    s = _combined_source(u1, u2, p)
    L, R = _one_sided_sweeps(s, p.sqrt_lam)
    return Field(s.grid, (R - L) / 2.0, 0.0, 0.0)


def solve_v_pair(u1: Field, u2: Field, p: Params) -> tuple[Field, Field]:
    """(v, v_x) from a single pair of sweeps."""
    s = _combined_source(u1, u2, p)
    alpha = p.sqrt_lam
    L, R = _one_sided_sweeps(s, alpha)
    v = Field(s.grid, (L + R) / (2.0 * alpha),
              s.left_tail / p.lam, s.right_tail / p.lam)
    vx = Field(s.grid, (R - L) / 2.0, 0.0, 0.0)
    return v, vx


def solve_v_dense(u1: Field, u2: Field, p: Params) -> Field:
    """O(n^2) reference on the identical trapezoid-with-tails discretization.

    Kept as an oracle: must agree with solve_v to near machine precision.
    """
    s = _combined_source(u1, u2, p)
    alpha = p.sqrt_lam
    x = s.grid.x
    h = s.grid.h
    E, A, B = _sweep_weights(alpha, h)
    n = s.grid.n
    L = np.empty(n)
    R = np.empty(n)
    for j in range(n):
        acc = s.left_tail / alpha * math.exp(-alpha * (x[j] - x[0]))
        for k in range(j):
            w = math.exp(-alpha * (x[j] - x[k + 1]))
            acc += w * (A * s.values[k] + B * s.values[k + 1])
        L[j] = acc
        acc = s.right_tail / alpha * math.exp(-alpha * (x[-1] - x[j]))
        for k in range(n - 1, j, -1):
            w = math.exp(-alpha * (x[k - 1] - x[j]))
            acc += w * (A * s.values[k] + B * s.values[k - 1])
        R[j] = acc
    return Field(s.grid, (L + R) / (2.0 * alpha),
                 s.left_tail / p.lam, s.right_tail / p.lam)


def residual_elliptic(v: Field, u1: Field, u2: Field, p: Params) -> float:
    """Max interior defect of 0 = v_xx - lam*v + mu1*u1 + mu2*u2."""
    require_same_grid(v, u1, u2)
    h = v.grid.h
    vv = v.values
    d2 = (vv[2:] - 2.0 * vv[1:-1] + vv[:-2]) / (h * h)
    res = d2 - p.lam * vv[1:-1] + p.mu1 * u1.values[1:-1] + p.mu2 * u2.values[1:-1]
    return float(np.max(np.abs(res)))


@dataclass
class BoundReport:
    """Worst slack (negative = violation beyond tolerance) per bound."""

    name: str
    worst_slack: float
    worst_x: float
    passed: bool

    def as_dict(self) -> dict:
        return {"name": self.name, "worst_slack": self.worst_slack,
                "worst_x": self.worst_x, "passed": self.passed}


def _report(name, margin, tol, x) -> BoundReport:
    # margin >= 0 means the bound holds pointwise; pass if margin >= -tol
    i = int(np.argmin(margin))
    worst = float(margin[i])
    return BoundReport(name, worst, float(x[i]), bool(np.all(margin >= -tol)))


def check_lemma_bounds(u1: Field, u2: Field, env, p: Params) -> list:
    """Quantitative envelope bounds on v and v_x for u in the trapped set.

    Asserts, pointwise on the grid:
      upper:  v <= mu1*min{M1/lam, M1*D2*B*e^{-kx}/(2*sqrt(lam))}
                   + mu2*min{M2/lam, 1/lam + M2*Dt2*B*e^{-kx}/(2*sqrt(lam))}
      lower:  v >= (mu1*M1*D2*e^{-kx}/(2*sqrt(lam)))
                       *(B - D1*B_{lam,k+eps1}*e^{-eps1*x})_+
                   + mu2*(1/lam - Dt2*B*e^{-kx}/(2*sqrt(lam)))_+
      grad:   |v_x| <= mu1*min{M1*D2*B*e^{-kx}/2, M1/sqrt(lam)}
                       + mu2*min{Dt2*M2*B*e^{-kx}/2, M2/sqrt(lam)}

    Tolerance is 10h^2 + 1e-9, widened to 10h within one cell of each
    min/(.)_+ crossover where the bounds are continuous but kinked.
    """
    from .supersub import membership  # deferred: supersub imports this module

    mem = membership(u1, u2, env, tol=1e-7)
    if not mem.in_E:
        raise ValueError(
            f"input pair leaves the trapped set: worst violations "
            f"{mem.worst_violation_u1:.3g} (u1), {mem.worst_violation_u2:.3g} (u2)")
    g = require_same_grid(u1, u2)
    x = g.x
    h = g.h
    M1, M2 = env.M1, env.M2
    k = env.kappa
    B = b_lambda_kappa(p.lam, k)
    Bp = b_lambda_kappa(p.lam, k + env.eps1)
    sl = p.sqrt_lam
    ek = np.exp(-k * x)
    ee = np.exp(-env.eps1 * x)

    v, vx = solve_v_pair(u1, u2, p)

    up1 = np.minimum(M1 / p.lam, M1 * env.D2 * B * ek / (2.0 * sl))
    up2 = np.minimum(M2 / p.lam, 1.0 / p.lam + M2 * env.D2_tilde * B * ek / (2.0 * sl))
    upper = p.mu1 * up1 + p.mu2 * up2

    lo1 = (p.mu1 * M1 * env.D2 * ek / (2.0 * sl)) * np.maximum(B - env.D1 * Bp * ee, 0.0)
    lo2 = p.mu2 * np.maximum(1.0 / p.lam - env.D2_tilde * B * ek / (2.0 * sl), 0.0)
    lower = lo1 + lo2

    gr1 = np.minimum(M1 * env.D2 * B * ek / 2.0, M1 / sl)
    gr2 = np.minimum(env.D2_tilde * M2 * B * ek / 2.0, M2 / sl)
    grad = p.mu1 * gr1 + p.mu2 * gr2

    base_tol = 10.0 * h * h + 1e-9
    tol = np.full(g.n, base_tol)

    def widen(cross_x):
        if not np.isfinite(cross_x):
            return
        mask = np.abs(x - cross_x) <= h
        tol[mask] = max(base_tol, 10.0 * h)

    # crossover abscissas of each min / (.)_+ kink
    def _logdiv(num, den):
        return math.log(num / den) / k if num > 0 and den > 0 else math.inf

    widen(_logdiv(env.D2 * B * p.lam, 2.0 * sl))                      # up1
    widen(_logdiv(M2 * env.D2_tilde * B * p.lam, (M2 - 1.0) * 2.0 * sl)
          if M2 > 1.0 else math.inf)                                  # up2
    widen(_logdiv(env.D2_tilde * B * p.lam, 2.0 * sl))                # lo2
    if env.D1 * Bp > 0:
        widen(math.log(env.D1 * Bp / B) / env.eps1)                   # lo1
    widen(_logdiv(env.D2 * B * sl, 2.0))                              # gr1
    widen(_logdiv(env.D2_tilde * M2 * B * sl, 2.0 * M2))              # gr2

    return [
        _report("v_upper", upper - v.values, tol, x),
        _report("v_lower", v.values - lower, tol, x),
        _report("vx_abs", grad - np.abs(vx.values), tol, x),
    ]
