"""Traveling-wave construction by monotone fixed-point iteration.

A wave of speed c = c_kappa is found as a fixed point of the map
u -> U(u) where each component of U solves a scalar semilinear two-point
boundary value problem on [-y, y] with the chemical field frozen at u.
The penalized reaction is monotone decreasing in the unknown, so each
scalar solve has a unique solution between the envelopes; the outer
iteration is plain damped Picard over the trapped set, run over an
increasing schedule of truncation half-widths with warm starts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from . import kernel
from .grids import Field, Grid, require_same_grid
from .params import (DomainError, Params, amplitude_bounds, b_lambda_kappa,
                     c_star)
from .supersub import Envelopes, build_envelopes, envelope_fields


class SolverError(RuntimeError):
    """Non-convergence; carries the residual history."""

    def __init__(self, msg, history=None, last=None):
        super().__init__(msg)
        self.history = history or []
        self.last = last


@dataclass
class BvpProblem:
    """One frozen-environment scalar BVP on [-y, y]."""

    component: int            # 1 or 2
    u1: Field
    u2: Field
    v: Field
    vx: Field
    env: Envelopes
    c: float

    def __post_init__(self):
        if self.component not in (1, 2):
            raise ValueError("component must be 1 or 2")
        require_same_grid(self.u1, self.u2, self.v, self.vx)


def _reaction_coeffs(prob: BvpProblem, p: Params):
    """(diffusivity, drift array, linear part g, saturation s, R) for the BVP.

    The reaction is A(x, U) = (g(x) - s*(U)_+)*U + R*(u_i - U), monotone
    decreasing in U.
    """
    env = prob.env
    if prob.component == 1:
        diff = 1.0
        drift = prob.c - p.chi1 * prob.vx.values
        g = (1.0 - (p.a - p.chi1 * p.mu2) * prob.u2.values
             - p.lam * p.chi1 * prob.v.values)
        s = 1.0 / env.M1
        u_pen = prob.u1.values
    else:
        diff = p.d
        drift = prob.c - p.chi2 * prob.vx.values
        g = (p.r - (p.b * p.r - p.chi2 * p.mu1) * prob.u1.values
             - p.lam * p.chi2 * prob.v.values)
        s = p.r / env.M2
        u_pen = prob.u2.values
    return diff, drift, g, s, u_pen


def solve_bvp(prob: BvpProblem, p: Params, guess: np.ndarray | None = None,
              tol: float = 1e-10, max_iter: int = 60) -> Field:
    """Damped semismooth Newton on the central-difference discretization.

    Dirichlet data are the upper-envelope values at +-y. The (U)_+ kink is
    handled by the active-branch derivative. Falls back to a restart from
    the lower envelope if the first run stalls.
    """
    g = prob.u1.grid
    x = g.x
    h = g.h
    n = g.n
    diff, drift, glin, s, u_pen = _reaction_coeffs(prob, p)
    env = prob.env
    if prob.component == 1:
        bc_l, bc_r = float(env.u1_upper(x[0])), float(env.u1_upper(x[-1]))
        lower = env.u1_lower(x)
    else:
        bc_l, bc_r = float(env.u2_upper(x[0])), float(env.u2_upper(x[-1]))
        lower = env.u2_lower(x)
    R = env.R

    def residual(U):
        F = np.empty(n)
        F[0] = U[0] - bc_l
        F[-1] = U[-1] - bc_r
        F[1:-1] = (diff * (U[2:] - 2.0 * U[1:-1] + U[:-2]) / (h * h)
                   + drift[1:-1] * (U[2:] - U[:-2]) / (2.0 * h)
                   + (glin[1:-1] - s * np.maximum(U[1:-1], 0.0)) * U[1:-1]
                   + R * (u_pen[1:-1] - U[1:-1]))
        return F

    def newton(U0):
        U = U0.copy()
        U[0], U[-1] = bc_l, bc_r
        F = residual(U)
        hist = [float(np.max(np.abs(F)))]
        for _ in range(max_iter):
            if hist[-1] < tol:
                return U, hist
            ab = np.zeros((3, n))
            active = (U > 0.0).astype(float)
            ab[0, 2:] = diff / (h * h) + drift[1:-1] / (2.0 * h)   # upper diag
            ab[1, 1:-1] = (-2.0 * diff / (h * h) + glin[1:-1]
                           - 2.0 * s * np.maximum(U[1:-1], 0.0) * active[1:-1]
                           - R)
            ab[2, :-2] = diff / (h * h) - drift[1:-1] / (2.0 * h)  # lower diag
            ab[1, 0] = ab[1, -1] = 1.0
            delta = solve_banded((1, 1), ab, -F)
            lam = 1.0
            norm0 = hist[-1]
            while lam > 1e-4:
                Un = U + lam * delta
                Fn = residual(Un)
                nn = float(np.max(np.abs(Fn)))
                if nn < norm0 or nn < tol:
                    break
                lam *= 0.5
            U, F = Un, Fn
            hist.append(nn)
        return None, hist

    start = guess if guess is not None else (
        env.u1_upper(x) if prob.component == 1 else env.u2_upper(x))
    U, hist = newton(np.asarray(start, dtype=float))
    if U is None:
        U, hist2 = newton(np.asarray(lower, dtype=float))
        hist = hist + hist2
        if U is None:
            raise SolverError("scalar BVP Newton stalled", history=hist)
    tails = (bc_l, bc_r)
    return Field(g, U, *tails)


@dataclass
class TailReport:
    fitted_rate: float | None
    rate_target: float
    fitted_prefactor: float | None
    analytic_prefactor: float | None
    window: tuple | None

    def as_dict(self) -> dict:
        return {"fitted_rate": self.fitted_rate, "rate_target": self.rate_target,
                "fitted_prefactor": self.fitted_prefactor,
                "analytic_prefactor": self.analytic_prefactor,
                "window": list(self.window) if self.window else None}


@dataclass
class WaveProfile:
    """Converged traveling-wave triple on a truncated domain."""

    grid: Grid
    U1: Field
    U2: Field
    V: Field
    c: float
    kappa: float
    residual: float
    env: Envelopes
    iterations: int = 0
    tail: TailReport | None = None
    left_limit: str | None = None

    def as_dict(self) -> dict:
        return {"c": self.c, "kappa": self.kappa, "residual": self.residual,
                "iterations": self.iterations,
                "x_min": self.grid.x_min, "x_max": self.grid.x_max,
                "n": self.grid.n,
                "envelope": self.env.as_dict(),
                "tail": self.tail.as_dict() if self.tail else None,
                "left_limit": self.left_limit}


def steady_residual_fields(U1: Field, U2: Field, c: float, p: Params
                           ) -> tuple[np.ndarray, np.ndarray]:
    """Interior defect of the unpenalized steady moving-frame system.

    0 = U1'' + (c - chi1 v_x) U1'
        + U1 (1 - lam chi1 v - (1 - chi1 mu1) U1 - (a - chi1 mu2) U2)
    0 = d U2'' + (c - chi2 v_x) U2'
        + r U2 (1 - (lam chi2 / r) v - (1 - chi2 mu2 / r) U2
                  - (b - chi2 mu1 / r) U1)

    with v induced by (U1, U2). Returns the two interior defect arrays.
    """
    g = require_same_grid(U1, U2)
    h = g.h
    v, vx = kernel.solve_v_pair(U1, U2, p)
    a1, a2 = U1.values, U2.values

    def d2(a):
        return (a[2:] - 2.0 * a[1:-1] + a[:-2]) / (h * h)

    def d1(a):
        return (a[2:] - a[:-2]) / (2.0 * h)

    r1 = (d2(a1) + (c - p.chi1 * vx.values[1:-1]) * d1(a1)
          + a1[1:-1] * (1.0 - p.lam * p.chi1 * v.values[1:-1]
                        - (1.0 - p.chi1 * p.mu1) * a1[1:-1]
                        - (p.a - p.chi1 * p.mu2) * a2[1:-1]))
    r2 = (p.d * d2(a2) + (c - p.chi2 * vx.values[1:-1]) * d1(a2)
          + p.r * a2[1:-1] * (1.0 - (p.lam * p.chi2 / p.r) * v.values[1:-1]
                              - (1.0 - p.chi2 * p.mu2 / p.r) * a2[1:-1]
                              - (p.b - p.chi2 * p.mu1 / p.r) * a1[1:-1]))
    return r1, r2


def min_half_width(env: Envelopes) -> float:
    """Smallest y with upper envelopes flat at their maxima at x = -y."""
    y = max(1.0, math.log(env.M1) / env.kappa if env.M1 > 1 else 0.0)
    if env.M2 > 1.0:
        arg = (env.M2 - 1.0) / (env.M2 * env.D2_tilde)
        if arg > 1.0:
            y = max(y, math.log(arg) / env.kappa)
    return y


def fixed_point_iterate(p: Params, kappa: float, y: float,
                        tol: float = 1e-10, max_iter: int = 2000,
                        h: float = 0.05,
                        init: tuple | None = None,
                        env: Envelopes | None = None) -> WaveProfile:
    """Picard iteration u -> U(u) over the trapped set on [-y, y].

    Starts from the upper envelopes (or a warm start), damping theta = 1
    with automatic halving whenever the sup-norm update grows. Stops when
    the sup-norm update falls below tol.
    """
    if env is None:
        env = build_envelopes(p, kappa)
    if y < min_half_width(env):
        raise DomainError(f"half-width {y} below minimum {min_half_width(env)}")
    g = Grid.from_h(-y, y, h)
    x = g.x
    c = env.c_kappa
    if init is not None:
        u1 = Field(g, np.asarray(init[0], dtype=float), env.M1, 0.0)
        u2 = Field(g, np.asarray(init[1], dtype=float), env.M2, 1.0)
    else:
        u1, u2 = envelope_fields(env, g, "upper")
    theta = 1.0
    last_update = math.inf
    history = []
    prev_step = None
    for it in range(1, max_iter + 1):
        v, vx = kernel.solve_v_pair(u1, u2, p)
        prob1 = BvpProblem(1, u1, u2, v, vx, env, c)
        prob2 = BvpProblem(2, u1, u2, v, vx, env, c)
        U1 = solve_bvp(prob1, p, guess=u1.values).values
        U2 = solve_bvp(prob2, p, guess=u2.values).values
        new1 = (1.0 - theta) * u1.values + theta * U1
        new2 = (1.0 - theta) * u2.values + theta * U2
        step1 = new1 - u1.values
        step2 = new2 - u2.values
        update = max(float(np.max(np.abs(step1))),
                     float(np.max(np.abs(step2))))
        history.append(update)
        if update > last_update * 1.2 and theta > 0.1:
            theta *= 0.5
        last_update = update
        # near-critical speeds make the Picard contraction rate creep
        # toward 1; once consecutive steps are collinear, an Aitken jump
        # along the dominant error mode removes most of the slowdown
        jumped = False
        if prev_step is not None and theta == 1.0 and it % 5 == 0:
            d_old = np.concatenate(prev_step)
            d_new = np.concatenate((step1, step2))
            denom = float(d_old @ d_old)
            rho = float(d_new @ d_old) / denom if denom > 0 else 0.0
            if 0.5 < rho < 0.995:
                gain = rho / (1.0 - rho)
                new1 = new1 + gain * step1
                new2 = new2 + gain * step2
                jumped = True
        if jumped:
            # the step after a jump is not comparable to the pre-jump one:
            # keep it out of the damping heuristic and the ratio estimate
            prev_step = None
            last_update = math.inf
        else:
            prev_step = (step1, step2)
        new1 = np.clip(new1, env.u1_lower(x), env.u1_upper(x))
        new2 = np.clip(new2, env.u2_lower(x), env.u2_upper(x))
        u1 = Field(g, new1, float(new1[0]), float(new1[-1]))
        u2 = Field(g, new2, float(new2[0]), float(new2[-1]))
        if update < tol:
            break
    else:
        raise SolverError(f"fixed point not converged after {max_iter} "
                          f"iterations (last update {update:.3g})",
                          history=history, last=(u1, u2))
    v, vx = kernel.solve_v_pair(u1, u2, p)
    r1, r2 = steady_residual_fields(u1, u2, c, p)
    res = max(float(np.max(np.abs(r1))), float(np.max(np.abs(r2))))
    return WaveProfile(grid=g, U1=u1, U2=u2, V=v, c=c, kappa=kappa,
                       residual=res, env=env, iterations=it)


def kappa_of_speed(p: Params, c: float) -> float:
    """Smaller root of c = (kappa^2 + 1 - a)/kappa, the decaying branch."""
    disc = c * c - 4.0 * (1.0 - p.a)
    if disc < 0:
        raise DomainError(f"speed {c} below 2*sqrt(1-a)")
    return 0.5 * (c - math.sqrt(disc))


def _warm_start(w: WaveProfile, env: Envelopes, y: float, h: float):
    """Interpolate a profile onto [-y, y], envelope-extended and clamped."""
    g = Grid.from_h(-y, y, h)
    x = g.x
    i1 = np.interp(x, w.grid.x, w.U1.values)
    i2 = np.interp(x, w.grid.x, w.U2.values)
    outside = (x < w.grid.x_min) | (x > w.grid.x_max)
    i1[outside] = env.u1_upper(x[outside])
    i2[outside] = env.u2_upper(x[outside])
    i1 = np.clip(i1, env.u1_lower(x), env.u1_upper(x))
    i2 = np.clip(i2, env.u2_lower(x), env.u2_upper(x))
    return (i1, i2)


def solve_wave(p: Params, c: float | None = None, kappa: float | None = None,
               y_schedule=(50.0, 100.0, 200.0), tol: float = 1e-10,
               h: float = 0.05, diagnose: bool = True) -> WaveProfile:
    """Full wave solve with domain continuation and tail diagnostics.

    Exactly one of c, kappa must be given. For a speed, the decay rate is
    the smaller dispersion root, and the speed must exceed the critical
    speed c_star.
    """
    if (c is None) == (kappa is None):
        raise ValueError("give exactly one of c, kappa")
    if kappa is None:
        cs = c_star(p)
        if not c > cs:
            raise DomainError(
                f"speed {c} not above the critical speed c*={cs:.6f}; "
                "no wave is constructed at or below it")
        kappa = kappa_of_speed(p, c)
    env = build_envelopes(p, kappa)
    init = None
    w = None
    for y in y_schedule:
        if y < min_half_width(env):
            continue
        if w is not None:
            init = _warm_start(w, env, y, h)
        w = fixed_point_iterate(p, kappa, y, tol=tol, h=h, init=init, env=env)
    if w is None:
        raise DomainError("y_schedule has no admissible half-width")
    if diagnose:
        w.tail = fit_tails(w, p)
        w.left_limit = classify_left_limit(w, p)
    return w


def u2_tail_prefactor(p: Params, kappa: float) -> float:
    """Closed-form coefficient of e^{-kappa x} in U2 - 1 at the right tail.

    (chi2 mu2 - r b) / ((1-a) + r/M2 - (d-1) kappa^2
                        - (chi2 mu2 sqrt(lam)/2) B_{lam,kappa})

    The denominator is positive throughout the admissible range; this is
    asserted and the computation refuses otherwise.
    """
    _, M2 = amplitude_bounds(p)
    B = b_lambda_kappa(p.lam, kappa)
    den = ((1.0 - p.a) + p.r / M2 - (p.d - 1.0) * kappa * kappa
           - 0.5 * p.chi2 * p.mu2 * p.sqrt_lam * B)
    if den <= 0:
        raise DomainError("tail prefactor denominator not positive")
    return (p.chi2 * p.mu2 - p.r * p.b) / den


def fit_tails(w: WaveProfile, p: Params,
              lo: float = 1e-8, hi: float = 1e-3) -> TailReport:
    """Least-squares diagnostics of the right tail.

    Fits log U1 against x on the window U1 in [lo, hi], and fits
    (U2 - 1) e^{kappa x} to a constant on the same window, reporting the
    closed-form prefactor alongside.
    """
    x = w.grid.x
    u1 = w.U1.values
    mask = (u1 >= lo) & (u1 <= hi)
    if np.count_nonzero(mask) < 10:
        raise DomainError("tail window empty; domain too small for the rate")
    xs = x[mask]
    slope, _ = np.polyfit(xs, np.log(u1[mask]), 1)
    scaled = (w.U2.values[mask] - 1.0) * np.exp(w.kappa * xs)
    fitted_pref = float(np.mean(scaled))
    analytic = u2_tail_prefactor(p, w.kappa)
    return TailReport(fitted_rate=float(-slope), rate_target=w.kappa,
                      fitted_prefactor=fitted_pref,
                      analytic_prefactor=analytic,
                      window=(float(xs[0]), float(xs[-1])))


def classify_left_limit(w: WaveProfile, p: Params, tol: float = 1e-3,
                        margin: float = 10.0) -> str:
    """Which equilibrium the left end of the profile has relaxed to.

    Averages (U1, U2) over the leftmost 10% of the domain, after dropping
    a margin adjacent to the boundary where the Dirichlet pinning to the
    envelope maxima leaves a thin layer.
    """
    x = w.grid.x
    span = w.grid.x_max - w.grid.x_min
    left_edge = w.grid.x_min + margin
    right_edge = w.grid.x_min + max(0.1 * span, margin + 1.0)
    mask = (x >= left_edge) & (x <= right_edge)
    if not np.any(mask):
        return "UNRESOLVED"
    m1 = float(np.mean(w.U1.values[mask]))
    m2 = float(np.mean(w.U2.values[mask]))
    if abs(m1 - 1.0) < tol and abs(m2) < tol:
        return "E1"
    if abs(1.0 - p.a * p.b) > 1e-14:
        e1s = (1.0 - p.a) / (1.0 - p.a * p.b)
        e2s = (1.0 - p.b) / (1.0 - p.a * p.b)
        if abs(m1 - e1s) < tol and abs(m2 - e2s) < tol:
            return "ESTAR"
    return "UNRESOLVED"


@dataclass
class ContinuationResult:
    speeds: list
    profiles: list              # normalized (x, U1, U2) triples on the window
    sup_diffs: list             # consecutive sup differences on the window
    failure_index: int | None = None

    def as_dict(self) -> dict:
        return {"speeds": self.speeds, "sup_diffs": self.sup_diffs,
                "failure_index": self.failure_index}


def normalize_front(w: WaveProfile, window: float = 20.0, h: float = 0.05):
    """Shift so U1 first crosses 1/2 at x = 0; resample on [-window, window]."""
    x = w.grid.x
    u1 = w.U1.values
    below = u1 < 0.5
    idx = np.argmax(below)
    if idx == 0 or not below[idx]:
        raise DomainError("U1 does not cross 1/2")
    x0, x1 = x[idx - 1], x[idx]
    f0, f1 = u1[idx - 1], u1[idx]
    xc = x0 + (0.5 - f0) * (x1 - x0) / (f1 - f0)
    xs = np.arange(-window, window + 0.5 * h, h)
    n1 = np.interp(xs + xc, x, u1)
    n2 = np.interp(xs + xc, x, w.U2.values)
    return xs, n1, n2


def min_speed_continuation(p: Params, c_seq=None,
                           y_schedule=(50.0, 100.0, 200.0),
                           window: float = 20.0, h: float = 0.05
                           ) -> ContinuationResult:
    """Waves at a decreasing speed sequence approaching 2*sqrt(1-a).

    Each solve is warm-started from the previous speed's profile; results
    are front-normalized (U1(0) = 1/2) and consecutive sup-differences on
    |x| <= window reported. Failures return partial results.
    """
    c0 = 2.0 * math.sqrt(1.0 - p.a)
    if c_seq is None:
        c_seq = [c0 * m for m in (1.2, 1.1, 1.05, 1.02, 1.01)]
    res = ContinuationResult(speeds=list(c_seq), profiles=[], sup_diffs=[])
    prev = None
    for i, c in enumerate(c_seq):
        try:
            kappa = kappa_of_speed(p, c)
            env = build_envelopes(p, kappa)
            init = _warm_start(prev, env, y_schedule[0], h) if prev else None
            w = None
            for y in y_schedule:
                if w is not None:
                    init = _warm_start(w, env, y, h)
                w = fixed_point_iterate(p, kappa, y, h=h, init=init, env=env)
            prev = w
            res.profiles.append(normalize_front(w, window=window, h=h))
        except (SolverError, DomainError):
            res.failure_index = i
            break
    for k in range(1, len(res.profiles)):
        _, a1, _ = res.profiles[k - 1]
        _, b1, _ = res.profiles[k]
        res.sup_diffs.append(float(np.max(np.abs(a1 - b1))))
    return res
