"""Super/sub-solution envelopes and the penalized comparison operator.

The right-tail envelopes with decay rate kappa,

    u1_upper = min{M1, M1*D2*e^{-kx}},  u1_lower = M1*D2*(1 - D1*e^{-e1*x})_+ e^{-kx},
    u2_upper = min{M2, 1 + M2*Dt2*e^{-kx}},  u2_lower = (1 - Dt2*e^{-kx})_+,

trap the trapped set E(kappa) of admissible profile pairs. The penalized
operators F1, F2 below are sign-definite on the envelopes for every member
of E(kappa); verify_lemma3 checks this numerically on a grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernel
from .grids import Field, Grid, require_same_grid
from .params import (DomainError, Params, amplitude_bounds, b_lambda_kappa,
                     c_of_kappa, kappa_star, solve_f)


@dataclass(frozen=True)
class Envelopes:
    """Envelope constants for one decay rate kappa; closures evaluate anywhere."""

    kappa: float
    c_kappa: float
    eps1: float
    D1: float
    D2: float
    D2_tilde: float
    R: float
    M1: float
    M2: float
    f_kappa: float

    def u1_upper(self, x):
        return np.minimum(self.M1, self.M1 * self.D2 * np.exp(-self.kappa * x))

    def u1_lower(self, x):
        x = np.asarray(x, dtype=float)
        bump = np.maximum(1.0 - self.D1 * np.exp(-self.eps1 * x), 0.0)
        return self.M1 * self.D2 * bump * np.exp(-self.kappa * x)

    def u2_upper(self, x):
        return np.minimum(self.M2,
                          1.0 + self.M2 * self.D2_tilde * np.exp(-self.kappa * x))

    def u2_lower(self, x):
        return np.maximum(1.0 - self.D2_tilde * np.exp(-self.kappa * x), 0.0)

    def kinks(self) -> dict:
        """Abscissas where each envelope switches branch."""
        k, e1 = self.kappa, self.eps1
        out = {"u1_upper": math.log(self.D2) / k if self.D2 > 0 else -math.inf,
               "u1_lower": math.log(self.D1) / e1,
               "u2_lower": (math.log(self.D2_tilde) / k
                            if self.D2_tilde > 0 else -math.inf)}
        if self.M2 > 1.0:
            out["u2_upper"] = math.log(self.M2 * self.D2_tilde / (self.M2 - 1.0)) / k
        return out

    def as_dict(self) -> dict:
        return {"kappa": self.kappa, "c_kappa": self.c_kappa, "eps1": self.eps1,
                "D1": self.D1, "D2": self.D2, "D2_tilde": self.D2_tilde,
                "R": self.R, "M1": self.M1, "M2": self.M2,
                "f_kappa": self.f_kappa, "D1_safety_factor": 1.05}


@dataclass
class MembershipReport:
    in_E: bool
    worst_violation_u1: float
    worst_x_u1: float
    worst_violation_u2: float
    worst_x_u2: float

    def as_dict(self) -> dict:
        return {"in_E": self.in_E,
                "u1": {"violation": self.worst_violation_u1, "x": self.worst_x_u1},
                "u2": {"violation": self.worst_violation_u2, "x": self.worst_x_u2}}


def build_envelopes(p: Params, kappa: float) -> Envelopes:
    """Envelope constants for a decay rate 0 < kappa < kappa_star.

    eps1 sits at half its admissible window min{kappa, c_k - 2k}, further
    capped below (sqrt(lam) - kappa)/2 so the shifted kernel moment
    B_{lam, kappa+eps1} stays defined. D1 is the smallest constant meeting
    the sufficient sign inequality for the lower envelope, times a 1.05
    safety factor, floored at 1.01.
    """
    ks = kappa_star(p)
    if not 0 < kappa < ks:
        raise DomainError(f"need 0 < kappa < kappa_star={ks}, got {kappa}")
    M1, M2 = amplitude_bounds(p)
    ck = c_of_kappa(p, kappa)
    f = solve_f(p, kappa)
    eps1 = 0.5 * min(kappa, ck - 2.0 * kappa)
    eps1 = min(eps1, 0.5 * (p.sqrt_lam - kappa))
    D2 = 1.0 / M1
    D2t = D2 / (p.a + p.chi1 * f)
    B = b_lambda_kappa(p.lam, kappa)
    rhs = (1.0 + (p.a - p.chi1 * p.mu2) * M2 * D2t / D2
           + 0.5 * p.chi1 * (p.sqrt_lam + 2.0 * kappa + eps1)
           * (p.mu2 * M2 * D2t / D2 + p.mu1 * M1) * B)
    D1 = max(1.01, 1.05 * D2 * rhs / (eps1 * (ck - eps1 - 2.0 * kappa)))
    R = 1.0 + max(
        0.0,
        1.0 - (p.a - p.chi1 * p.mu2) * M2 - p.chi1 * (p.mu1 * M1 + p.mu2 * M2),
        p.r - (p.b * p.r - p.chi2 * p.mu1) * M1
        - p.chi2 * (p.mu1 * M1 + p.mu2 * M2),
    )
    return Envelopes(kappa=kappa, c_kappa=ck, eps1=eps1, D1=D1, D2=D2,
                     D2_tilde=D2t, R=R, M1=M1, M2=M2, f_kappa=f)


def membership(u1: Field, u2: Field, env: Envelopes, tol: float = 1e-9
               ) -> MembershipReport:
    """Worst envelope violation of (u1, u2) on its grid."""
    g = require_same_grid(u1, u2)
    x = g.x
    v1 = np.maximum(u1.values - env.u1_upper(x), env.u1_lower(x) - u1.values)
    v2 = np.maximum(u2.values - env.u2_upper(x), env.u2_lower(x) - u2.values)
    i1, i2 = int(np.argmax(v1)), int(np.argmax(v2))
    return MembershipReport(
        in_E=bool(v1[i1] <= tol and v2[i2] <= tol),
        worst_violation_u1=float(v1[i1]), worst_x_u1=float(x[i1]),
        worst_violation_u2=float(v2[i2]), worst_x_u2=float(x[i2]))


def project_to_E(u1: Field, u2: Field, env: Envelopes) -> tuple[Field, Field]:
    """Pointwise clamp of each component between its envelopes."""
    g = require_same_grid(u1, u2)
    x = g.x
    p1 = np.clip(u1.values, env.u1_lower(x), env.u1_upper(x))
    p2 = np.clip(u2.values, env.u2_lower(x), env.u2_upper(x))
    return (Field(g, p1, u1.left_tail, u1.right_tail),
            Field(g, p2, u2.left_tail, u2.right_tail))


def envelope_fields(env: Envelopes, g: Grid, which: str) -> tuple[Field, Field]:
    """Envelope extremes sampled on a grid with matching constant tails."""
    x = g.x
    if which == "upper":
        a1, a2 = env.u1_upper(x), env.u2_upper(x)
    elif which == "lower":
        a1, a2 = env.u1_lower(x), env.u2_lower(x)
    else:
        raise ValueError("which must be 'upper' or 'lower'")
    return (Field(g, a1, float(a1[0]), 0.0),
            Field(g, a2, float(a2[0]), 1.0))


def sample_E(env: Envelopes, g: Grid, rng) -> tuple[Field, Field]:
    """Random member of the trapped set on a grid.

    Pointwise uniform between the envelopes, mollified by a 5-point moving
    average to keep discrete derivatives bounded, then re-projected.
    """
    x = g.x
    w = np.full(5, 0.2)

    def smooth(a):
        pad = np.concatenate([a[:2][::-1], a, a[-2:][::-1]])
        return np.convolve(pad, w, mode="valid")

    lo1, up1 = env.u1_lower(x), env.u1_upper(x)
    lo2, up2 = env.u2_lower(x), env.u2_upper(x)
    r1 = lo1 + rng.random(g.n) * (up1 - lo1)
    r2 = lo2 + rng.random(g.n) * (up2 - lo2)
    a1 = np.clip(smooth(r1), lo1, up1)
    a2 = np.clip(smooth(r2), lo2, up2)
    return (Field(g, a1, float(a1[0]), 0.0),
            Field(g, a2, float(a2[0]), 1.0))


def _second_diff(a: np.ndarray, h: float) -> np.ndarray:
    d2 = np.empty_like(a)
    d2[1:-1] = (a[2:] - 2.0 * a[1:-1] + a[:-2]) / (h * h)
    d2[0] = d2[1]
    d2[-1] = d2[-2]
    return d2


def eval_operator(U1: Field, U2: Field, u1: Field, u2: Field,
                  env: Envelopes, p: Params, c: float | None = None
                  ) -> tuple[Field, Field]:
    """The penalized pair (F1(U1), F2(U2)) in the frame moving at speed c.

    F1(U1) = U1'' + (c - chi1*v_x)U1'
             + (1 - (a - chi1*mu2)*u2 - lam*chi1*v - (U1)_+/M1)*U1
             + R*(u1 - U1),
    F2(U2) = d*U2'' + (c - chi2*v_x)U2'
             + (r - (b*r - chi2*mu1)*u1 - lam*chi2*v - r*(U2)_+/M2)*U2
             + R*(u2 - U2),

    with v, v_x induced by the frozen pair (u1, u2). Derivatives are
    second-order differences; endpoint rows use one-sided formulas and
    should not be relied on for sign checks.
    """
    g = require_same_grid(U1, U2, u1, u2)
    if c is None:
        c = env.c_kappa
    h = g.h
    v, vx = kernel.solve_v_pair(u1, u2, p)
    a1, a2 = U1.values, U2.values
    d1x = np.gradient(a1, h, edge_order=2)
    d2x = np.gradient(a2, h, edge_order=2)
    g1 = (1.0 - (p.a - p.chi1 * p.mu2) * u2.values
          - p.lam * p.chi1 * v.values
          - np.maximum(a1, 0.0) / env.M1)
    g2 = (p.r - (p.b * p.r - p.chi2 * p.mu1) * u1.values
          - p.lam * p.chi2 * v.values
          - p.r * np.maximum(a2, 0.0) / env.M2)
    F1 = (_second_diff(a1, h) + (c - p.chi1 * vx.values) * d1x
          + g1 * a1 + env.R * (u1.values - a1))
    F2 = (p.d * _second_diff(a2, h) + (c - p.chi2 * vx.values) * d2x
          + g2 * a2 + env.R * (u2.values - a2))
    return Field(g, F1), Field(g, F2)


@dataclass
class SignCheck:
    """One sign condition outcome; slack >= 0 means it held within tolerance."""

    sample: str
    condition: str
    worst_slack: float
    worst_x: float
    passed: bool

    def as_dict(self) -> dict:
        return {"sample": self.sample, "condition": self.condition,
                "worst_slack": self.worst_slack, "worst_x": self.worst_x,
                "passed": self.passed}


def _check_sign(name, cond, values, mask, x, tol, sign) -> SignCheck:
    """sign=-1 asserts values <= tol on mask; sign=+1 asserts values >= -tol."""
    vals = sign * values[mask]
    if vals.size == 0:
        return SignCheck(name, cond, math.inf, math.nan, True)
    i = int(np.argmin(vals))
    slack = float(vals[i] + tol)
    return SignCheck(name, cond, slack, float(x[mask][i]), bool(slack >= 0))


def verify_lemma3(env: Envelopes, p: Params, samples: int = 0,
                  grid: Grid | None = None, rng=None) -> list:
    """Sign conditions of the comparison operators on the envelopes.

    For each frozen u (the two envelope extremes plus `samples` random
    members of the trapped set), checks on the grid interior:

      (i)   F_i(0) >= 0 and F_i(M_i) <= 0 everywhere,
      (ii)  F_i(upper_i) <= 0 where upper_i < M_i,
      (iii) F_i(lower_i) >= 0 where lower_i > 0,

    with tolerance 10h^2 and one grid cell excluded on each side of every
    envelope kink (the conditions are stated on open intervals away from
    the matching points). Returns a list of SignCheck records.
    """
    if grid is None:
        grid = Grid.from_h(-60.0, 120.0, 0.05)
    if rng is None:
        rng = np.random.default_rng(42)
    g = grid
    x = g.x
    h = g.h
    tol = 10.0 * h * h
    kinks = env.kinks()

    interior = np.ones(g.n, dtype=bool)
    interior[:2] = interior[-2:] = False

    def cut(mask, *kink_names):
        m = mask & interior
        for kn in kink_names:
            if kn in kinks:
                m &= np.abs(x - kinks[kn]) > 1.5 * h
        return m

    up1, up2 = envelope_fields(env, g, "upper")
    lo1, lo2 = envelope_fields(env, g, "lower")
    zero1 = Field(g, np.zeros(g.n), 0.0, 0.0)
    zero2 = Field(g, np.zeros(g.n), 0.0, 0.0)
    m1f = Field.constant(g, env.M1)
    m2f = Field.constant(g, env.M2)

    frozen = [("upper", up1, up2), ("lower", lo1, lo2)]
    for j in range(samples):
        s1, s2 = sample_E(env, g, rng)
        frozen.append((f"sample-{j}", s1, s2))

    out = []
    for name, u1, u2 in frozen:
        F1z, F2z = eval_operator(zero1, zero2, u1, u2, env, p)
        F1m, F2m = eval_operator(m1f, m2f, u1, u2, env, p)
        F1u, F2u = eval_operator(up1, up2, u1, u2, env, p)
        F1l, F2l = eval_operator(lo1, lo2, u1, u2, env, p)
        out.append(_check_sign(name, "F1(0)>=0", F1z.values, cut(interior), x, tol, +1))
        out.append(_check_sign(name, "F2(0)>=0", F2z.values, cut(interior), x, tol, +1))
        out.append(_check_sign(name, "F1(M1)<=0", F1m.values, cut(interior), x, tol, -1))
        out.append(_check_sign(name, "F2(M2)<=0", F2m.values, cut(interior), x, tol, -1))
        out.append(_check_sign(
            name, "F1(u1_upper)<=0", F1u.values,
            cut(up1.values < env.M1 - 1e-12, "u1_upper"), x, tol, -1))
        out.append(_check_sign(
            name, "F2(u2_upper)<=0", F2u.values,
            cut(up2.values < env.M2 - 1e-12, "u2_upper"), x, tol, -1))
        out.append(_check_sign(
            name, "F1(u1_lower)>=0", F1l.values,
            cut(lo1.values > 1e-12, "u1_lower"), x, tol, +1))
        out.append(_check_sign(
            name, "F2(u2_lower)>=0", F2l.values,
            cut(lo2.values > 1e-12, "u2_lower"), x, tol, +1))
    return out
