"""Nonlocal chemical solver against dense and analytic oracles."""

import math

import numpy as np
import pytest

from chemowave.grids import Field, Grid
from chemowave.kernel import (check_lemma_bounds, residual_elliptic,
                              solve_scalar, solve_v, solve_v_dense,
                              solve_v_pair, solve_v_x)
from chemowave.supersub import build_envelopes, envelope_fields, sample_E


def gaussian_fields(g, shift=0.0):
    x = g.x
    u1 = Field(g, np.exp(-0.5 * (x - shift) ** 2), 0.0, 0.0)
    u2 = Field(g, 0.5 * np.exp(-0.25 * (x - shift - 3.0) ** 2), 0.0, 0.0)
    return u1, u2


def test_constant_source_exact(p0):
    # constant densities give v = (mu1*u1 + mu2*u2)/lam exactly
    g = Grid.from_h(-10.0, 10.0, 0.1)
    u1 = Field.constant(g, 0.7)
    u2 = Field.constant(g, 1.3)
    v = solve_v(u1, u2, p0)
    expect = (p0.mu1 * 0.7 + p0.mu2 * 1.3) / p0.lam
    assert np.max(np.abs(v.values - expect)) < 1e-10
    vx = solve_v_x(u1, u2, p0)
    assert np.max(np.abs(vx.values)) < 1e-10


def test_sweeps_match_dense_oracle(p0):
    g = Grid.from_h(-10.0, 10.0, 0.05)
    u1, u2 = gaussian_fields(g)
    fast = solve_v(u1, u2, p0)
    dense = solve_v_dense(u1, u2, p0)
    assert np.max(np.abs(fast.values - dense.values)) < 1e-12


def test_sweeps_match_dense_with_tails(p0):
    # nonzero constant extensions exercise the closed-form tail terms
    g = Grid.from_h(-8.0, 8.0, 0.05)
    x = g.x
    u1 = Field(g, 1.0 / (1.0 + np.exp(2.0 * x)), 1.0, 0.0)
    u2 = Field(g, 1.0 - u1.values, 0.0, 1.0)
    fast = solve_v(u1, u2, p0)
    dense = solve_v_dense(u1, u2, p0)
    assert np.max(np.abs(fast.values - dense.values)) < 1e-12


def test_linearity(p0):
    g = Grid.from_h(-10.0, 10.0, 0.05)
    rng = np.random.default_rng(1)
    a = Field(g, rng.random(g.n), 0.3, 0.1)
    b = Field(g, rng.random(g.n), 0.2, 0.4)
    zero = Field(g, np.zeros(g.n), 0.0, 0.0)
    combo = Field(g, 2.0 * a.values + 3.0 * b.values,
                  2.0 * a.left_tail + 3.0 * b.left_tail,
                  2.0 * a.right_tail + 3.0 * b.right_tail)
    va = solve_v(a, zero, p0)
    vb = solve_v(b, zero, p0)
    vc = solve_v(combo, zero, p0)
    assert np.max(np.abs(vc.values - 2.0 * va.values - 3.0 * vb.values)) < 1e-12


def test_positivity(p0):
    g = Grid.from_h(-15.0, 15.0, 0.05)
    rng = np.random.default_rng(2)
    for _ in range(5):
        u1 = Field(g, rng.random(g.n), rng.random(), rng.random())
        u2 = Field(g, rng.random(g.n), rng.random(), rng.random())
        v = solve_v(u1, u2, p0)
        assert np.min(v.values) >= 0.0


def test_max_principle_bound(p0):
    # v <= (mu1*sup u1 + mu2*sup u2)/lam pointwise
    g = Grid.from_h(-15.0, 15.0, 0.05)
    rng = np.random.default_rng(3)
    u1 = Field(g, rng.random(g.n), 0.5, 0.5)
    u2 = Field(g, 2.0 * rng.random(g.n), 1.0, 1.0)
    v = solve_v(u1, u2, p0)
    cap = (p0.mu1 * max(np.max(u1.values), 0.5)
           + p0.mu2 * max(np.max(u2.values), 1.0)) / p0.lam
    assert np.max(v.values) <= cap + 1e-12


def test_translation_equivariance(p0):
    g = Grid.from_h(-30.0, 30.0, 0.05)
    shift = 4.0
    k = int(round(shift / g.h))
    u1, u2 = gaussian_fields(g)
    u1s, u2s = gaussian_fields(g, shift=shift)
    v = solve_v(u1, u2, p0)
    vs = solve_v(u1s, u2s, p0)
    # compare away from the ends where the shifted supports differ
    sl = slice(4 * k, -4 * k)
    assert np.max(np.abs(vs.values[sl] - v.values[sl.start - k:sl.stop - k])) \
        < 1e-10


def manufactured_error(lam, h):
    """Sup error of solve_scalar against v = cos(pi x), interior window."""
    g = Grid.from_h(-30.0, 30.0, h)
    x = g.x
    src = Field(g, (lam + math.pi ** 2) * np.cos(math.pi * x),
                float((lam + math.pi ** 2) * math.cos(math.pi * x[0])),
                float((lam + math.pi ** 2) * math.cos(math.pi * x[-1])))
    w, wx = solve_scalar(src, lam)
    mask = np.abs(x) <= 20.0
    err_v = np.max(np.abs(w.values[mask] - np.cos(math.pi * x[mask])))
    err_vx = np.max(np.abs(wx.values[mask]
                           + math.pi * np.sin(math.pi * x[mask])))
    return err_v, err_vx


def test_manufactured_solution_order():
    lam = 2.0
    e1, g1 = manufactured_error(lam, 0.05)
    e2, g2 = manufactured_error(lam, 0.025)
    assert e1 < 5e-3 and g1 < 2e-2
    assert math.log2(e1 / e2) > 1.9
    assert math.log2(g1 / g2) > 1.9


def test_gradient_consistent_with_centered_differences(p0):
    g = Grid.from_h(-15.0, 15.0, 0.02)
    u1, u2 = gaussian_fields(g)
    v, vx = solve_v_pair(u1, u2, p0)
    num = (v.values[2:] - v.values[:-2]) / (2.0 * g.h)
    assert np.max(np.abs(vx.values[1:-1] - num)) < 5.0 * g.h ** 2


def test_elliptic_residual_order(p0):
    errs = []
    for h in (0.1, 0.05):
        g = Grid.from_h(-15.0, 15.0, h)
        u1, u2 = gaussian_fields(g)
        v = solve_v(u1, u2, p0)
        errs.append(residual_elliptic(v, u1, u2, p0))
    assert errs[0] < 1e-2
    assert math.log2(errs[0] / errs[1]) > 1.9


def test_lemma_bounds_on_extremes(p0):
    env = build_envelopes(p0, 0.3)
    g = Grid.from_h(-60.0, 120.0, 0.05)
    for which in ("upper", "lower"):
        u1, u2 = envelope_fields(env, g, which)
        for rep in check_lemma_bounds(u1, u2, env, p0):
            assert rep.passed, f"{which}:{rep.name} slack {rep.worst_slack}"


def test_lemma_bounds_on_random_members(p0):
    env = build_envelopes(p0, 0.3)
    g = Grid.from_h(-60.0, 120.0, 0.05)
    rng = np.random.default_rng(4)
    for _ in range(5):
        u1, u2 = sample_E(env, g, rng)
        for rep in check_lemma_bounds(u1, u2, env, p0):
            assert rep.passed, f"{rep.name} slack {rep.worst_slack}"


def test_lemma_bounds_reject_nonmember(p0):
    env = build_envelopes(p0, 0.3)
    g = Grid.from_h(-60.0, 120.0, 0.05)
    u1 = Field(g, np.full(g.n, 5.0 * env.M1), 5.0 * env.M1, 5.0 * env.M1)
    u2 = Field.constant(g, 1.0)
    with pytest.raises(ValueError, match="trapped set"):
        check_lemma_bounds(u1, u2, env, p0)
