"""Closed-form constants checked against independent numerical oracles."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from chemowave.params import (ConfigError, DomainError, HypothesisError,
                              Params, amplitude_bounds, b_lambda_kappa,
                              c_of_kappa, check_hypotheses, derive_bounds,
                              eval_F, kappa_max, kappa_star, kappa1_star,
                              params_from_config, params_to_config,
                              parse_config, solve_f)
from conftest import random_params


def quad_kernel_moment(lam, kappa):
    """B_{lam,kappa} as an adaptive quadrature of exp(-sqrt(lam)|y| + kappa*y)."""
    sl = math.sqrt(lam)
    left, _ = quad(lambda y: math.exp((sl + kappa) * y), -np.inf, 0.0)
    right, _ = quad(lambda y: math.exp((kappa - sl) * y), 0.0, np.inf)
    return left + right


def picard_f(p, kappa, tol=1e-13, max_iter=200000):
    """Tail coupling constant by fixed-point iteration, not algebra."""
    M1, M2 = amplitude_bounds(p)
    B = b_lambda_kappa(p.lam, kappa)
    base = (0.5 * kappa * B * (p.mu2 * M2 + p.a * p.mu1 * M1)
            + p.mu2 * kappa * kappa * B / (2.0 * p.sqrt_lam))
    q = 0.5 * kappa * B * p.chi1 * p.mu1 * M1  # contraction rate, < 1
    f = 0.0
    for _ in range(max_iter):
        nxt = base + q * f
        if abs(nxt - f) < tol:
            return nxt
        f = nxt
    return f


def bisect_kappa1(p, tol=1e-12):
    """Constraint boundary of kappa*B < 2/(chi1*mu1*M1) by plain bisection."""
    kmax = kappa_max(p)
    if p.chi1 == 0.0:
        return kmax
    M1, _ = amplitude_bounds(p)
    cap = 2.0 / (p.chi1 * p.mu1 * M1)

    def g(k):
        return k * b_lambda_kappa(p.lam, k) - cap

    edge = min(kmax, math.sqrt(p.lam) * (1.0 - 1e-12))
    if g(edge) < 0:
        return kmax
    lo, hi = 1e-12, edge
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def eval_F_vec(p, k):
    """Vectorized re-implementation of the obstruction function."""
    M1, M2 = amplitude_bounds(p)
    B = 2.0 * p.sqrt_lam / (p.lam - k * k)
    denom = 1.0 - 0.5 * k * B * p.chi1 * p.mu1 * M1
    f = (0.5 * k * B * (p.mu2 * M2 + p.a * p.mu1 * M1)
         + p.mu2 * k * k * B / (2.0 * p.sqrt_lam)) / denom
    comp = np.maximum(M1 * (p.a + p.chi1 * f) * (p.b - p.chi2 * p.mu1 / p.r)
                      - 1.0 / M2, 0.0)
    return (p.r * comp
            + p.chi2 * (p.lam * B + 2.0 * k) * (p.mu1 * M1 + p.mu2 * M2)
            / (2.0 * p.sqrt_lam)
            - (1.0 - p.d) * k * k)


def test_kernel_moment_vs_quadrature():
    rng = np.random.default_rng(7)
    for _ in range(100):
        lam = rng.uniform(0.5, 4.0)
        kappa = rng.uniform(0.0, 0.99) * math.sqrt(lam)
        assert b_lambda_kappa(lam, kappa) == pytest.approx(
            quad_kernel_moment(lam, kappa), abs=1e-8)


def test_kernel_moment_domain():
    with pytest.raises(DomainError):
        b_lambda_kappa(2.0, math.sqrt(2.0))
    with pytest.raises(DomainError):
        b_lambda_kappa(2.0, -0.1)


def test_kappa_b_monotone():
    # kappa * B_{lam,kappa} must increase on (0, sqrt(lam)); kappa1_star
    # being a simple constraint boundary depends on it
    rng = np.random.default_rng(11)
    for _ in range(50):
        lam = rng.uniform(0.5, 4.0)
        ks = np.linspace(1e-6, 0.999 * math.sqrt(lam), 500)
        vals = [k * b_lambda_kappa(lam, k) for k in ks]
        assert all(b > a for a, b in zip(vals, vals[1:]))


def test_solve_f_vs_picard_and_residual():
    rng = np.random.default_rng(3)
    count = 0
    while count < 100:
        p = random_params(rng)
        rep = check_hypotheses(p)
        if not (rep.of("H1")[0].holds and rep.of("H1")[1].holds) or p.a >= 1:
            continue
        k1 = kappa1_star(p)
        kappa = rng.uniform(0.05, 0.95) * k1
        try:
            f = solve_f(p, kappa)
        except DomainError:
            continue
        # self-consistency: residual of the defining linear equation
        M1, M2 = amplitude_bounds(p)
        B = b_lambda_kappa(p.lam, kappa)
        lhs = f * (1.0 - 0.5 * kappa * B * p.chi1 * p.mu1 * M1)
        rhs = (0.5 * kappa * B * (p.mu2 * M2 + p.a * p.mu1 * M1)
               + p.mu2 * kappa * kappa * B / (2.0 * p.sqrt_lam))
        assert abs(lhs - rhs) < 1e-12
        assert f == pytest.approx(picard_f(p, kappa), abs=1e-9)
        assert f > 0
        count += 1


def test_kappa1_star_vs_bisection():
    rng = np.random.default_rng(5)
    count = 0
    while count < 100:
        p = random_params(rng)
        rep = check_hypotheses(p)
        if not (rep.of("H1")[0].holds and rep.of("H1")[1].holds) or p.a >= 1:
            continue
        assert kappa1_star(p) == pytest.approx(bisect_kappa1(p), abs=1e-10)
        count += 1


def test_kappa1_star_chi_zero(chi0):
    assert kappa1_star(chi0) == kappa_max(chi0)


def test_kappa_star_vs_dense_scan(p0, p1, chi0):
    for p in (p0, p1, chi0):
        k1 = kappa1_star(p)
        ks = kappa_star(p)
        grid = np.linspace(1e-9, k1 * (1.0 - 1e-9), 200001)
        bad = eval_F_vec(p, grid) > 1.0 - p.a
        if not bad.any():
            scan = k1
        else:
            scan = grid[int(np.argmax(bad))]
        assert abs(ks - scan) <= 2.0 * (grid[1] - grid[0])
        # kappa_star is admissible: F stays at or below 1 - a up to it
        below = grid[grid < ks * (1.0 - 1e-9)]
        assert np.all(eval_F_vec(p, below) <= 1.0 - p.a + 1e-9)


def test_kappa_star_known_value(p0):
    # for this suite F never obstructs, so kappa_star hits the cap
    assert kappa_star(p0) == pytest.approx(math.sqrt(0.5), abs=1e-12)


def test_kappa_star_requires_h4():
    p = Params(a=0.99, b=1.9, d=1.0, r=1.0, lam=2.0, mu1=0.1, mu2=0.1,
               chi1=0.0, chi2=0.0)
    assert not check_hypotheses(p).h4
    with pytest.raises(HypothesisError):
        kappa_star(p)


def test_dispersion_speed_minimum(p0):
    c0 = 2.0 * math.sqrt(1.0 - p0.a)
    kmin = math.sqrt(1.0 - p0.a)
    assert c_of_kappa(p0, kmin) == pytest.approx(c0, rel=1e-14)
    for k in np.linspace(0.05, 1.5, 200):
        assert c_of_kappa(p0, k) >= c0 - 1e-14
    with pytest.raises(DomainError):
        c_of_kappa(p0, 0.0)


def test_h5_implies_h4():
    rng = np.random.default_rng(17)
    seen_h5 = 0
    for _ in range(1000):
        p = random_params(rng)
        rep = check_hypotheses(p)
        if rep.h5:
            seen_h5 += 1
            assert rep.h4, f"H5 held but H4 failed for {p}"
    assert seen_h5 > 20  # the draw box must actually exercise the implication


def test_h5_chi_zero_reduction():
    rng = np.random.default_rng(19)
    for _ in range(1000):
        p = random_params(rng, chi_zero=True)
        rep = check_hypotheses(p)
        direct = (p.r * max(p.a * p.b - 1.0, 0.0)
                  <= (1.0 - p.a) * (1.0 - max(p.d - 1.0, 0.0)))
        assert rep.chi_zero_reduction
        assert rep.h5 == direct


def test_hypothesis_flags_on_suites(p0, p1, chi0):
    r0 = check_hypotheses(p0)
    assert (r0.h1, r0.h2, r0.h3, r0.h4, r0.h5) == (True, True, False, True, True)
    r1 = check_hypotheses(p1)
    assert (r1.h1, r1.h2, r1.h3, r1.h4, r1.h5) == (True, False, True, True, True)
    rc = check_hypotheses(chi0)
    assert rc.h1 and rc.h2 and rc.h4 and rc.h5 and not rc.h3


def test_strong_competition_all_false():
    p = Params(a=1.5, b=1.2, d=1.0, r=1.0, lam=2.0, mu1=0.1, mu2=0.1,
               chi1=0.1, chi2=0.1)
    rep = check_hypotheses(p)
    assert rep.h1  # the positivity conditions alone can still hold
    assert not rep.h2 and not rep.h3 and not rep.h4 and not rep.h5


def test_derive_bounds_p1(p1):
    der = derive_bounds(p1)
    assert der.e_star == pytest.approx((5.0 / 7.0, 5.0 / 7.0), abs=1e-14)
    assert der.kappa_star == pytest.approx(kappa_star(p1), abs=0)
    assert der.c_star == pytest.approx(c_of_kappa(p1, der.kappa_star), abs=0)


def test_derive_bounds_degenerate():
    p = Params(a=0.5, b=2.0, d=1.0, r=1.0, lam=2.0, mu1=0.1, mu2=0.1)
    assert derive_bounds(p).e_star is None
    strong = Params(a=1.5, b=1.2, d=1.0, r=1.0, lam=2.0, mu1=0.1, mu2=0.1)
    der = derive_bounds(strong)
    assert der.kappa_star is None and der.c_star is None
    assert der.c0_star == 0.0


def test_amplitude_bounds_refusal():
    p = Params(a=0.5, b=1.2, d=1.0, r=1.0, lam=2.0, mu1=0.5, mu2=0.1,
               chi1=3.0, chi2=0.0)
    with pytest.raises(HypothesisError):
        amplitude_bounds(p)


def test_config_round_trip(p0):
    text = params_to_config(p0, extras={"seed": 7})
    q, extras = params_from_config(text)
    assert q == p0
    assert extras == {"seed": "7"}


@settings(deadline=None, max_examples=200)
@given(st.lists(st.floats(min_value=1e-3, max_value=1e3,
                          allow_nan=False, allow_infinity=False),
                min_size=7, max_size=7))
def test_config_round_trip_random(vals):
    a, b, d, r, lam, mu1, mu2 = vals
    p = Params(a=a, b=b, d=d, r=r, lam=lam, mu1=mu1, mu2=mu2,
               chi1=0.0, chi2=0.25)
    q, _ = params_from_config(params_to_config(p))
    assert q == p  # repr round-trips every float bit-exactly


def test_config_errors():
    with pytest.raises(ConfigError):
        parse_config("a=1\nnonsense line\n")
    with pytest.raises(ConfigError):
        parse_config("a=1\na=2\n")
    with pytest.raises(ConfigError):
        params_from_config("a=1\nb=1\n")  # missing keys
    with pytest.raises(ConfigError):
        params_from_config(params_to_config(
            Params(a=0.5, b=1.2, d=1.0, r=1.0, lam=2.0, mu1=0.1, mu2=0.1)
        ).replace("a=0.5", "a=zebra"))
    assert parse_config("# only a comment\n\n") == {}


def test_params_validation():
    with pytest.raises(ValueError):
        Params(a=-0.5, b=1.2, d=1.0, r=1.0, lam=2.0, mu1=0.1, mu2=0.1)
    with pytest.raises(ValueError):
        Params(a=0.5, b=1.2, d=1.0, r=1.0, lam=2.0, mu1=0.1, mu2=0.1,
               chi1=-0.1)


def test_eval_F_matches_vector_form(p0, p1):
    rng = np.random.default_rng(23)
    for p in (p0, p1):
        k1 = kappa1_star(p)
        for k in rng.uniform(0.05, 0.95, 25) * k1:
            assert eval_F(p, k) == pytest.approx(float(eval_F_vec(p, k)),
                                                 rel=1e-13, abs=1e-13)
