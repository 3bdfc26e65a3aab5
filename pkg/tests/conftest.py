import numpy as np
import pytest

from chemowave.params import Params


@pytest.fixture(scope="session")
def p0():
    """Weak-competition suite with chemotaxis (H1, H2, H4, H5 hold)."""
    return Params(a=0.5, b=1.2, d=1.0, r=1.0, lam=2.0,
                  mu1=0.1, mu2=0.1, chi1=0.2, chi2=0.2)


@pytest.fixture(scope="session")
def p1():
    """Coexistence suite (H1, H3 hold; left state is the interior equilibrium)."""
    return Params(a=0.4, b=0.4, d=1.0, r=1.0, lam=2.0,
                  mu1=0.1, mu2=0.1, chi1=0.1, chi2=0.1)


@pytest.fixture(scope="session")
def chi0():
    """Classical competition-diffusion suite (no chemotaxis)."""
    return Params(a=0.5, b=1.2, d=1.0, r=1.0, lam=2.0,
                  mu1=0.1, mu2=0.1, chi1=0.0, chi2=0.0)


def random_params(rng, chi_zero=False):
    """One random coefficient draw over a broad admissible box."""
    chi1 = 0.0 if chi_zero else rng.uniform(0.0, 0.5)
    chi2 = 0.0 if chi_zero else rng.uniform(0.0, 0.5)
    return Params(a=rng.uniform(0.05, 1.5), b=rng.uniform(0.05, 2.0),
                  d=rng.uniform(0.2, 2.5), r=rng.uniform(0.2, 2.5),
                  lam=rng.uniform(0.5, 4.0), mu1=rng.uniform(0.01, 0.3),
                  mu2=rng.uniform(0.01, 0.3), chi1=chi1, chi2=chi2)


@pytest.fixture(scope="session")
def chi0_wave_k05(chi0):
    """Converged chi=0 wave at kappa=0.5, shared across test modules."""
    from chemowave import wavesolver
    return wavesolver.solve_wave(chi0, kappa=0.5)
