"""Shared fixtures and numeric helpers for the test suite."""

import numpy as np
import pytest

import poissonnet as pn


def central_diff_gradient(f, x, h=1e-6):
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        grad[k] = (f(x + e) - f(x - e)) / (2.0 * h)
    return grad


def central_diff_jacobian(f, x, h=1e-6):
    """Central finite-difference Jacobian of a vector function."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(f(x))
    J = np.zeros((f0.size, x.size))
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        J[:, k] = (np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2.0 * h)
    return J


def random_instance(seed, n, p, base=0.4):
    """Graph plus covariates sampled at bounded random parameters.

    Rates are kept around 1.5-3 so every node has positive degrees with
    overwhelming probability; the draw asserts it outright.
    """
    rng = np.random.default_rng(seed)
    alpha = rng.uniform(-0.3, 0.3, n) + base
    beta = np.concatenate([rng.uniform(-0.3, 0.3, n - 1), [0.0]])
    gamma = rng.uniform(-0.5, 0.5, p)
    if p:
        Z = pn.CovariateTensor(rng.uniform(-1.0, 1.0, (n, n, p)))
    else:
        Z = pn.CovariateTensor.empty(n)
    truth = pn.ParamState(alpha, beta, gamma)
    lam = pn.rate_matrix(truth, Z)
    A = rng.poisson(lam)
    np.fill_diagonal(A, 0)
    g = pn.WeightedDigraph(A)
    deg = pn.degrees(g)
    assert deg.d.min() > 0 and deg.b.min() > 0, "instance has a zero degree"
    return g, Z, truth


@pytest.fixture
def small_instance():
    return random_instance(101, n=12, p=2)
