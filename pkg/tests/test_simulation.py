import numpy as np
import pytest

import poissonnet as pn
from poissonnet.simulation import (
    SimDesign,
    gen_covariates,
    gen_parameters,
    run_study,
    sample_network,
)


def test_gen_parameters_zero_slope():
    truth = gen_parameters(100, 0.0)
    assert truth.n == 101
    assert np.all(truth.alpha == 0.0) and np.all(truth.beta == 0.0)
    assert truth.mu == pytest.approx(-np.log(100) / 4.0)
    assert truth.normalization == pn.REF_NODE_FIRST


def test_gen_parameters_ramp_values():
    truth = gen_parameters(100, 0.2)
    assert truth.alpha[100] == pytest.approx(0.2 * np.log(100))
    assert truth.alpha[50] == pytest.approx(50 * 0.2 * np.log(100) / 100)
    assert np.array_equal(truth.alpha, truth.beta)
    assert truth.alpha[0] == 0.0  # first node anchors the reference convention


def test_gen_parameters_mu_override_and_errors():
    truth = gen_parameters(10, 0.0, gamma_true=(2.0,), mu_true=-0.5)
    assert truth.mu == -0.5 and truth.gamma.tolist() == [2.0]
    with pytest.raises(ValueError):
        gen_parameters(1, 0.0)
    with pytest.raises(ValueError):
        gen_parameters(10, -0.1)


def test_gen_covariates_recipes():
    rng = np.random.default_rng(0)
    Z = gen_covariates(40, rng)
    assert Z.p == 3
    z2 = Z.z[:, :, 1]
    z3 = Z.z[:, :, 2]
    off = ~np.eye(40, dtype=bool)
    # absolute difference of unit-interval draws: symmetric, in [0, 1]
    assert np.array_equal(z2, z2.T)
    assert z2[off].min() >= 0.0 and z2[off].max() <= 1.0
    # sign products are +-1
    assert set(np.unique(z3[off])) <= {-1.0, 1.0}


def test_sign_attribute_law():
    # the per-node signs are +1 w.p. 0.3 and -1 w.p. 0.7: mean -0.4
    rng = np.random.default_rng(123)
    draws = np.where(rng.random(100_000) < 0.3, 1.0, -1.0)
    assert abs(draws.mean() - (-0.4)) < 0.01


def test_sample_network_poisson_moments():
    # one large flat graph gives ~1e5 iid draws at rate 2
    n = 317
    mu = np.log(2.0)
    truth = pn.ParamState(np.full(n, mu), np.zeros(n), np.zeros(0))
    Z = pn.CovariateTensor.empty(n)
    g = sample_network(truth, Z, np.random.default_rng(7))
    off = ~np.eye(n, dtype=bool)
    draws = g.weights[off]
    assert draws.size == n * (n - 1)
    assert abs(draws.mean() - 2.0) < 0.02
    assert abs(draws.var() / draws.mean() - 1.0) < 0.03
    assert np.all(np.diagonal(g.weights) == 0)


def test_sample_network_vanishing_rate():
    n = 12
    truth = pn.ParamState(np.full(n, -50.0), np.zeros(n), np.zeros(0))
    g = sample_network(truth, pn.CovariateTensor.empty(n), np.random.default_rng(1))
    assert g.weights.sum() == 0


def test_design_validation():
    with pytest.raises(ValueError):
        SimDesign(n=10, reps=0)
    with pytest.raises(ValueError):
        SimDesign(n=10, ci_level=1.0)
    with pytest.raises(ValueError):
        SimDesign(n=10, contrast_pairs=((0, 11),))
    d = SimDesign(n=10)
    assert d.contrast_pairs == ((1, 2),)  # grid pairs above n are dropped


def test_run_study_deterministic_across_workers():
    design = SimDesign(n=20, slope=0.2, reps=6, seed=99, contrast_pairs=((1, 2),))
    r1 = run_study(design, workers=1)
    r2 = run_study(design, workers=4)
    assert r1.pair_cells == r2.pair_cells
    assert r1.mu_cell == r2.mu_cell
    assert r1.gamma_cells == r2.gamma_cells
    assert r1.failed_trials == r2.failed_trials


def test_run_study_single_rep():
    design = SimDesign(n=15, reps=1, seed=3, contrast_pairs=((0, 1),))
    rep = run_study(design)
    (i, j, cov, length) = rep.pair_cells[0]
    assert cov in (0.0, 100.0)
    assert length > 0
    assert rep.reps == 1


def test_run_study_counts_failures():
    # a very sparse design produces zero-degree nodes; failures are
    # tabulated rather than raised
    design = SimDesign(
        n=6, reps=6, seed=5, mu_true=-4.0, gamma_true=(0.0, 0.0, 0.0),
        contrast_pairs=((0, 1),),
    )
    rep = run_study(design)
    assert rep.nonexistent == len(rep.failed_trials) > 0
    assert rep.nonexistence_pct == pytest.approx(100.0 * rep.nonexistent / 6)


def test_run_study_fixed_covariates_flag():
    d1 = SimDesign(n=12, reps=3, seed=11, fix_covariates=True, contrast_pairs=((1, 2),))
    rep = run_study(d1)
    assert rep.reps == 3
    # fixing covariates changes the draw stream, so reports differ
    d2 = SimDesign(n=12, reps=3, seed=11, fix_covariates=False, contrast_pairs=((1, 2),))
    rep2 = run_study(d2)
    assert rep.pair_cells != rep2.pair_cells


def test_ci_length_decreases_with_slope():
    # ramp-top contrasts tighten as the slope grows (rate sums blow up)
    kw = dict(n=40, reps=10, contrast_pairs=((39, 40),), seed=17)
    flat = run_study(SimDesign(slope=0.0, **kw))
    steep = run_study(SimDesign(slope=0.6, **kw))
    assert steep.pair_cells[0][3] < flat.pair_cells[0][3]


def test_raw_records_emitted():
    design = SimDesign(n=12, reps=4, seed=2, contrast_pairs=((1, 2),))
    rep = run_study(design, emit_raw=True)
    assert rep.raw is not None and len(rep.raw) == 4
    trial, ok, mu_rec, gamma_rec = rep.raw[0]
    assert ok and len(gamma_rec) == 3
