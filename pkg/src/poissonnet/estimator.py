"""Scikit-learn style estimator facade over the functional fitting core."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import as_covariate_tensor, as_weighted_digraph
from .inference import InferenceReport, compute_inference
from .kernel import MU_ZERO_BETA_N_ZERO, NORMALIZATIONS, log_likelihood, rate_matrix
from .solver import SolverConfig, fit as _fit


class NetworkPoissonRegression(BaseEstimator):
    """Poisson regression on a weighted directed graph.

    Each ordered node pair (i, j) carries an independent Poisson weight
    with log-rate ``mu + alpha_i + beta_j + z_ij . gamma``: per-node out-
    and in-propensities, a global density offset, and fixed-dimensional
    edge-covariate effects, estimated jointly by maximum likelihood.

    Parameters
    ----------
    normalization : str
        Convention pinning the two redundant location parameters; one of
        ``"mu_zero_beta_n_zero"``, ``"alpha_n_beta_n_zero_with_mu"``,
        ``"ref_node_first"``. The fitted rate matrix does not depend on
        the choice.
    tol_theta, tol_gamma : float
        Sup-norm tolerances on the degree and covariate score residuals.
    max_inner, max_outer : int
        Newton iteration caps for the node stage and the covariate stage.
    divergence_bound : float
        Parameter magnitude that is taken as evidence the maximizer is
        escaping to infinity (non-existence).
    damping : bool
        Enable step-halving safeguards on the Newton steps.
    strict : bool
        Refuse to iterate when a node has zero out- or in-degree.
    ci_level : float
        Default confidence level for :meth:`inference`.

    Attributes
    ----------
    alpha_, beta_ : ndarray of shape (n,)
        Fitted out- and in-propensities under ``normalization``.
    gamma_ : ndarray of shape (p,)
        Fitted covariate coefficients.
    mu_ : float
        Fitted density offset (0.0 under the mu-free convention).
    rates_ : ndarray of shape (n, n)
        Fitted expected-weight matrix, zero diagonal.
    converged_, exists_ : bool
        Convergence flag and finite-maximizer existence flag.
    result_ : FitResult
        Full solver outcome, including iteration counts and diagnostics.
    """

    def __init__(
        self,
        normalization: str = MU_ZERO_BETA_N_ZERO,
        tol_theta: float = 1e-8,
        tol_gamma: float = 1e-8,
        max_inner: int = 100,
        max_outer: int = 50,
        divergence_bound: float = 30.0,
        damping: bool = True,
        strict: bool = True,
        ci_level: float = 0.95,
    ):
        self.normalization = normalization
        self.tol_theta = tol_theta
        self.tol_gamma = tol_gamma
        self.max_inner = max_inner
        self.max_outer = max_outer
        self.divergence_bound = divergence_bound
        self.damping = damping
        self.strict = strict
        self.ci_level = ci_level

    def _config(self) -> SolverConfig:
        return SolverConfig(
            tol_theta=self.tol_theta,
            tol_gamma=self.tol_gamma,
            max_inner=self.max_inner,
            max_outer=self.max_outer,
            divergence_bound=self.divergence_bound,
            damping=self.damping,
            strict=self.strict,
        )

    def fit(self, A, Z=None):
        """Fit the model.

        Parameters
        ----------
        A : array-like of shape (n, n)
            Nonnegative integer edge weights with a zero diagonal.
        Z : array-like of shape (n, n, p), optional
            Pairwise covariates; omit for a degree-only fit.
        """
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"unknown normalization {self.normalization!r}")
        g = as_weighted_digraph(A)
        tensor = as_covariate_tensor(Z, g.n)
        result = _fit(g, tensor, self._config(), normalization=self.normalization)
        self.result_ = result
        self.graph_ = g
        self.covariates_ = tensor
        self.n_nodes_ = g.n
        self.converged_ = result.converged
        self.exists_ = result.exists
        self.flagged_nodes_ = result.flagged_nodes
        self.alpha_ = result.state.alpha
        self.beta_ = result.state.beta
        self.gamma_ = result.state.gamma
        self.mu_ = result.state.mu
        self.rates_ = (
            rate_matrix(result.state, tensor) if result.exists else None
        )
        return self

    def predict(self, Z=None) -> np.ndarray:
        """Expected-weight matrix at the fitted parameters.

        With ``Z`` given, rates are re-evaluated at those covariates for
        the same nodes (a counterfactual prediction).
        """
        self._check_fitted()
        if Z is None:
            return self.rates_
        tensor = as_covariate_tensor(Z, self.n_nodes_)
        return rate_matrix(self.result_.state, tensor)

    def score(self, A, Z=None) -> float:
        """Poisson log-likelihood of a weight matrix at the fitted state."""
        self._check_fitted()
        g = as_weighted_digraph(A)
        tensor = self.covariates_ if Z is None else as_covariate_tensor(Z, g.n)
        return log_likelihood(self.result_.state, g, tensor)

    def inference(self, ci_level: float | None = None, names: tuple = ()) -> InferenceReport:
        """Standard errors, confidence intervals and Wald tests."""
        self._check_fitted()
        return compute_inference(
            self.result_,
            self.graph_,
            self.covariates_,
            ci_level=self.ci_level if ci_level is None else ci_level,
            names=names,
        )

    def _check_fitted(self):
        if not hasattr(self, "result_"):
            raise RuntimeError("this estimator is not fitted yet; call fit first")
        if not self.exists_:
            raise RuntimeError(
                f"no finite maximizer exists (flagged nodes: {list(self.flagged_nodes_)})"
            )
