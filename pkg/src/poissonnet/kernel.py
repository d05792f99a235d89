"""Model kernel: rates, log-likelihood, score vectors and Fisher blocks.

The model assigns each ordered pair (i, j), i != j, an independent Poisson
weight with log-rate ``mu + alpha_i + beta_j + z_ij . gamma``. Two degrees
of freedom of (mu, alpha, beta) are redundant; a normalization convention
pins them. All functions here are pure and accept states in any supported
convention; the log-rate formula is evaluated uniformly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import gammaln

from .graph import CovariateTensor, WeightedDigraph

__all__ = [
    "MU_ZERO_BETA_N_ZERO",
    "ALPHA_N_BETA_N_ZERO",
    "REF_NODE_FIRST",
    "NORMALIZATIONS",
    "ParamState",
    "FisherBlocks",
    "DivergenceError",
    "SingularFisherError",
    "rate",
    "rate_matrix",
    "log_likelihood",
    "degree_score",
    "covariate_score",
    "fisher_blocks",
    "solve_degree_fisher",
    "solve_degree_fisher_dense",
    "profile_hessian",
    "profile_hessian_from_blocks",
]

# Supported normalization conventions. Either mu is dropped and the last
# node's beta pinned, or mu is kept and a reference node's alpha and beta
# are pinned (last node or first node).
MU_ZERO_BETA_N_ZERO = "mu_zero_beta_n_zero"
ALPHA_N_BETA_N_ZERO = "alpha_n_beta_n_zero_with_mu"
REF_NODE_FIRST = "ref_node_first"
NORMALIZATIONS = (MU_ZERO_BETA_N_ZERO, ALPHA_N_BETA_N_ZERO, REF_NODE_FIRST)

# Log-rates beyond this evaluate to inf in double precision; the solver
# treats them as divergence instead of propagating infinities.
MAX_EXPONENT = 700.0


class DivergenceError(RuntimeError):
    """A log-rate exceeded the double-precision overflow guard."""


class SingularFisherError(RuntimeError):
    """The Fisher system is numerically singular (degenerate fit)."""


@dataclass(frozen=True)
class ParamState:
    """Parameter vector under a normalization convention.

    alpha, beta have length n (one entry per node, pinned coordinates
    included), gamma has length p, and mu is the density offset (exactly
    0.0 under the mu-free convention).
    """

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    mu: float = 0.0
    normalization: str = MU_ZERO_BETA_N_ZERO

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=np.float64)
        beta = np.asarray(self.beta, dtype=np.float64)
        gamma = np.asarray(self.gamma, dtype=np.float64)
        if alpha.ndim != 1 or beta.shape != alpha.shape:
            raise ValueError("alpha and beta must be vectors of equal length")
        if gamma.ndim != 1:
            raise ValueError("gamma must be a vector")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"unknown normalization {self.normalization!r}")
        mu = float(self.mu)
        if self.normalization == MU_ZERO_BETA_N_ZERO:
            if mu != 0.0 or beta[-1] != 0.0:
                raise ValueError("convention requires mu = 0 and beta[-1] = 0")
        elif self.normalization == ALPHA_N_BETA_N_ZERO:
            if alpha[-1] != 0.0 or beta[-1] != 0.0:
                raise ValueError("convention requires alpha[-1] = beta[-1] = 0")
        else:
            if alpha[0] != 0.0 or beta[0] != 0.0:
                raise ValueError("convention requires alpha[0] = beta[0] = 0")
        for arr in (alpha, beta, gamma):
            arr.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "mu", mu)

    @property
    def n(self) -> int:
        return self.alpha.shape[0]

    @property
    def p(self) -> int:
        return self.gamma.shape[0]

    @property
    def theta(self) -> np.ndarray:
        """Minimal node-parameter vector (alpha_1..alpha_n, beta_1..beta_{n-1}).

        Only defined under the mu-free convention, where these 2n-1
        coordinates are the free ones.
        """
        if self.normalization != MU_ZERO_BETA_N_ZERO:
            raise ValueError("theta is defined under the mu-free convention only")
        return np.concatenate([self.alpha, self.beta[:-1]])

    @classmethod
    def zeros(cls, n: int, p: int, normalization: str = MU_ZERO_BETA_N_ZERO):
        return cls(np.zeros(n), np.zeros(n), np.zeros(p), 0.0, normalization)

    @classmethod
    def from_theta(cls, theta: np.ndarray, gamma: np.ndarray, n: int) -> "ParamState":
        """Assemble a mu-free state from its minimal coordinate vector."""
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (2 * n - 1,):
            raise ValueError(f"theta must have length {2 * n - 1}")
        beta = np.concatenate([theta[n:], [0.0]])
        return cls(theta[:n], beta, gamma, 0.0, MU_ZERO_BETA_N_ZERO)

    def to_normalization(self, target: str) -> "ParamState":
        """Re-express the same rate surface under another convention.

        The rates exp(mu + alpha_i + beta_j + z.gamma) are left exactly
        unchanged; only the redundant coordinates move.
        """
        if target == self.normalization:
            return self
        mu, alpha, beta = self.mu, self.alpha, self.beta
        if target == MU_ZERO_BETA_N_ZERO:
            alpha2 = alpha + mu + beta[-1]
            beta2 = beta - beta[-1]
            mu2 = 0.0
        elif target == ALPHA_N_BETA_N_ZERO:
            mu2 = mu + alpha[-1] + beta[-1]
            alpha2 = alpha - alpha[-1]
            beta2 = beta - beta[-1]
        elif target == REF_NODE_FIRST:
            mu2 = mu + alpha[0] + beta[0]
            alpha2 = alpha - alpha[0]
            beta2 = beta - beta[0]
        else:
            raise ValueError(f"unknown normalization {target!r}")
        return ParamState(alpha2, beta2, self.gamma, mu2, target)


def _check_dims(state: ParamState, Z: CovariateTensor):
    if Z.n != state.n:
        raise ValueError(f"covariates are for {Z.n} nodes, state has {state.n}")
    if Z.p != state.p:
        raise ValueError(f"covariates have p={Z.p}, state has p={state.p}")


def _exponents(state: ParamState, Z: CovariateTensor) -> np.ndarray:
    """Log-rate matrix mu + alpha_i + beta_j + z_ij.gamma (diagonal unused)."""
    _check_dims(state, Z)
    pi = state.mu + state.alpha[:, None] + state.beta[None, :]
    if state.p:
        pi = pi + Z.z @ state.gamma
    off = ~np.eye(state.n, dtype=bool)
    if np.any(pi[off] > MAX_EXPONENT):
        raise DivergenceError("log-rate exceeds overflow guard (diverging fit)")
    return pi


def rate_matrix(state: ParamState, Z: CovariateTensor) -> np.ndarray:
    """Expected-weight matrix with a zero diagonal."""
    lam = np.exp(_exponents(state, Z))
    np.fill_diagonal(lam, 0.0)
    return lam


def rate(state: ParamState, Z: CovariateTensor, i: int, j: int) -> float:
    """Expected weight of the single edge i -> j."""
    if i == j:
        raise ValueError("self-loop rates are undefined")
    _check_dims(state, Z)
    pi = state.mu + state.alpha[i] + state.beta[j] + float(Z.z[i, j] @ state.gamma)
    if pi > MAX_EXPONENT:
        raise DivergenceError("log-rate exceeds overflow guard (diverging fit)")
    return float(np.exp(pi))


def log_likelihood(state: ParamState, g: WeightedDigraph, Z: CovariateTensor) -> float:
    """Poisson log-likelihood of the weight matrix.

    Sum over ordered pairs i != j of
    ``a_ij * lograte_ij - rate_ij - log(a_ij!)``, with the factorial term
    evaluated through the log-gamma function.
    """
    if g.n != state.n:
        raise ValueError(f"graph has {g.n} nodes, state has {state.n}")
    pi = _exponents(state, Z)
    lam = np.exp(pi)
    np.fill_diagonal(lam, 0.0)
    a = g.weights
    terms = a * pi - lam - gammaln(a + 1.0)
    np.fill_diagonal(terms, 0.0)
    return float(terms.sum())


def degree_score(state: ParamState, g: WeightedDigraph, Z: CovariateTensor) -> np.ndarray:
    """Degree-matching residuals, the negative gradient in the node block.

    Component i (i < n) is sum_j rate_ij - d_i; component n + j
    (j < n - 1) is sum_i rate_ij - b_j. The last in-degree equation is
    redundant and omitted. The vector vanishes at the MLE.
    """
    lam = rate_matrix(state, Z)
    d = g.weights.sum(axis=1)
    b = g.weights.sum(axis=0)
    return np.concatenate([lam.sum(axis=1) - d, (lam.sum(axis=0) - b)[:-1]])


def covariate_score(state: ParamState, g: WeightedDigraph, Z: CovariateTensor) -> np.ndarray:
    """Covariate residual sum_{i!=j} z_ij (rate_ij - a_ij), the negative
    gradient in gamma."""
    lam = rate_matrix(state, Z)
    resid = (lam - g.weights).reshape(-1)
    return Z.z.reshape(-1, Z.p).T @ resid


@dataclass(frozen=True)
class FisherBlocks:
    """Blocks of the Fisher information at a given state.

    ``rates`` is the expected-weight matrix (equal to the per-pair
    variances), ``row_sums``/``col_sums`` its margins. ``theta_gamma`` is
    the (2n-1) x p node/covariate cross block and ``gamma_gamma`` the
    p x p covariate block. The node block is sparse in structure (two
    diagonal blocks plus the rates as the cross block); ``theta_theta``
    materializes it densely.
    """

    rates: np.ndarray
    row_sums: np.ndarray
    col_sums: np.ndarray
    theta_gamma: np.ndarray
    gamma_gamma: np.ndarray

    @property
    def n(self) -> int:
        return self.rates.shape[0]

    @property
    def p(self) -> int:
        return self.theta_gamma.shape[1]

    @property
    def theta_theta(self) -> np.ndarray:
        """Dense (2n-1) x (2n-1) node-block Fisher matrix."""
        n = self.n
        V = np.zeros((2 * n - 1, 2 * n - 1))
        V[:n, :n] = np.diag(self.row_sums)
        V[n:, n:] = np.diag(self.col_sums[:-1])
        V[:n, n:] = self.rates[:, :-1]
        V[n:, :n] = self.rates[:, :-1].T
        return V


def fisher_blocks(state: ParamState, Z: CovariateTensor) -> FisherBlocks:
    """Assemble all Fisher blocks at the given state.

    With the exponential link the per-pair variance equals the rate, so
    every block is a rate-weighted sum: the cross block rows are
    sum_j rate_ij z_ij (out rows) and sum_i rate_ij z_ij (in rows), and
    the covariate block is sum rate_ij z_ij z_ij^T.
    """
    lam = rate_matrix(state, Z)
    n, p = state.n, state.p
    if p:
        theta_gamma = np.concatenate(
            [
                np.einsum("ij,ijk->ik", lam, Z.z),
                np.einsum("ij,ijk->jk", lam, Z.z)[:-1],
            ]
        )
        zf = Z.z.reshape(-1, p)
        gamma_gamma = zf.T @ (lam.reshape(-1)[:, None] * zf)
    else:
        theta_gamma = np.zeros((2 * n - 1, 0))
        gamma_gamma = np.zeros((0, 0))
    return FisherBlocks(
        rates=lam,
        row_sums=lam.sum(axis=1),
        col_sums=lam.sum(axis=0),
        theta_gamma=theta_gamma,
        gamma_gamma=gamma_gamma,
    )


def solve_degree_fisher(blocks: FisherBlocks, rhs: np.ndarray) -> np.ndarray:
    """Solve the node-block Fisher system exactly via block elimination.

    The matrix is [[diag(r), U], [U^T, diag(c)]] with U the rate matrix
    minus its last column; eliminating the out-block leaves one symmetric
    positive-definite (n-1) x (n-1) solve instead of a dense (2n-1) one.
    """
    n = blocks.n
    r = blocks.row_sums
    c = blocks.col_sums[:-1]
    if np.any(r <= 0.0) or np.any(c <= 0.0):
        raise SingularFisherError("zero marginal rate sum (degenerate node)")
    U = blocks.rates[:, :-1]
    one_d = rhs.ndim == 1
    f = rhs[:n].reshape(n, -1)
    g = rhs[n:].reshape(n - 1, -1)
    Ur = U / r[:, None]
    C = np.diag(c) - U.T @ Ur
    try:
        factor = cho_factor(C, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularFisherError("degree Fisher block is singular") from exc
    y = cho_solve(factor, g - Ur.T @ f, check_finite=False)
    x = (f - U @ y) / r[:, None]
    out = np.concatenate([x, y], axis=0)
    return out[:, 0] if one_d else out


def solve_degree_fisher_dense(blocks: FisherBlocks, rhs: np.ndarray) -> np.ndarray:
    """Reference solve against the materialized dense node block."""
    return np.linalg.solve(blocks.theta_theta, rhs)


def profile_hessian_from_blocks(blocks: FisherBlocks) -> np.ndarray:
    """Jacobian of the profiled covariate score from assembled blocks.

    Schur complement of the node block: gamma_gamma minus
    theta_gamma^T (node block)^{-1} theta_gamma, computed with an exact
    structured solve (never a materialized inverse).
    """
    if blocks.p == 0:
        return np.zeros((0, 0))
    W = blocks.theta_gamma
    return blocks.gamma_gamma - W.T @ solve_degree_fisher(blocks, W)


def profile_hessian(state: ParamState, Z: CovariateTensor) -> np.ndarray:
    """Jacobian of the profiled covariate score at the given state.

    This p x p matrix is symmetric positive semidefinite and drives the
    outer Newton step on gamma.
    """
    return profile_hessian_from_blocks(fisher_blocks(state, Z))
