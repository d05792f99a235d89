"""Maximum-likelihood fitting by a two-stage Newton scheme.

The inner stage solves the degree-matching equations for the node
parameters at fixed covariate coefficients; the outer stage takes Newton
steps on the covariate coefficients against the profiled score, using the
profiled Hessian as the exact Jacobian. A one-shot joint Newton path over
all parameters is provided as a cross-check: both reach the same fixed
point of the minimal score equations.

Fitting runs internally in the minimal mu-free coordinates; the result is
re-expressed in the requested normalization afterwards, which leaves the
fitted rates bit-identical across conventions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .graph import CovariateTensor, WeightedDigraph, degrees
from .kernel import (
    MU_ZERO_BETA_N_ZERO,
    NORMALIZATIONS,
    DivergenceError,
    FisherBlocks,
    ParamState,
    SingularFisherError,
    profile_hessian_from_blocks,
    rate_matrix,
    solve_degree_fisher,
)

__all__ = ["SolverConfig", "FitResult", "fit", "fit_joint", "fit_theta_given_gamma"]

logger = logging.getLogger("poissonnet")


@dataclass(frozen=True)
class SolverConfig:
    """Newton solver controls.

    ``divergence_bound`` caps parameter magnitudes; crossing it is taken
    as evidence that no finite maximizer exists. ``strict`` refuses to
    iterate at all when a node has zero out- or in-degree (the maximizer
    provably escapes to -inf for such nodes); with ``strict=False`` the
    solve runs anyway and only the existence flag records the defect.
    """

    tol_theta: float = 1e-8
    tol_gamma: float = 1e-8
    max_inner: int = 100
    max_outer: int = 50
    divergence_bound: float = 30.0
    damping: bool = True
    max_halvings: int = 20
    strict: bool = True

    def __post_init__(self):
        if self.tol_theta <= 0 or self.tol_gamma <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_inner < 1 or self.max_outer < 1:
            raise ValueError("iteration caps must be at least 1")
        if self.divergence_bound <= 0:
            raise ValueError("divergence_bound must be positive")


@dataclass(frozen=True)
class FitResult:
    """Outcome of a maximum-likelihood fit.

    ``exists`` records whether a finite maximizer exists (false when a
    node has a zero degree or a parameter escaped the divergence bound);
    ``converged`` requires both score norms below tolerance.
    """

    state: ParamState
    converged: bool
    exists: bool
    inner_iters: int
    outer_iters: int
    final_score_norms: tuple
    flagged_nodes: tuple

    def __post_init__(self):
        if self.converged and self.exists:
            f_norm, q_norm = self.final_score_norms
            if not (np.isfinite(f_norm) and np.isfinite(q_norm)):
                raise ValueError("converged result must carry finite score norms")


@dataclass(frozen=True)
class _InnerDiagnostics:
    converged: bool
    diverged: bool
    iterations: int
    final_norm: float
    residuals: tuple = ()


def _linf(x: np.ndarray) -> float:
    return float(np.abs(x).max()) if x.size else 0.0


def _inner_score(theta, gamma, Z, d, b):
    """Rates and degree residuals at minimal coordinates (mu-free)."""
    n = d.shape[0]
    state = ParamState.from_theta(theta, gamma, n)
    lam = rate_matrix(state, Z)
    F = np.concatenate([lam.sum(axis=1) - d, (lam.sum(axis=0) - b)[:-1]])
    return lam, F


def _blocks_from_rates(lam, Z, with_gamma=False) -> FisherBlocks:
    n = lam.shape[0]
    p = Z.p
    if with_gamma and p:
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


def _newton_theta(theta, gamma, Z, d, b, cfg: SolverConfig):
    """Damped Newton on the node parameters at fixed gamma.

    Accepted steps never increase the sup-norm of the degree residual.
    Returns the updated coordinates plus diagnostics; divergence means the
    bound was crossed or the rates overflowed with no recovery by
    step-halving.
    """
    try:
        lam, F = _inner_score(theta, gamma, Z, d, b)
    except DivergenceError:
        return theta, _InnerDiagnostics(False, True, 0, np.inf)
    norm = _linf(F)
    initial_norm = norm
    trace = [norm]
    iters = 0
    for _ in range(cfg.max_inner):
        if norm <= cfg.tol_theta:
            return theta, _InnerDiagnostics(True, False, iters, norm, tuple(trace))
        blocks = _blocks_from_rates(lam, Z)
        try:
            delta = solve_degree_fisher(blocks, F)
        except SingularFisherError:
            return theta, _InnerDiagnostics(False, True, iters, norm, tuple(trace))
        step = 1.0
        accepted = False
        for _ in range(cfg.max_halvings + 1):
            cand = theta - step * delta
            if _linf(cand) > cfg.divergence_bound:
                step *= 0.5
                continue
            try:
                lam_c, F_c = _inner_score(cand, gamma, Z, d, b)
            except DivergenceError:
                step *= 0.5
                continue
            norm_c = _linf(F_c)
            if norm_c <= norm or not cfg.damping:
                theta, lam, F, norm = cand, lam_c, F_c, norm_c
                accepted = True
                break
            step *= 0.5
        iters += 1
        if not accepted:
            # No admissible step decreased the residual: either the
            # maximizer is escaping or we stalled at numerical precision.
            diverged = norm > initial_norm or _linf(theta) >= cfg.divergence_bound
            return theta, _InnerDiagnostics(False, diverged, iters, norm, tuple(trace))
        trace.append(norm)
        if _linf(theta) > cfg.divergence_bound:
            return theta, _InnerDiagnostics(False, True, iters, norm, tuple(trace))
    diverged = norm > initial_norm
    return theta, _InnerDiagnostics(norm <= cfg.tol_theta, diverged, iters, norm, tuple(trace))


def fit_theta_given_gamma(
    g: WeightedDigraph,
    Z: CovariateTensor,
    gamma: np.ndarray,
    init_theta: np.ndarray | None = None,
    cfg: SolverConfig | None = None,
):
    """Solve the degree-matching equations at fixed covariate coefficients.

    Returns ``(theta, diagnostics)`` in minimal mu-free coordinates.
    """
    cfg = cfg or SolverConfig()
    deg = degrees(g)
    n = g.n
    theta = np.zeros(2 * n - 1) if init_theta is None else np.asarray(init_theta, float)
    gamma = np.asarray(gamma, dtype=np.float64)
    return _newton_theta(theta, gamma, Z, deg.d, deg.b, cfg)


def _flagged_nodes(d: np.ndarray, b: np.ndarray) -> tuple:
    return tuple(int(i) for i in np.flatnonzero((d == 0) | (b == 0)))


def _result(theta, gamma, n, normalization, converged, exists, inner, outer,
            norms, flagged) -> FitResult:
    state = ParamState.from_theta(theta, gamma, n).to_normalization(normalization)
    return FitResult(
        state=state,
        converged=converged,
        exists=exists,
        inner_iters=inner,
        outer_iters=outer,
        final_score_norms=tuple(float(v) for v in norms),
        flagged_nodes=flagged,
    )


def fit(
    g: WeightedDigraph,
    Z: CovariateTensor | None = None,
    cfg: SolverConfig | None = None,
    init: ParamState | None = None,
    normalization: str = MU_ZERO_BETA_N_ZERO,
) -> FitResult:
    """Two-stage maximum-likelihood fit.

    Alternates an inner node-parameter solve with one Newton step on the
    covariate coefficients against the profiled score, until both score
    norms pass their tolerances. With no covariates this reduces to the
    degree-only fit whose fitted margins reproduce d and b exactly.
    """
    cfg = cfg or SolverConfig()
    if normalization not in NORMALIZATIONS:
        raise ValueError(f"unknown normalization {normalization!r}")
    Z = Z if Z is not None else CovariateTensor.empty(g.n)
    if Z.n != g.n:
        raise ValueError(f"covariates are for {Z.n} nodes, graph has {g.n}")
    n, p = g.n, Z.p
    deg = degrees(g)
    flagged = _flagged_nodes(deg.d, deg.b)
    if init is None:
        theta = np.zeros(2 * n - 1)
        gamma = np.zeros(p)
    else:
        base = init.to_normalization(MU_ZERO_BETA_N_ZERO)
        theta, gamma = base.theta, np.array(base.gamma)

    if flagged and cfg.strict:
        logger.warning("MLE does not exist: zero-degree nodes %s", flagged)
        return _result(theta, gamma, n, normalization, False, False, 0, 0,
                       (np.inf, np.inf), flagged)

    inner_total = 0
    # The profiled score inherits inner-solve error amplified by the
    # node/covariate cross block (order n^2 per unit of degree residual),
    # so intermediate inner solves run tighter than the outer tolerance.
    inner_cfg = cfg
    if p:
        inner_tol = min(cfg.tol_theta, 1e-3 * cfg.tol_gamma)
        if inner_tol < cfg.tol_theta:
            inner_cfg = replace(cfg, tol_theta=inner_tol)

    a = g.weights

    def profiled(gm, warm):
        """Inner solve at gm, then rates, profiled score and likelihood."""
        th2, dg = _newton_theta(warm, gm, Z, deg.d, deg.b, inner_cfg)
        if not dg.converged:
            return th2, dg, None, None, np.inf, -np.inf
        lam = rate_matrix(ParamState.from_theta(th2, gm, n), Z)
        q_c = Z.z.reshape(-1, p).T @ (lam - a).reshape(-1) if p else np.zeros(0)
        lam_safe = lam.copy()
        np.fill_diagonal(lam_safe, 1.0)
        ll = float((a * np.log(lam_safe)).sum() - lam.sum())
        return th2, dg, lam, q_c, _linf(q_c), ll

    theta, diag, lam, q_c, q_norm, ll = profiled(gamma, theta)
    inner_total += diag.iterations
    if not diag.converged:
        exists = not (diag.diverged or flagged)
        return _result(theta, gamma, n, normalization, False, exists,
                       inner_total, 0, (diag.final_norm, np.inf), flagged)
    if p == 0:
        return _result(theta, gamma, n, normalization, True, not flagged,
                       inner_total, 0, (diag.final_norm, 0.0), flagged)

    for outer in range(1, cfg.max_outer + 1):
        if q_norm <= cfg.tol_gamma:
            return _result(theta, gamma, n, normalization, True, not flagged,
                           inner_total, outer - 1, (diag.final_norm, q_norm), flagged)
        blocks = _blocks_from_rates(lam, Z, with_gamma=True)
        H = profile_hessian_from_blocks(blocks)
        try:
            delta = np.linalg.solve(H, q_c)
        except np.linalg.LinAlgError as exc:
            raise SingularFisherError("profiled Hessian is singular") from exc
        # Exact Newton direction. A step is accepted when the profiled
        # score norm shrinks enough AND the profiled likelihood does not
        # genuinely drop: the norm test alone can accept marginal
        # decreases that jump across the maximizer into ill-conditioned
        # territory, and the likelihood (concave in gamma) vetoes those.
        # The slack covers summation noise once the likelihood is flat.
        slack = 1e-6 * (1.0 + abs(ll))
        step = 1.0
        accepted = False
        for _ in range(cfg.max_halvings + 1):
            cand = gamma - step * delta
            if _linf(cand) > cfg.divergence_bound:
                step *= 0.5
                continue
            th_c, dg_c, lam_c, qc_c, qn_c, ll_c = profiled(cand, theta)
            inner_total += dg_c.iterations
            sufficient = qn_c <= (1.0 - 0.1 * step) * q_norm and ll_c >= ll - slack
            if dg_c.converged and (sufficient or not cfg.damping):
                theta, gamma, diag = th_c, cand, dg_c
                lam, q_c, q_norm, ll = lam_c, qc_c, qn_c, ll_c
                accepted = True
                break
            step *= 0.5
        if not accepted:
            diverged = _linf(gamma) >= cfg.divergence_bound
            return _result(theta, gamma, n, normalization, False,
                           not (diverged or flagged), inner_total, outer,
                           (diag.final_norm, q_norm), flagged)
    converged = q_norm <= cfg.tol_gamma
    return _result(theta, gamma, n, normalization, converged,
                   not flagged, inner_total, cfg.max_outer,
                   (diag.final_norm, q_norm), flagged)


def fit_joint(
    g: WeightedDigraph,
    Z: CovariateTensor | None = None,
    cfg: SolverConfig | None = None,
    init: ParamState | None = None,
    normalization: str = MU_ZERO_BETA_N_ZERO,
) -> FitResult:
    """Full Newton over all 2n-1+p minimal parameters at once.

    Reaches the same fixed point as :func:`fit`; kept as an internal
    cross-check. Each step solves the bordered Fisher system by
    eliminating the node block, so the per-step cost matches the
    two-stage path.
    """
    cfg = cfg or SolverConfig()
    if normalization not in NORMALIZATIONS:
        raise ValueError(f"unknown normalization {normalization!r}")
    Z = Z if Z is not None else CovariateTensor.empty(g.n)
    if Z.n != g.n:
        raise ValueError(f"covariates are for {Z.n} nodes, graph has {g.n}")
    n, p = g.n, Z.p
    deg = degrees(g)
    flagged = _flagged_nodes(deg.d, deg.b)
    if init is None:
        theta = np.zeros(2 * n - 1)
        gamma = np.zeros(p)
    else:
        base = init.to_normalization(MU_ZERO_BETA_N_ZERO)
        theta, gamma = base.theta, np.array(base.gamma)

    if flagged and cfg.strict:
        return _result(theta, gamma, n, normalization, False, False, 0, 0,
                       (np.inf, np.inf), flagged)

    def scores(th, gm):
        lam, F = _inner_score(th, gm, Z, deg.d, deg.b)
        if p:
            q = Z.z.reshape(-1, p).T @ (lam - g.weights).reshape(-1)
        else:
            q = np.zeros(0)
        return lam, F, q

    try:
        lam, F, q = scores(theta, gamma)
    except DivergenceError:
        return _result(theta, gamma, n, normalization, False, False, 0, 0,
                       (np.inf, np.inf), flagged)
    norm = max(_linf(F), _linf(q))
    tol = min(cfg.tol_theta, cfg.tol_gamma)
    iters = 0
    for _ in range(cfg.max_inner):
        if _linf(F) <= cfg.tol_theta and _linf(q) <= cfg.tol_gamma:
            return _result(theta, gamma, n, normalization, True, not flagged,
                           iters, 0, (_linf(F), _linf(q)), flagged)
        blocks = _blocks_from_rates(lam, Z, with_gamma=bool(p))
        try:
            if p:
                X = solve_degree_fisher(blocks, blocks.theta_gamma)
                f1 = solve_degree_fisher(blocks, F)
                H = blocks.gamma_gamma - blocks.theta_gamma.T @ X
                dgamma = np.linalg.solve(H, q - blocks.theta_gamma.T @ f1)
                dtheta = f1 - X @ dgamma
            else:
                dgamma = np.zeros(0)
                dtheta = solve_degree_fisher(blocks, F)
        except (SingularFisherError, np.linalg.LinAlgError):
            return _result(theta, gamma, n, normalization, False, True,
                           iters, 0, (_linf(F), _linf(q)), flagged)
        step = 1.0
        accepted = False
        for _ in range(cfg.max_halvings + 1):
            cand_t = theta - step * dtheta
            cand_g = gamma - step * dgamma
            if max(_linf(cand_t), _linf(cand_g)) > cfg.divergence_bound:
                step *= 0.5
                continue
            try:
                lam_c, F_c, q_c = scores(cand_t, cand_g)
            except DivergenceError:
                step *= 0.5
                continue
            norm_c = max(_linf(F_c), _linf(q_c))
            if norm_c <= norm or not cfg.damping:
                theta, gamma, lam, F, q, norm = cand_t, cand_g, lam_c, F_c, q_c, norm_c
                accepted = True
                break
            step *= 0.5
        iters += 1
        if not accepted:
            return _result(theta, gamma, n, normalization, False, False,
                           iters, 0, (_linf(F), _linf(q)), flagged)
    converged = _linf(F) <= cfg.tol_theta and _linf(q) <= cfg.tol_gamma
    return _result(theta, gamma, n, normalization, converged,
                   converged and not flagged, iters, 0,
                   (_linf(F), _linf(q)), flagged)
