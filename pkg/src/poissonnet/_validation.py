"""Input validation helpers for array-facing entry points."""

from __future__ import annotations

import numpy as np

from .graph import CovariateTensor, WeightedDigraph

__all__ = ["as_weighted_digraph", "as_covariate_tensor"]


def as_weighted_digraph(A) -> WeightedDigraph:
    """Coerce an (n, n) array of counts into a validated graph."""
    if isinstance(A, WeightedDigraph):
        return A
    return WeightedDigraph(np.asarray(A))


def as_covariate_tensor(Z, n: int) -> CovariateTensor:
    """Coerce an (n, n, p) array (or None) into a validated tensor."""
    if Z is None:
        return CovariateTensor.empty(n)
    if not isinstance(Z, CovariateTensor):
        Z = CovariateTensor(np.asarray(Z))
    if Z.n != n:
        raise ValueError(f"covariates are for {Z.n} nodes, expected {n}")
    return Z
