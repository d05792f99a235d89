"""Data model for weighted directed graphs and pairwise covariates.

All containers are immutable after construction and safe to share
read-only across parallel workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "WeightedDigraph",
    "DegreeSequences",
    "CovariateTensor",
    "NodeAttributeTable",
    "degrees",
    "build_covariates",
    "COMBINATOR_RULES",
]


@dataclass(frozen=True)
class WeightedDigraph:
    """Directed graph on n >= 2 nodes with nonnegative integer edge weights.

    ``weights[i, j]`` is the weight of the edge from i to j. Self-loops are
    not modelled; the diagonal must be zero.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError(f"weights must be a square matrix, got shape {w.shape}")
        if w.shape[0] < 2:
            raise ValueError("a graph needs at least 2 nodes")
        if not np.issubdtype(w.dtype, np.integer):
            if not np.all(np.isfinite(w)) or np.any(w != np.floor(w)):
                raise ValueError("edge weights must be nonnegative integers")
        w = w.astype(np.int64)
        if np.any(w < 0):
            raise ValueError("edge weights must be nonnegative")
        if np.any(np.diagonal(w) != 0):
            raise ValueError("self-loops are not allowed (diagonal must be zero)")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class DegreeSequences:
    """Out-degree vector d and in-degree vector b of a weighted digraph."""

    d: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=np.int64)
        b = np.asarray(self.b, dtype=np.int64)
        if d.shape != b.shape or d.ndim != 1:
            raise ValueError("d and b must be vectors of equal length")
        if d.sum() != b.sum():
            raise ValueError("total out-weight must equal total in-weight")
        d.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "b", b)


def degrees(g: WeightedDigraph) -> DegreeSequences:
    """Exact row/column sums of the weight matrix (diagonal is zero)."""
    return DegreeSequences(d=g.weights.sum(axis=1), b=g.weights.sum(axis=0))


@dataclass(frozen=True)
class CovariateTensor:
    """Pairwise covariate vectors: z[i, j] in R^p for every ordered pair.

    Diagonal entries are stored as zeros and never read. ``bound`` records
    the largest absolute entry seen at construction.
    """

    z: np.ndarray
    bound: float = field(init=False)

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.float64)
        if z.ndim != 3 or z.shape[0] != z.shape[1]:
            raise ValueError(f"covariates must have shape (n, n, p), got {z.shape}")
        if not np.all(np.isfinite(z)):
            raise ValueError("covariates must be finite (missing values are rejected)")
        z = z.copy()
        idx = np.arange(z.shape[0])
        z[idx, idx, :] = 0.0
        z.setflags(write=False)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "bound", float(np.abs(z).max()) if z.size else 0.0)

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def p(self) -> int:
        return self.z.shape[2]

    @classmethod
    def empty(cls, n: int) -> "CovariateTensor":
        """Tensor with no covariates (p = 0)."""
        return cls(np.zeros((n, n, 0)))


CONTINUOUS = "continuous"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class NodeAttributeTable:
    """Per-node attributes, each column typed as continuous or categorical.

    ``columns`` maps an attribute name to a length-n tuple of values;
    ``kinds`` maps the name to ``"continuous"`` or ``"categorical"``.
    """

    n: int
    columns: dict
    kinds: dict

    def __post_init__(self):
        for name, values in self.columns.items():
            if len(values) != self.n:
                raise ValueError(
                    f"attribute {name!r} has {len(values)} values for {self.n} nodes"
                )
            if name not in self.kinds:
                raise ValueError(f"attribute {name!r} has no declared kind")
        for name, kind in self.kinds.items():
            if kind not in (CONTINUOUS, CATEGORICAL):
                raise ValueError(f"unknown attribute kind {kind!r} for {name!r}")

    def numeric(self, name: str) -> np.ndarray:
        if self.kinds[name] != CONTINUOUS:
            raise ValueError(f"attribute {name!r} is categorical, not continuous")
        return np.asarray(self.columns[name], dtype=np.float64)


def _equal_match(attrs: NodeAttributeTable, column: str) -> np.ndarray:
    values = np.asarray(attrs.columns[column], dtype=object)
    return np.where(values[:, None] == values[None, :], 1.0, -1.0)


def _abs_diff(attrs: NodeAttributeTable, column: str) -> np.ndarray:
    x = attrs.numeric(column)
    return np.abs(x[:, None] - x[None, :])


def _product(attrs: NodeAttributeTable, column: str) -> np.ndarray:
    x = attrs.numeric(column)
    return x[:, None] * x[None, :]


# l1 distance of a single attribute coincides with its absolute difference;
# kept as a separate rule name for interface compatibility.
COMBINATOR_RULES = {
    "equal_match": _equal_match,
    "abs_diff": _abs_diff,
    "product": _product,
    "l1_distance": _abs_diff,
}


def build_covariates(
    attrs: NodeAttributeTable, combinators: Sequence[tuple[str, str]]
) -> CovariateTensor:
    """Build pairwise covariates from node attributes.

    ``combinators`` is a sequence of ``(rule, column)`` pairs. Rules:

    - ``equal_match``: +1 if the two nodes' values are equal, else -1
    - ``abs_diff`` / ``l1_distance``: |x_i - x_j| (continuous only)
    - ``product``: x_i * x_j (continuous only)

    The output is deterministic given its inputs; diagonal entries are
    left as zeros.
    """
    layers = []
    for rule, column in combinators:
        if rule not in COMBINATOR_RULES:
            raise ValueError(
                f"unknown combinator rule {rule!r}; expected one of "
                f"{sorted(COMBINATOR_RULES)}"
            )
        if column not in attrs.columns:
            raise ValueError(f"unknown attribute {column!r}")
        layers.append(COMBINATOR_RULES[rule](attrs, column))
    if not layers:
        return CovariateTensor.empty(attrs.n)
    return CovariateTensor(np.stack(layers, axis=-1))
