import numpy as np
import pytest

import poissonnet as pn
from poissonnet.graph import CATEGORICAL, CONTINUOUS, NodeAttributeTable, build_covariates


def test_degrees_single_edge():
    g = pn.WeightedDigraph(np.array([[0, 3], [0, 0]]))
    deg = pn.degrees(g)
    assert deg.d.tolist() == [3, 0]
    assert deg.b.tolist() == [0, 3]


def test_degrees_empty_graph():
    g = pn.WeightedDigraph(np.zeros((4, 4), dtype=int))
    deg = pn.degrees(g)
    assert deg.d.tolist() == [0, 0, 0, 0]
    assert deg.b.tolist() == [0, 0, 0, 0]


def test_degrees_hand_example():
    w = np.array([[0, 1, 2], [4, 0, 0], [0, 5, 0]])
    deg = pn.degrees(pn.WeightedDigraph(w))
    # independent double loop
    n = 3
    d = [sum(w[i][j] for j in range(n) if j != i) for i in range(n)]
    b = [sum(w[i][j] for i in range(n) if i != j) for j in range(n)]
    assert deg.d.tolist() == d == [3, 4, 5]
    assert deg.b.tolist() == b == [4, 6, 2]


def test_degree_conservation_random():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(2, 15))
        w = rng.poisson(1.5, (n, n))
        np.fill_diagonal(w, 0)
        deg = pn.degrees(pn.WeightedDigraph(w))
        assert deg.d.sum() == deg.b.sum()


def test_graph_validation():
    with pytest.raises(ValueError):
        pn.WeightedDigraph(np.array([[1, 0], [0, 0]]))  # self-loop
    with pytest.raises(ValueError):
        pn.WeightedDigraph(np.array([[0, -1], [0, 0]]))  # negative
    with pytest.raises(ValueError):
        pn.WeightedDigraph(np.array([[0, 0.5], [0, 0]]))  # fractional
    with pytest.raises(ValueError):
        pn.WeightedDigraph(np.zeros((2, 3)))  # not square
    with pytest.raises(ValueError):
        pn.WeightedDigraph(np.zeros((1, 1)))  # too small
    # float-typed integers are fine
    g = pn.WeightedDigraph(np.array([[0.0, 2.0], [1.0, 0.0]]))
    assert g.weights.dtype == np.int64


def _attrs():
    return NodeAttributeTable(
        n=3,
        columns={
            "dept": ("legal", "legal", "trading"),
            "x1": (0.4, 0.1, 0.9),
            "sign": (-1.0, -1.0, 1.0),
        },
        kinds={"dept": CATEGORICAL, "x1": CONTINUOUS, "sign": CONTINUOUS},
    )


def test_equal_match_values():
    Z = build_covariates(_attrs(), [("equal_match", "dept")])
    assert Z.z[0, 1, 0] == 1.0   # legal vs legal
    assert Z.z[0, 2, 0] == -1.0  # legal vs trading
    assert Z.z[2, 0, 0] == -1.0


def test_abs_diff_value():
    Z = build_covariates(_attrs(), [("abs_diff", "x1")])
    assert Z.z[0, 1, 0] == pytest.approx(0.3)
    assert Z.z[1, 0, 0] == pytest.approx(0.3)


def test_product_value():
    Z = build_covariates(_attrs(), [("product", "sign")])
    assert Z.z[0, 1, 0] == 1.0  # (-1) * (-1)
    assert Z.z[0, 2, 0] == -1.0


def test_equal_match_symmetric():
    rng = np.random.default_rng(1)
    labels = tuple(rng.choice(list("abc"), 8))
    attrs = NodeAttributeTable(n=8, columns={"lab": labels}, kinds={"lab": CATEGORICAL})
    Z = build_covariates(attrs, [("equal_match", "lab")])
    assert np.array_equal(Z.z[:, :, 0], Z.z[:, :, 0].T)


def test_build_covariates_deterministic_and_diagonal():
    spec = [("equal_match", "dept"), ("abs_diff", "x1"), ("product", "sign")]
    Z1 = build_covariates(_attrs(), spec)
    Z2 = build_covariates(_attrs(), spec)
    assert np.array_equal(Z1.z, Z2.z)
    assert Z1.p == 3
    assert np.all(Z1.z[np.arange(3), np.arange(3), :] == 0.0)


def test_build_covariates_errors():
    with pytest.raises(ValueError, match="unknown attribute"):
        build_covariates(_attrs(), [("equal_match", "nope")])
    with pytest.raises(ValueError, match="unknown combinator"):
        build_covariates(_attrs(), [("xor", "dept")])
    with pytest.raises(ValueError, match="categorical"):
        build_covariates(_attrs(), [("abs_diff", "dept")])


def test_l1_distance_single_column_matches_abs_diff():
    Za = build_covariates(_attrs(), [("l1_distance", "x1")])
    Zb = build_covariates(_attrs(), [("abs_diff", "x1")])
    assert np.array_equal(Za.z, Zb.z)


def test_covariate_tensor_rejects_missing():
    z = np.zeros((3, 3, 1))
    z[0, 1, 0] = np.nan
    with pytest.raises(ValueError, match="finite"):
        pn.CovariateTensor(z)


def test_covariate_tensor_bound_and_empty():
    z = np.zeros((3, 3, 1))
    z[0, 1, 0] = -2.5
    assert pn.CovariateTensor(z).bound == 2.5
    e = pn.CovariateTensor.empty(4)
    assert e.p == 0 and e.n == 4


def test_attribute_table_validation():
    with pytest.raises(ValueError, match="3 values"):
        NodeAttributeTable(n=4, columns={"a": (1, 2, 3)}, kinds={"a": CONTINUOUS})
    with pytest.raises(ValueError, match="kind"):
        NodeAttributeTable(n=2, columns={"a": (1, 2)}, kinds={})
