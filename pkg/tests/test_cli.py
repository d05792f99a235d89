import json

import numpy as np
import pytest

import poissonnet as pn
from poissonnet import io as pio
from poissonnet.cli import main


def _write_instance(tmp_path, seed=0, n=12, isolated=False):
    """Synthetic edge list plus three categorical node attributes."""
    rng = np.random.default_rng(seed)
    dept = rng.choice(["legal", "trading", "other"], n)
    gender = rng.choice(["m", "f"], n)
    senior = rng.choice(["senior", "junior"], n)
    logit = 0.5 * (dept[:, None] == dept[None, :]) + 0.3
    lam = np.exp(logit)
    A = rng.poisson(lam)
    np.fill_diagonal(A, 0)
    A += 1 - np.eye(n, dtype=int)  # ensure positive degrees
    if isolated:
        A[n - 1, :] = 0  # last node sends nothing
    edges = tmp_path / "edges.tsv"
    with open(edges, "w") as fh:
        fh.write("src\tdst\tweight\n")
        for i in range(n):
            for j in range(n):
                if i != j and A[i, j] > 0:
                    fh.write(f"{i}\t{j}\t{A[i, j]}\n")
    attrs = tmp_path / "attrs.tsv"
    with open(attrs, "w") as fh:
        fh.write("node\tdept\tgender\tseniority\n")
        for i in range(n):
            fh.write(f"{i}\t{dept[i]}\t{gender[i]}\t{senior[i]}\n")
    return edges, attrs


def test_fit_with_combinators(tmp_path):
    edges, attrs = _write_instance(tmp_path)
    out = tmp_path / "fit"
    code = main([
        "fit", "--edges", str(edges), "--node-attrs", str(attrs),
        "--combinators", "equal:dept,equal:gender,equal:seniority",
        "--out", str(out),
    ])
    assert code == 0
    doc = json.loads((tmp_path / "fit.json").read_text())
    assert doc["schema_version"] == 1
    assert doc["converged"] and doc["exists"]
    assert len(doc["covariates"]) == 3
    assert doc["covariates"][0]["name"] == "dept"
    nodes = (tmp_path / "fit_nodes.tsv").read_text().splitlines()
    assert nodes[0].split("\t") == ["node", "d", "alpha", "alpha_se", "b", "beta", "beta_se"]
    assert len(nodes) == 13
    cov = (tmp_path / "fit_covariates.tsv").read_text().splitlines()
    assert cov[0].split("\t") == ["covariate", "gamma", "gamma_bc", "se", "p_value"]
    assert len(cov) == 4


def test_fit_degree_only_omits_covariate_table(tmp_path):
    edges, _ = _write_instance(tmp_path)
    out = tmp_path / "plain"
    assert main(["fit", "--edges", str(edges), "--out", str(out)]) == 0
    doc = json.loads((tmp_path / "plain.json").read_text())
    assert "covariates" not in doc
    assert not (tmp_path / "plain_covariates.tsv").exists()


def test_fit_isolated_node_exit_2(tmp_path):
    edges, attrs = _write_instance(tmp_path, isolated=True)
    out = tmp_path / "bad"
    code = main(["fit", "--edges", str(edges), "--out", str(out)])
    assert code == 2
    doc = json.loads((tmp_path / "bad.json").read_text())
    assert doc["exists"] is False
    assert 11 in doc["flagged_nodes"]


def test_fit_malformed_tsv_exit_1(tmp_path):
    bad = tmp_path / "edges.tsv"
    bad.write_text("src\tdst\tweight\n0\t1\t2\n0\tx\t1\n")
    code = main(["fit", "--edges", str(bad), "--out", str(tmp_path / "o")])
    assert code == 1


def test_fit_conflicting_covariate_sources(tmp_path):
    edges, attrs = _write_instance(tmp_path)
    zfile = tmp_path / "z.tsv"
    zfile.write_text("src\tdst\tz1\n")
    code = main([
        "fit", "--edges", str(edges), "--node-attrs", str(attrs),
        "--combinators", "equal:dept", "--covariates", str(zfile),
        "--out", str(tmp_path / "o"),
    ])
    assert code == 1


def test_fit_pairwise_covariates(tmp_path):
    edges, _ = _write_instance(tmp_path, n=6)
    rng = np.random.default_rng(4)
    zfile = tmp_path / "z.tsv"
    with open(zfile, "w") as fh:
        fh.write("src\tdst\tz1\tz2\n")
        for i in range(6):
            for j in range(6):
                if i != j:
                    fh.write(f"{i}\t{j}\t{rng.normal():.6f}\t{rng.normal():.6f}\n")
    out = tmp_path / "pw"
    code = main(["fit", "--edges", str(edges), "--covariates", str(zfile), "--out", str(out)])
    assert code == 0
    doc = json.loads((tmp_path / "pw.json").read_text())
    assert [c["name"] for c in doc["covariates"]] == ["z1", "z2"]


def test_pairwise_covariates_missing_rows_rejected(tmp_path):
    zfile = tmp_path / "z.tsv"
    zfile.write_text("src\tdst\tz1\n0\t1\t0.5\n")
    with pytest.raises(pio.TsvError, match="no covariate row"):
        pio.read_pairwise_covariates(zfile, 3)


def test_edge_list_round_trip(tmp_path):
    g, _, _ = __import__("conftest").random_instance(300, n=9, p=0)
    path = tmp_path / "rt.tsv"
    pio.write_edge_list(g, path)
    g2 = pio.read_edge_list(path)
    d1, d2 = pn.degrees(g), pn.degrees(g2)
    assert np.array_equal(d1.d, d2.d) and np.array_equal(d1.b, d2.b)
    assert np.array_equal(g.weights, g2.weights)


def test_edge_list_duplicates_summed_and_one_based(tmp_path):
    path = tmp_path / "e.tsv"
    path.write_text("src\tdst\tweight\n1\t2\t3\n1\t2\t4\n2\t1\t1\n")
    g = pio.read_edge_list(path, one_based=True)
    assert g.n == 2
    assert g.weights[0, 1] == 7 and g.weights[1, 0] == 1


def test_report_subcommand(tmp_path):
    edges, attrs = _write_instance(tmp_path)
    out = tmp_path / "fit"
    main([
        "fit", "--edges", str(edges), "--node-attrs", str(attrs),
        "--combinators", "equal:dept", "--out", str(out), "--format", "json",
    ])
    assert not (tmp_path / "fit_nodes.tsv").exists()
    code = main(["report", "--input", str(tmp_path / "fit.json"), "--out", str(tmp_path / "rep")])
    assert code == 0
    assert (tmp_path / "rep_nodes.tsv").exists()
    assert (tmp_path / "rep_covariates.tsv").exists()


def test_simulate_single_rep_no_crash(tmp_path):
    out = tmp_path / "sim"
    code = main([
        "simulate", "--n", "12", "--c", "0", "--reps", "1", "--seed", "3",
        "--pairs", "0:1", "--out", str(out),
    ])
    assert code == 0
    doc = json.loads((tmp_path / "sim.json").read_text())
    cell = doc["cells"][0]
    assert cell["reps"] == 1
    assert cell["pairs"][0]["coverage_pct"] in (0.0, 100.0)


def test_simulate_deterministic_outputs(tmp_path):
    args = [
        "simulate", "--n", "15", "--c", "0.2", "--reps", "4", "--seed", "42",
        "--pairs", "1:2", "--emit-raw",
    ]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    for suffix in [".json", "_contrasts.tsv", "_covariates.tsv", "_raw.tsv"]:
        a = (tmp_path / f"a{suffix}").read_bytes()
        b = (tmp_path / f"b{suffix}").read_bytes()
        assert a == b, suffix


def test_simulate_grid(tmp_path):
    out = tmp_path / "grid"
    code = main([
        "simulate", "--n", "10,12", "--c", "0,0.2", "--reps", "2", "--seed", "1",
        "--pairs", "0:1", "--out", str(out),
    ])
    assert code == 0
    doc = json.loads((tmp_path / "grid.json").read_text())
    assert len(doc["cells"]) == 4
    lines = (tmp_path / "grid_contrasts.tsv").read_text().splitlines()
    assert len(lines) == 1 + 4 * 2  # header + (pair + mu) per cell


def test_node_attrs_wrong_count_exit_1(tmp_path):
    edges, _ = _write_instance(tmp_path, n=8)
    attrs = tmp_path / "short.tsv"
    attrs.write_text("node\tdept\n0\tlegal\n1\ttrading\n")
    code = main([
        "fit", "--edges", str(edges), "--node-attrs", str(attrs),
        "--combinators", "equal:dept", "--out", str(tmp_path / "o"),
    ])
    assert code == 1
