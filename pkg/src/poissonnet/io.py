"""TSV/JSON ingestion and report serialization.

Edge lists are tab-separated with a ``src	dst	weight`` header and either
0- or 1-based node ids; duplicate (src, dst) rows are summed. Node
attributes are tab-separated with a header row whose first column is the
node id. Pairwise covariates are ``src	dst	z1..zp`` and must cover every
ordered pair exactly once (missing pairs or non-numeric entries are
rejected, never imputed). All numeric output uses a fixed format so that
identical inputs produce byte-identical files.
"""

from __future__ import annotations

import json

import numpy as np

from .graph import (
    CATEGORICAL,
    CONTINUOUS,
    CovariateTensor,
    NodeAttributeTable,
    WeightedDigraph,
)
from .inference import InferenceReport
from .solver import FitResult

__all__ = [
    "read_edge_list",
    "write_edge_list",
    "read_node_attributes",
    "read_pairwise_covariates",
    "fit_report_json",
    "write_node_table",
    "write_covariate_table",
    "simulation_report_json",
    "write_simulation_tables",
    "write_raw_trials",
]

SCHEMA_VERSION = 1


def _fmt(x: float) -> str:
    return f"{float(x):.10g}"


class TsvError(ValueError):
    """Malformed tabular input; the message carries the line number."""


def _rows(path):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            yield lineno, line.split("\t")


def read_edge_list(path, one_based: bool = False) -> WeightedDigraph:
    """Read a weighted edge list; duplicate (src, dst) rows are summed."""
    offset = 1 if one_based else 0
    edges = {}
    max_id = -1
    header_seen = False
    for lineno, parts in _rows(path):
        if not header_seen:
            header_seen = True
            if [p.strip().lower() for p in parts[:3]] != ["src", "dst", "weight"]:
                raise TsvError(f"{path}:{lineno}: expected header 'src\\tdst\\tweight'")
            continue
        if len(parts) != 3:
            raise TsvError(f"{path}:{lineno}: expected 3 columns, got {len(parts)}")
        try:
            src = int(parts[0]) - offset
            dst = int(parts[1]) - offset
            w = int(parts[2])
        except ValueError as exc:
            raise TsvError(f"{path}:{lineno}: non-integer field ({exc})") from None
        if src < 0 or dst < 0:
            raise TsvError(f"{path}:{lineno}: node id below {offset}")
        if w < 0:
            raise TsvError(f"{path}:{lineno}: negative weight")
        if src == dst:
            raise TsvError(f"{path}:{lineno}: self-loop ({src} -> {dst})")
        max_id = max(max_id, src, dst)
        edges[(src, dst)] = edges.get((src, dst), 0) + w
    if not header_seen:
        raise TsvError(f"{path}: empty file")
    n = max_id + 1
    if n < 2:
        raise TsvError(f"{path}: fewer than 2 nodes")
    weights = np.zeros((n, n), dtype=np.int64)
    for (src, dst), w in edges.items():
        weights[src, dst] = w
    return WeightedDigraph(weights)


def write_edge_list(g: WeightedDigraph, path, one_based: bool = False) -> None:
    """Write all positive-weight edges; rereading reproduces the degrees."""
    offset = 1 if one_based else 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("src\tdst\tweight\n")
        src_idx, dst_idx = np.nonzero(g.weights)
        for i, j in zip(src_idx.tolist(), dst_idx.tolist()):
            fh.write(f"{i + offset}\t{j + offset}\t{int(g.weights[i, j])}\n")


def read_node_attributes(path) -> NodeAttributeTable:
    """Read per-node attributes; columns are typed continuous when every
    value parses as a float, categorical otherwise."""
    header = None
    rows = {}
    for lineno, parts in _rows(path):
        if header is None:
            header = parts
            if len(header) < 2:
                raise TsvError(f"{path}:{lineno}: need a node id column plus attributes")
            continue
        if len(parts) != len(header):
            raise TsvError(
                f"{path}:{lineno}: expected {len(header)} columns, got {len(parts)}"
            )
        try:
            node = int(parts[0])
        except ValueError:
            raise TsvError(f"{path}:{lineno}: non-integer node id {parts[0]!r}") from None
        if node in rows:
            raise TsvError(f"{path}:{lineno}: duplicate row for node {node}")
        if any(p.strip() == "" for p in parts[1:]):
            raise TsvError(f"{path}:{lineno}: missing attribute value")
        rows[node] = parts[1:]
    if header is None:
        raise TsvError(f"{path}: empty file")
    ids = sorted(rows)
    lo = ids[0]
    if lo not in (0, 1) or ids != list(range(lo, lo + len(ids))):
        raise TsvError(f"{path}: node ids must be contiguous from 0 or 1")
    names = header[1:]
    columns = {}
    kinds = {}
    for k, name in enumerate(names):
        values = [rows[i][k] for i in ids]
        try:
            columns[name] = tuple(float(v) for v in values)
            kinds[name] = CONTINUOUS
        except ValueError:
            columns[name] = tuple(values)
            kinds[name] = CATEGORICAL
    return NodeAttributeTable(n=len(ids), columns=columns, kinds=kinds)


def read_pairwise_covariates(path, n: int, one_based: bool = False) -> CovariateTensor:
    """Read per-pair covariates; every ordered pair must appear once."""
    offset = 1 if one_based else 0
    header = None
    z = None
    seen = np.zeros((n, n), dtype=bool)
    for lineno, parts in _rows(path):
        if header is None:
            header = parts
            if len(header) < 3 or [p.strip().lower() for p in parts[:2]] != ["src", "dst"]:
                raise TsvError(f"{path}:{lineno}: expected header 'src\\tdst\\tz1..zp'")
            z = np.zeros((n, n, len(header) - 2))
            continue
        if len(parts) != len(header):
            raise TsvError(
                f"{path}:{lineno}: expected {len(header)} columns, got {len(parts)}"
            )
        try:
            src = int(parts[0]) - offset
            dst = int(parts[1]) - offset
            vals = [float(v) for v in parts[2:]]
        except ValueError as exc:
            raise TsvError(f"{path}:{lineno}: bad field ({exc})") from None
        if not (0 <= src < n and 0 <= dst < n) or src == dst:
            raise TsvError(f"{path}:{lineno}: invalid pair ({parts[0]}, {parts[1]})")
        if seen[src, dst]:
            raise TsvError(f"{path}:{lineno}: duplicate pair ({parts[0]}, {parts[1]})")
        if not all(np.isfinite(vals)):
            raise TsvError(f"{path}:{lineno}: non-finite covariate value")
        seen[src, dst] = True
        z[src, dst] = vals
    if header is None:
        raise TsvError(f"{path}: empty file")
    np.fill_diagonal(seen, True)
    missing = int((~seen).sum())
    if missing:
        raise TsvError(f"{path}: {missing} ordered pairs have no covariate row")
    return CovariateTensor(z)


def fit_report_json(result: FitResult, report: InferenceReport | None) -> dict:
    """JSON-serializable summary of a fit and its inference report."""
    state = result.state
    doc = {
        "schema_version": SCHEMA_VERSION,
        "n": state.n,
        "normalization": state.normalization,
        "converged": bool(result.converged),
        "exists": bool(result.exists),
        "inner_iterations": int(result.inner_iters),
        "outer_iterations": int(result.outer_iters),
        "score_norms": {
            "degree": float(result.final_score_norms[0]),
            "covariate": float(result.final_score_norms[1]),
        },
        "flagged_nodes": list(result.flagged_nodes),
        "alpha": [float(v) for v in state.alpha],
        "beta": [float(v) for v in state.beta],
        "mu": float(state.mu),
        "gamma": [float(v) for v in state.gamma],
    }
    if report is not None:
        doc["ci_level"] = report.ci_level
        doc["alpha_se"] = [float(v) for v in report.alpha_se]
        doc["beta_se"] = [float(v) for v in report.beta_se]
        doc["out_degrees"] = [int(v) for v in report.d]
        doc["in_degrees"] = [int(v) for v in report.b]
        if report.mu_se is not None:
            doc["mu_se"] = float(report.mu_se)
            doc["mu_ci"] = [float(report.mu_ci[0]), float(report.mu_ci[1])]
        if report.p:
            doc["covariates"] = [
                {
                    "name": report.names[k],
                    "gamma": float(report.gamma[k]),
                    "gamma_bias_corrected": float(report.gamma_bc[k]),
                    "se": float(report.gamma_se[k]),
                    "ci": [float(report.gamma_ci[k, 0]), float(report.gamma_ci[k, 1])],
                    "ci_bias_corrected": [
                        float(report.gamma_bc_ci[k, 0]),
                        float(report.gamma_bc_ci[k, 1]),
                    ],
                    "p_value": float(report.p_values[k]),
                    "p_value_bias_corrected": float(report.p_values_bc[k]),
                }
                for k in range(report.p)
            ]
    return doc


def write_node_table(report: InferenceReport, path) -> None:
    """Aligned per-node table: node, d, alpha, alpha_se, b, beta, beta_se."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("node\td\talpha\talpha_se\tb\tbeta\tbeta_se\n")
        for i in range(len(report.alpha)):
            fh.write(
                f"{i}\t{int(report.d[i])}\t{_fmt(report.alpha[i])}\t"
                f"{_fmt(report.alpha_se[i])}\t{int(report.b[i])}\t"
                f"{_fmt(report.beta[i])}\t{_fmt(report.beta_se[i])}\n"
            )


def write_covariate_table(report: InferenceReport, path) -> None:
    """Covariate table: name, estimate, bias-corrected, se, p-value."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("covariate\tgamma\tgamma_bc\tse\tp_value\n")
        for k in range(report.p):
            fh.write(
                f"{report.names[k]}\t{_fmt(report.gamma[k])}\t"
                f"{_fmt(report.gamma_bc[k])}\t{_fmt(report.gamma_se[k])}\t"
                f"{_fmt(report.p_values_bc[k])}\n"
            )


def simulation_report_json(reports) -> dict:
    """JSON document for one or more simulation cells."""
    cells = []
    for rep in reports:
        d = rep.design
        cells.append(
            {
                "n": d.n,
                "slope": d.slope,
                "reps": rep.reps,
                "seed": d.seed,
                "ci_level": d.ci_level,
                "nonexistence_pct": rep.nonexistence_pct,
                "failed_trials": list(rep.failed_trials),
                "pairs": [
                    {"i": i, "j": j, "coverage_pct": cov, "mean_ci_length": length}
                    for (i, j, cov, length) in rep.pair_cells
                ],
                "mu": (
                    {"coverage_pct": rep.mu_cell[0], "mean_ci_length": rep.mu_cell[1]}
                    if rep.mu_cell is not None
                    else None
                ),
                "covariates": [
                    {
                        "index": k + 1,
                        "coverage_corrected_pct": bc,
                        "coverage_uncorrected_pct": un,
                        "mean_ci_length": length,
                    }
                    for (k, bc, un, length) in rep.gamma_cells
                ],
            }
        )
    return {"schema_version": SCHEMA_VERSION, "cells": cells}


def write_simulation_tables(reports, contrasts_path, covariates_path) -> None:
    """Two tables per study: node contrasts plus the density cell, and the
    covariate coverage table with corrected and uncorrected columns."""
    with open(contrasts_path, "w", encoding="utf-8") as fh:
        fh.write("n\tslope\tcell\tcoverage_pct\tmean_ci_length\tnonexistence_pct\n")
        for rep in reports:
            d = rep.design
            for (i, j, cov, length) in rep.pair_cells:
                fh.write(
                    f"{d.n}\t{_fmt(d.slope)}\t({i},{j})\t{_fmt(cov)}\t"
                    f"{_fmt(length)}\t{_fmt(rep.nonexistence_pct)}\n"
                )
            if rep.mu_cell is not None:
                fh.write(
                    f"{d.n}\t{_fmt(d.slope)}\tmu\t{_fmt(rep.mu_cell[0])}\t"
                    f"{_fmt(rep.mu_cell[1])}\t{_fmt(rep.nonexistence_pct)}\n"
                )
    with open(covariates_path, "w", encoding="utf-8") as fh:
        fh.write(
            "n\tslope\tcovariate\tcoverage_corrected_pct\t"
            "coverage_uncorrected_pct\tmean_ci_length\tnonexistence_pct\n"
        )
        for rep in reports:
            d = rep.design
            for (k, bc, un, length) in rep.gamma_cells:
                fh.write(
                    f"{d.n}\t{_fmt(d.slope)}\tz{k + 1}\t{_fmt(bc)}\t{_fmt(un)}\t"
                    f"{_fmt(length)}\t{_fmt(rep.nonexistence_pct)}\n"
                )


def write_raw_trials(reports, path) -> None:
    """Per-trial dump for external analysis (one row per replication)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("n\tslope\ttrial\texists\tmu\tmu_se\tgamma\tgamma_bc\tgamma_se\n")
        for rep in reports:
            if rep.raw is None:
                continue
            d = rep.design
            for trial, ok, mu_rec, gamma_rec in rep.raw:
                if not ok:
                    fh.write(f"{d.n}\t{_fmt(d.slope)}\t{trial}\t0\t\t\t\t\t\n")
                    continue
                mu_s = _fmt(mu_rec[0]) if mu_rec else ""
                mu_se_s = _fmt(mu_rec[1]) if mu_rec else ""
                g = ",".join(_fmt(v[0]) for v in gamma_rec)
                gbc = ",".join(_fmt(v[1]) for v in gamma_rec)
                gse = ",".join(_fmt(v[2]) for v in gamma_rec)
                fh.write(
                    f"{d.n}\t{_fmt(d.slope)}\t{trial}\t1\t{mu_s}\t{mu_se_s}\t"
                    f"{g}\t{gbc}\t{gse}\n"
                )


def dump_json(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
