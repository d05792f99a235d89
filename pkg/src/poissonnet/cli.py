"""Command-line interface: fit, simulate, report.

Exit codes: 0 success (fit converged), 1 input or usage error, 2 the fit
did not produce a usable maximizer (non-existence or iteration cap).
All randomness flows from --seed; without the flag a fixed default is
used so repeated runs are reproducible.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import io as _io
from .graph import build_covariates
from .inference import compute_inference
from .kernel import ALPHA_N_BETA_N_ZERO, MU_ZERO_BETA_N_ZERO, REF_NODE_FIRST
from .simulation import SimDesign, resolve_workers, run_study
from .solver import SolverConfig, fit

DEFAULT_SEED = 1729

NORMALIZATION_FLAGS = {
    "mu-beta": MU_ZERO_BETA_N_ZERO,
    "alphan-betan": ALPHA_N_BETA_N_ZERO,
    "ref-first": REF_NODE_FIRST,
}

RULE_ALIASES = {
    "equal": "equal_match",
    "equal_match": "equal_match",
    "absdiff": "abs_diff",
    "abs_diff": "abs_diff",
    "product": "product",
    "l1": "l1_distance",
    "l1_distance": "l1_distance",
}

logger = logging.getLogger("poissonnet")


def _parse_combinators(text: str):
    combos = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if ":" not in item:
            raise ValueError(f"combinator {item!r} must look like rule:column")
        rule, column = item.split(":", 1)
        if rule not in RULE_ALIASES:
            raise ValueError(
                f"unknown combinator rule {rule!r}; expected one of {sorted(RULE_ALIASES)}"
            )
        combos.append((RULE_ALIASES[rule], column))
    return combos


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poissonnet",
        description="Fit and study Poisson models of weighted directed networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a network from an edge list")
    p_fit.add_argument("--edges", required=True, help="edge list TSV (src, dst, weight)")
    p_fit.add_argument("--one-based", action="store_true", help="node ids start at 1")
    p_fit.add_argument("--node-attrs", help="node attribute TSV (first column: node id)")
    p_fit.add_argument(
        "--combinators",
        help="comma list rule:column, rules: equal, absdiff, product, l1",
    )
    p_fit.add_argument("--covariates", help="pairwise covariate TSV (src, dst, z1..zp)")
    p_fit.add_argument(
        "--normalization",
        choices=sorted(NORMALIZATION_FLAGS),
        default="mu-beta",
    )
    p_fit.add_argument("--tol", type=float, default=1e-8, help="score tolerance")
    p_fit.add_argument("--max-iter", type=int, default=100, help="inner iteration cap")
    p_fit.add_argument("--ci-level", type=float, default=0.95)
    p_fit.add_argument("--seed", type=int, default=DEFAULT_SEED,
                       help="accepted for interface uniformity; fitting is deterministic")
    p_fit.add_argument("--no-strict", action="store_true",
                       help="iterate even when a node has a zero degree")
    p_fit.add_argument("--out", required=True, help="output path prefix")
    p_fit.add_argument("--format", choices=["tsv", "json"], default="tsv")

    p_sim = sub.add_parser("simulate", help="run a Monte-Carlo coverage study")
    p_sim.add_argument("--n", default="100", help="comma list of ramp sizes")
    p_sim.add_argument("--c", default="0", help="comma list of ramp slopes")
    p_sim.add_argument("--reps", type=int, default=1000)
    p_sim.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_sim.add_argument("--gamma-true", default="1,1,1", help="true coefficients")
    p_sim.add_argument("--mu-true", type=float, default=None)
    p_sim.add_argument("--ci-level", type=float, default=0.95)
    p_sim.add_argument("--pairs", default=None,
                       help="comma list i:j of contrast pairs (default: built-in grid)")
    p_sim.add_argument("--fix-covariates", action="store_true",
                       help="draw covariates once and reuse them across replications")
    p_sim.add_argument("--emit-raw", action="store_true",
                       help="also dump per-trial estimates")
    p_sim.add_argument("--out", required=True, help="output path prefix")
    p_sim.add_argument("--format", choices=["tsv", "json"], default="tsv")

    p_rep = sub.add_parser("report", help="re-render a saved fit JSON as TSV tables")
    p_rep.add_argument("--input", required=True, help="fit JSON produced by 'fit'")
    p_rep.add_argument("--out", required=True, help="output path prefix")
    return parser


def cmd_fit(args) -> int:
    g = _io.read_edge_list(args.edges, one_based=args.one_based)
    if args.node_attrs and args.covariates:
        raise ValueError("give node attributes or pairwise covariates, not both")
    names = ()
    if args.node_attrs:
        attrs = _io.read_node_attributes(args.node_attrs)
        if attrs.n != g.n:
            raise ValueError(f"{attrs.n} attribute rows for a {g.n}-node graph")
        combos = _parse_combinators(args.combinators or "")
        if not combos:
            raise ValueError("--node-attrs requires --combinators")
        Z = build_covariates(attrs, combos)
        names = tuple(column for _, column in combos)
    elif args.covariates:
        if args.combinators:
            raise ValueError("--combinators applies to node attributes only")
        Z = _io.read_pairwise_covariates(args.covariates, g.n, one_based=args.one_based)
        names = tuple(f"z{k + 1}" for k in range(Z.p))
    else:
        if args.combinators:
            raise ValueError("--combinators requires --node-attrs")
        Z = None

    cfg = SolverConfig(
        tol_theta=args.tol,
        tol_gamma=args.tol,
        max_inner=args.max_iter,
        strict=not args.no_strict,
    )
    result = fit(g, Z, cfg, normalization=NORMALIZATION_FLAGS[args.normalization])

    report = None
    if result.exists:
        report = compute_inference(result, g, Z, ci_level=args.ci_level, names=names)
    doc = _io.fit_report_json(result, report)
    _io.dump_json(doc, f"{args.out}.json")
    if args.format == "tsv" and report is not None:
        _io.write_node_table(report, f"{args.out}_nodes.tsv")
        if report.p:
            _io.write_covariate_table(report, f"{args.out}_covariates.tsv")

    if not result.exists:
        logger.error(
            "MLE does not exist; zero-degree or diverging nodes: %s",
            list(result.flagged_nodes),
        )
        return 2
    if not result.converged:
        logger.error("iteration cap reached before the tolerances were met")
        return 2
    logger.info(
        "converged: %d inner / %d outer iterations, score norms %.3g / %.3g",
        result.inner_iters, result.outer_iters, *result.final_score_norms,
    )
    return 0


def cmd_simulate(args) -> int:
    sizes = [int(v) for v in str(args.n).split(",") if v != ""]
    slopes = [float(v) for v in str(args.c).split(",") if v != ""]
    gamma_true = tuple(float(v) for v in args.gamma_true.split(",") if v != "")
    pairs = None
    if args.pairs:
        pairs = tuple(
            (int(i), int(j))
            for i, j in (item.split(":") for item in args.pairs.split(","))
        )
    if not sizes or not slopes:
        raise ValueError("--n and --c must be non-empty")
    reports = []
    workers = resolve_workers()
    for n in sizes:
        for slope in slopes:
            design = SimDesign(
                n=n,
                slope=slope,
                gamma_true=gamma_true,
                mu_true=args.mu_true,
                reps=args.reps,
                seed=args.seed,
                ci_level=args.ci_level,
                contrast_pairs=pairs,
                fix_covariates=args.fix_covariates,
            )
            logger.info("running cell n=%d slope=%.3g (%d reps, %d workers)",
                        n, slope, args.reps, workers)
            reports.append(run_study(design, workers=workers, emit_raw=args.emit_raw))
    _io.dump_json(_io.simulation_report_json(reports), f"{args.out}.json")
    if args.format == "tsv":
        _io.write_simulation_tables(
            reports, f"{args.out}_contrasts.tsv", f"{args.out}_covariates.tsv"
        )
    if args.emit_raw:
        _io.write_raw_trials(reports, f"{args.out}_raw.tsv")
    return 0


def cmd_report(args) -> int:
    with open(args.input, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if "alpha" not in doc or "alpha_se" not in doc:
        raise ValueError(f"{args.input}: not a fit report with inference data")
    with open(f"{args.out}_nodes.tsv", "w", encoding="utf-8") as fh:
        fh.write("node\td\talpha\talpha_se\tb\tbeta\tbeta_se\n")
        for i in range(doc["n"]):
            fh.write(
                f"{i}\t{doc['out_degrees'][i]}\t{doc['alpha'][i]:.10g}\t"
                f"{doc['alpha_se'][i]:.10g}\t{doc['in_degrees'][i]}\t"
                f"{doc['beta'][i]:.10g}\t{doc['beta_se'][i]:.10g}\n"
            )
    if doc.get("covariates"):
        with open(f"{args.out}_covariates.tsv", "w", encoding="utf-8") as fh:
            fh.write("covariate\tgamma\tgamma_bc\tse\tp_value\n")
            for row in doc["covariates"]:
                fh.write(
                    f"{row['name']}\t{row['gamma']:.10g}\t"
                    f"{row['gamma_bias_corrected']:.10g}\t{row['se']:.10g}\t"
                    f"{row['p_value_bias_corrected']:.10g}\n"
                )
    return 0


def main(argv=None) -> int:
    logging.basicConfig(
        level=logging.INFO, stream=sys.stderr, format="%(levelname)s %(message)s"
    )
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "fit":
            return cmd_fit(args)
        if args.command == "simulate":
            return cmd_simulate(args)
        return cmd_report(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        logger.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
