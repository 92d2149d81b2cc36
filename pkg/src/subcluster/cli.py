"""Command-line front end.

Subcommands: generate, poly, preprocess, query, approxk, eval, exact-check,
scaling-probe.  Outputs are UTF-8 CSV with '#' comment headers.  Exit codes:
0 success, 2 usage, 3 data error, 4 numeric/validation failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .chebpoly import PolyParams, build_walk_polynomial
from .clustercount import ApproxKConfig, approx_k
from .errors import (
    ArtifactFormatError,
    CapacityError,
    ConfigError,
    GraphFormatError,
    NumericError,
    PolynomialBoundError,
    PreprocessingFailure,
    WrongGraphError,
)
from .evaluate import probe_csv, run_eval, run_scaling_probe
from .graph import (
    GeneratorConfig,
    generate_clusterable,
    load_graph,
    load_labels,
    save_graph,
    save_labels,
)
from .preprocess import PreprocessConfig, load_artifact, preprocessing, query_many, save_artifact
from .spectral import (
    b_delta,
    build_reference,
    cluster_mean_checks,
    default_delta,
    eigengap_checks,
    walk_norm_bound,
)

_DATA_ERRORS = (GraphFormatError, ArtifactFormatError, WrongGraphError, FileNotFoundError)
_NUMERIC_ERRORS = (PolynomialBoundError, NumericError, PreprocessingFailure, CapacityError, ConfigError)


def _add_pipeline_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--khat", type=int, required=True, help="cluster-count estimate")
    sub.add_argument("--phi", type=float, required=True)
    sub.add_argument("--eps", type=float, required=True)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--walks-scale", type=float, default=8.0)
    sub.add_argument("--delta-exp", type=float, default=0.5)
    sub.add_argument("--j", type=int, default=25)
    sub.add_argument("--max-leaves", type=int, default=None)
    sub.add_argument("--tmin", type=int, default=None, help="walk length override")
    sub.add_argument("--tdelta", type=int, default=0)
    sub.add_argument("--chebyshev", action="store_true", help="use the full expansion weights")
    sub.add_argument("--vote-fraction", type=float, default=0.3)
    sub.add_argument("--samples-scale", type=float, default=4.0)
    sub.add_argument("--fresh", action="store_true", help="fresh walk randomness instead of tables")


def _pipeline_config(args) -> PreprocessConfig:
    return PreprocessConfig(
        k_hat=args.khat, phi=args.phi, eps=args.eps, seed=args.seed,
        sample_multiplier=args.samples_scale, walks_scale=args.walks_scale,
        delta_exp=args.delta_exp, j_votes=args.j, t_min=args.tmin,
        t_delta=args.tdelta, chebyshev=args.chebyshev, max_leaves=args.max_leaves,
        vote_fraction=args.vote_fraction, fresh_randomness=args.fresh,
    )


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="subcluster", description=__doc__)
    ap.add_argument("--threads", type=int, default=1)
    sub = ap.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="synthesize a clusterable instance")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--k", type=int, required=True)
    gen.add_argument("--d", type=int, required=True)
    gen.add_argument("--cross", type=float, default=0.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="graph file path")
    gen.add_argument("--labels", required=True, help="labels file path")

    poly = sub.add_parser("poly", help="build walk-weight polynomial, emit t,c_t CSV")
    poly.add_argument("--n", type=int, required=True)
    poly.add_argument("--phi", type=float, required=True)
    poly.add_argument("--eps", type=float, required=True)
    poly.add_argument("--grid", type=int, default=2000)
    poly.add_argument("--no-validate", action="store_true")
    poly.add_argument("--out", default="-")

    pre = sub.add_parser("preprocess", help="build and save an oracle artifact")
    pre.add_argument("--graph", required=True)
    _add_pipeline_flags(pre)
    pre.add_argument("--out", required=True)

    qry = sub.add_parser("query", help="label vertices with a saved oracle")
    qry.add_argument("--oracle", required=True)
    qry.add_argument("--graph", required=True)
    group = qry.add_mutually_exclusive_group(required=True)
    group.add_argument("--vertex", type=int)
    group.add_argument("--batch", help="file with one vertex id per line")
    qry.add_argument("--out", default="-")

    apx = sub.add_parser("approxk", help="estimate the cluster count")
    apx.add_argument("--graph", required=True)
    _add_pipeline_flags(apx)
    apx.add_argument("--precision", type=float, default=0.5, help="target multiplicative error")
    apx.add_argument("--samples", type=int, default=None)
    apx.add_argument("--boost", type=int, default=None)

    ev = sub.add_parser("eval", help="full pipeline over seeds, CSV report")
    ev.add_argument("--n", type=int, required=True)
    ev.add_argument("--k", type=int, required=True)
    ev.add_argument("--d", type=int, required=True)
    ev.add_argument("--cross", type=float, default=0.0)
    _add_pipeline_flags(ev)
    ev.add_argument("--seeds", type=int, nargs="+", default=[0])
    ev.add_argument("--timings", action="store_true")
    ev.add_argument("--out", default="-")

    chk = sub.add_parser("exact-check", help="dense reference invariant report")
    chk.add_argument("--graph", required=True)
    chk.add_argument("--labels", required=True)
    chk.add_argument("--phi", type=float, default=None, help="report-only target")
    chk.add_argument("--eps", type=float, default=None, help="report-only target")
    chk.add_argument("--out", default="-")

    prb = sub.add_parser("scaling-probe", help="cost scaling across cluster counts")
    prb.add_argument("--n", type=int, default=4096)
    prb.add_argument("--ks", type=int, nargs="+", default=[2, 4, 8, 16])
    prb.add_argument("--d", type=int, default=10)
    _add_pipeline_flags(prb)
    prb.add_argument("--delta-exps", type=float, nargs="+", default=[0.5])
    prb.add_argument("--out", default="-")
    return ap


def _write(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _cmd_generate(args) -> None:
    g, truth = generate_clusterable(
        GeneratorConfig(args.n, args.k, args.d, args.cross, args.seed)
    )
    save_graph(g, args.out)
    save_labels(truth, args.labels)
    print(f"# wrote {args.out} ({g.n} vertices, degree bound {g.d}) and {args.labels}")


def _cmd_poly(args) -> None:
    params = PolyParams(args.n, args.phi, args.eps)
    wp = build_walk_polynomial(params, grid_points=args.grid, validate=not args.no_validate)
    meta = wp.meta or {}
    lines = [
        f"# poly n={args.n} phi={args.phi} eps={args.eps} t={params.t} d_q={params.d_q}",
        f"# max_abs_p_low={meta.get('max_abs_p_low'):.6e} low_bound={meta.get('low_bound'):.6e}",
        f"# max_abs_p_minus_1_flat={meta.get('max_abs_p_minus_1_flat'):.6e} "
        f"flat_bound={meta.get('flat_bound'):.6e}",
        f"# worst_cross_rel={meta.get('worst_cross_rel'):.3e} p_at_1={meta.get('p_at_1'):.12f}",
        "t,c_t",
    ]
    for i, t in enumerate(wp.lengths()):
        if wp.exact is not None:
            import gmpy2

            with gmpy2.context(precision=128):
                lines.append(f"{t},{wp.exact[i]:.18e}")
        else:
            lines.append(f"{t},{wp.coeffs[t]!r}")
    _write(args.out, "\n".join(lines) + "\n")


def _cmd_preprocess(args) -> None:
    g = load_graph(args.graph)
    artifact = preprocessing(g, _pipeline_config(args))
    save_artifact(artifact, args.out)
    diag = " ".join(f"{k}={v}" for k, v in artifact.diagnostics.items())
    print(f"# wrote {args.out}; {diag}")


def _cmd_query(args) -> None:
    g = load_graph(args.graph)
    artifact = load_artifact(args.oracle)
    if args.vertex is not None:
        xs = [args.vertex]
    else:
        with open(args.batch, encoding="utf-8") as fh:
            xs = [int(line) for line in fh if line.strip()]
    labels = query_many(g, artifact, xs)
    lines = ["vertex,label"] + [f"{x},{int(lab)}" for x, lab in zip(xs, labels)]
    _write(args.out, "\n".join(lines) + "\n")


def _cmd_approxk(args) -> None:
    g = load_graph(args.graph)
    cfg = ApproxKConfig(
        _pipeline_config(args), eps_apx=args.precision,
        samples=args.samples, boost_override=args.boost, seed=args.seed,
    )
    res = approx_k(g, cfg)
    print("estimate_k_over_n,estimate_k,L,T")
    print(f"{res.k_over_n:.8f},{res.k_estimate:.4f},{res.samples},{res.boost}")


def _cmd_eval(args) -> None:
    gen = GeneratorConfig(args.n, args.k, args.d, args.cross, 0)
    report = run_eval(gen, _pipeline_config(args), args.seeds, threads=args.threads)
    _write(args.out, report.to_csv(timings=args.timings))


def _cmd_exact_check(args) -> None:
    g = load_graph(args.graph)
    truth = load_labels(args.labels)
    ref = build_reference(g, truth)
    eps_meas = ref.measured_eps()
    phi_est = ref.cluster_cheeger_phi()
    rows = cluster_mean_checks(ref) + eigengap_checks(ref) + [walk_norm_bound(ref)]
    delta = default_delta(max(eps_meas, 1e-12), phi_est)
    rep = b_delta(ref, delta)
    lines = [
        f"# exact-check eps_measured={eps_meas:.6g} phi_cheeger={phi_est:.6g}"
        + (f" eps_target={args.eps}" if args.eps is not None else "")
        + (f" phi_target={args.phi}" if args.phi is not None else ""),
        "check,measured,bound,pass",
    ]
    for row in rows:
        lines.append(f"{row.name},{row.measured:.6e},{row.bound:.6e},{int(row.passed)}")
    lines.append(f"b_delta_size,{rep.size},{rep.bound:.6e},{int(rep.size <= rep.bound)}")
    _write(args.out, "\n".join(lines) + "\n")


def _cmd_scaling_probe(args) -> None:
    rows = run_scaling_probe(
        args.n, args.ks, args.d, _pipeline_config(args),
        delta_exps=args.delta_exps, seed=args.seed,
    )
    _write(args.out, probe_csv(rows))


_COMMANDS = {
    "generate": _cmd_generate,
    "poly": _cmd_poly,
    "preprocess": _cmd_preprocess,
    "query": _cmd_query,
    "approxk": _cmd_approxk,
    "eval": _cmd_eval,
    "exact-check": _cmd_exact_check,
    "scaling-probe": _cmd_scaling_probe,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except _NUMERIC_ERRORS as exc:
        print(f"numeric/validation error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
