"""Command line entry point.

Every command writes a ``# config: {...}`` line first, then its result.
Exit status: 0 success, 1 usage error, 2 cap or validation error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from functools import partial

import numpy as np

from . import approx, curves, degree, dihp, fourier, lp
from .csp import (
    Instance,
    brute_force_value,
    dicut_family,
    format_instance,
    instance_value,
    load_instance,
    local_search_value,
    two_sat_family,
)
from .errors import CspError, PassCapExceeded

log = logging.getLogger("csplab")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _frac(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def _seeds(args) -> list[int]:
    return [args.seed + i for i in range(args.seeds)]


def _map_seeds(fn, args):
    """Run ``fn(seed)`` for every seed; rows come back in seed order."""
    seeds = _seeds(args)
    if args.jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(fn, seeds))
    else:
        rows = [fn(s) for s in seeds]
    return rows


def _emit_json_rows(rows, out):
    for row in rows:
        out.write(json.dumps(row, default=str) + "\n")


# ---------------------------------------------------------------------------
# commands


def cmd_value(args, out):
    inst = load_instance(args.instance)
    if args.method == "brute":
        v, tau = brute_force_value(inst)
    elif args.method == "exact":
        v, tau = lp.exact_value(inst)
    else:
        v, tau = local_search_value(inst, args.restarts, args.seed)
    out.write(f"{v}\n")
    log.info("witness %s", "".join(map(str, tau)))


def cmd_lp(args, out):
    sol = lp.solve_basic_lp(load_instance(args.instance))
    if args.json:
        out.write(json.dumps(lp.solution_to_json(sol)) + "\n")
    else:
        out.write(f"{sol.objective_value}\n")


def _round_row(inst: Instance, sol, seed: int) -> dict:
    tau, expect = lp.round_dicut(sol, seed)
    return {"seed": seed, "value": str(instance_value(inst, tau)), "expected": str(expect), "lp": str(sol.objective_value), "assignment": "".join(map(str, tau))}


def cmd_round(args, out):
    inst = load_instance(args.instance)
    sol = lp.solve_basic_lp(inst)
    if not lp.check_half_integral(sol):
        raise CspError("the solver vertex is not half-integral; rounding needs one")
    _emit_json_rows(_map_seeds(partial(_round_row, inst, sol), args), out)


def _approx_row(inst, params, Q, r, c, eps, seed):
    res, run = approx.approx_lp(inst, params, Q, r, seed)
    row = {"seed": seed, "estimate": str(res.estimate), "estimate_float": float(res.estimate), "passes": res.passes, "queries": res.queries, "bits": res.bits}
    if c is not None:
        row["decision"] = int(res.estimate >= approx.threshold(c, eps))
    return row


def _approx_common(args):
    inst = load_instance(args.instance)
    params = degree.BlowupParams(args.B, args.D)
    Q = args.Q if args.Q else approx.queries_for_target(args.eps / 5)
    return inst, params, Q


def cmd_stream_approx(args, out):
    inst, params, Q = _approx_common(args)
    rows = _map_seeds(partial(_approx_row, inst, params, Q, args.r, args.c, args.eps), args)
    _emit_json_rows(rows, out)


def cmd_decide(args, out):
    inst, params, Q = _approx_common(args)
    if not (0 < args.c < 1 and 0 < args.eps < 1):
        raise CspError("need 0 < c < 1 and 0 < eps < 1")
    rows = _map_seeds(partial(_approx_row, inst, params, Q, args.r, args.c, args.eps), args)
    for row in rows:
        out.write(f"seed={row['seed']} passes={row['passes']} bits={row['bits']} output={row['decision']}\n")


def cmd_reduce(args, out):
    inst = load_instance(args.instance)
    params = degree.BlowupParams(args.B, args.D)
    sampled = degree.sample_bounded_instance(inst, params, args.seed)
    text = format_instance(sampled)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        with open(args.out + ".json", "w") as fh:
            fh.write(degree.sidecar(inst, params, args.seed) + "\n")
        out.write(f"wrote {args.out} vars={sampled.num_vars} constraints={sampled.m}\n")
    else:
        out.write(text)


def _gap_graph(path):
    inst = load_instance(path)
    sol = lp.solve_basic_lp(inst)
    return inst, dihp.build_gap_graph(inst, sol)


def cmd_dihp_build(args, out):
    inst, G = _gap_graph(args.instance)
    payload = {
        "N": G.N,
        "lp_value": str(G.lp_value),
        "edges": [list(e) for e in G.edges],
        "predicates": [inst.family.names[p] for p in G.preds],
        "q_maps": [list(q.cum) for q in G.q_maps],
        "p_star": [str(p) for p in G.p_star],
        "mu": [[[list(a), str(w)] for a, w in mu.pmf] for mu in G.mu],
        "one_wise": [dihp.check_one_wise_independent(mu) for mu in G.mu],
    }
    if args.eps is not None:
        payload["certified_K"] = dihp.certified_K(args.alpha, args.eps, G.N, inst.k, G.num_pre_vertices, inst.q)
    out.write(json.dumps(payload) + "\n")


def _dihp_params(args) -> dihp.DihpParams:
    return dihp.DihpParams(args.n, args.alpha, args.K, args.seed)


def cmd_dihp_sample(args, out):
    inst, G = _gap_graph(args.instance)
    params = _dihp_params(args)
    if args.case == "yes":
        x, Y = dihp.sample_yes(G, params, args.seed)
        hidden = [int(a) for a in x]
    else:
        Y, hidden = dihp.sample_no(G, params, args.seed), None
    reduced = dihp.reduce_to_instance(Y, G, params)
    payload = {"case": args.case, "hidden": hidden, "players": dihp.joint_input_to_json(Y, G, params), "reduced_constraints": reduced.m}
    out.write(json.dumps(payload) + "\n")
    if args.out_instance:
        with open(args.out_instance, "w") as fh:
            fh.write(format_instance(reduced))


def _experiment_rows(G, params, eps, c, s, seed):
    rows = []
    for case, thr in (("yes", c - eps), ("no", s)):
        rows.append(dihp.run_sample(G, params, case, seed, thr).csv())
    return rows


def cmd_dihp_experiment(args, out):
    inst, G = _gap_graph(args.instance)
    params = _dihp_params(args)
    c = G.lp_value
    s, _ = brute_force_value(inst)
    rows = _map_seeds(partial(_experiment_rows, G, params, args.eps, c, s), args)
    out.write(dihp.CSV_HEADER + "\n")
    yes_ok = no_ok = total = 0
    for pair in rows:
        for line in pair:
            out.write(line + "\n")
        yes = pair[0].split(",")
        no = pair[1].split(",")
        yes_ok += Fraction(yes[2]) >= c - args.eps
        no_ok += Fraction(no[3]) <= s + args.eps
        total += 1
    log.info("c=%s s=%s completeness %d/%d soundness %d/%d", c, s, yes_ok, total, no_ok, total)


def cmd_curve(args, out):
    steps = args.grid
    if args.family in curves.CLOSED_FORMS and not args.empirical:
        out.write("c,theta\n")
        for p in curves.closed_curve(args.family, steps):
            out.write(f"{p.c},{p.theta}\n")
        return
    if args.family == "file":
        if not args.instance:
            raise UsageError("--family file needs --instance")
        family, name = load_instance(args.instance).family, None
    else:
        family, name = {"dicut": dicut_family(), "2sat": two_sat_family()}[args.family], args.family
    out.write("c,lb,ub\n")
    for c in curves.grid(steps):
        p = curves.empirical_theta_upper(family, c, args.budget, args.seed, name)
        out.write(f"{p.c},{p.lb},{p.ub}\n")


def cmd_fourier_check(args, out):
    n, k, m, N = args.n, args.k, args.m, args.N
    mu = dihp.OneWiseDistribution.diagonal(N, k) if args.mu == "diagonal" else dihp.OneWiseDistribution.uniform(N, k)
    if args.check == "psi":
        bad = [
            (nn, mm, d)
            for nn in range(1, n + 1)
            for mm in range(nn + 1)
            for d in range(mm + 1)
            if fourier.psi_prob(nn, mm, d, k) != fourier.containment_frequency(nn, k, mm, d)
        ]
        rep = fourier.Report("psi", {"n_max": n, "k": k}, True, not bad, 0.0 if not bad else 1.0, {"mismatches": bad})
    elif args.check == "orthonormal":
        rep = fourier.check_orthonormal(n, k, m, N, args.max_d)
    elif args.check == "kernel":
        P, X, omega = fourier.kernel_matrix(n, k, m, mu)
        err = fourier.row_sum_error(P)
        rep = fourier.Report("kernel_rows", {"n": n, "k": k, "m": m, "N": N}, True, err <= 1e-12, err)
    elif args.check == "svd":
        rng = np.random.default_rng(args.seed)
        bs = [tuple(int(a) for a in rng.integers(N, size=k * n)) for _ in range(args.count)]
        rep = fourier.svd_structure_check(n, k, m, mu, bs)
    else:
        size = len(fourier.enumerate_omega(n, k, m, N))
        count = max(1, int(size * args.density))
        A = np.random.default_rng(args.seed).choice(size, count, replace=False)
        rep = fourier.fourier_decay_check(n, k, m, mu, A)
    out.write(json.dumps(rep.to_json(), default=str) + "\n")


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="csplab", description="Streaming Max-CSP approximation and hard-instance tools")
    p.add_argument("-v", "--verbose", action="store_true", help="log to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def seeded(sp, seeds=False):
        sp.add_argument("--seed", type=int, default=0)
        if seeds:
            sp.add_argument("--seeds", type=int, default=1, help="run seeds seed, seed+1, ...")
            sp.add_argument("--jobs", type=int, default=1)

    sp = sub.add_parser("value", help="exact or heuristic optimum")
    sp.add_argument("--instance", required=True)
    sp.add_argument("--method", choices=["brute", "exact", "local"], default="brute")
    sp.add_argument("--restarts", type=int, default=16)
    seeded(sp)
    sp.set_defaults(func=cmd_value)

    sp = sub.add_parser("lp", help="exact BasicLP value")
    sp.add_argument("--instance", required=True)
    sp.add_argument("--json", action="store_true", help="print the full solution")
    sp.set_defaults(func=cmd_lp)

    sp = sub.add_parser("round", help="independent rounding of the LP optimum")
    sp.add_argument("--instance", required=True)
    seeded(sp, seeds=True)
    sp.set_defaults(func=cmd_round)

    for name, func in (("stream-approx", cmd_stream_approx), ("decide", cmd_decide)):
        sp = sub.add_parser(name, help="ApproxLP over a simulated stream" if name == "stream-approx" else "gap decision")
        sp.add_argument("--instance", required=True)
        sp.add_argument("--c", type=_frac, default=None if name == "stream-approx" else Fraction(1, 2))
        sp.add_argument("--eps", type=_frac, default=Fraction(1, 10))
        sp.add_argument("--B", type=int, default=8)
        sp.add_argument("--D", type=int, default=8)
        sp.add_argument("--Q", type=int, default=0, help="samples; 0 derives Q from eps")
        sp.add_argument("--r", type=int, default=2)
        seeded(sp, seeds=True)
        sp.set_defaults(func=func)

    sp = sub.add_parser("reduce", help="sample a bounded-degree instance")
    sp.add_argument("--instance", required=True)
    sp.add_argument("--B", type=int, default=8)
    sp.add_argument("--D", type=int, default=8)
    sp.add_argument("--out")
    seeded(sp)
    sp.set_defaults(func=cmd_reduce)

    sp = sub.add_parser("dihp-build", help="gap graph from the LP optimum")
    sp.add_argument("--instance", required=True)
    sp.add_argument("--alpha", type=_frac, default=Fraction(1, 6))
    sp.add_argument("--eps", type=_frac, default=None, help="also report the certified K")
    sp.set_defaults(func=cmd_dihp_build)

    for name, func in (("dihp-sample", cmd_dihp_sample), ("dihp-experiment", cmd_dihp_experiment)):
        sp = sub.add_parser(name)
        sp.add_argument("--instance", required=True)
        sp.add_argument("--n", type=int, default=6)
        sp.add_argument("--alpha", type=_frac, default=Fraction(1, 6))
        sp.add_argument("--K", type=int, default=8)
        if name == "dihp-sample":
            sp.add_argument("--case", choices=["yes", "no"], default="yes")
            sp.add_argument("--out-instance")
            seeded(sp)
        else:
            sp.add_argument("--eps", type=_frac, default=Fraction(1, 10))
            seeded(sp, seeds=True)
        sp.set_defaults(func=func)

    sp = sub.add_parser("curve", help="threshold curve as CSV")
    sp.add_argument("--family", choices=["dicut", "2sat", "file"], required=True)
    sp.add_argument("--instance", help="instance whose family is used with --family file")
    sp.add_argument("--grid", type=int, default=64)
    sp.add_argument("--empirical", action="store_true", help="search instead of the closed form")
    sp.add_argument("--budget", type=int, default=50)
    seeded(sp)
    sp.set_defaults(func=cmd_curve)

    sp = sub.add_parser("fourier-check", help="exhaustive checks on tiny universes")
    sp.add_argument("--check", choices=["psi", "orthonormal", "kernel", "svd", "decay"], required=True)
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--m", type=int, default=1)
    sp.add_argument("--N", type=int, default=2)
    sp.add_argument("--max-d", type=int, default=1)
    sp.add_argument("--mu", choices=["diagonal", "uniform"], default="diagonal")
    sp.add_argument("--count", type=int, default=10, help="characters for the svd check")
    sp.add_argument("--density", type=float, default=0.5, help="|A|/|Omega| for the decay check")
    seeded(sp)
    sp.set_defaults(func=cmd_fourier_check)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"csplab: error: {exc}\n")
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr, format="%(message)s")
    config = {k: v for k, v in vars(args).items() if k != "func"}
    out = sys.stdout
    out.write("# config: " + json.dumps({"argv": argv, **config}, default=str) + "\n")
    try:
        args.func(args, out)
    except UsageError as exc:
        sys.stderr.write(f"csplab: error: {exc}\n")
        return 1
    except (CspError, PassCapExceeded, OSError) as exc:
        sys.stderr.write(f"csplab: {type(exc).__name__}: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
