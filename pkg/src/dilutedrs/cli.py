"""Command-line driver: ``dilutedrs <command> --config PATH [options]``.

Exit codes: 0 success, 2 configuration or argument error, 3 non-convergence,
4 resource cap, 5 oracle disagreement (with ``--strict``) or failed verify.
"""

from __future__ import annotations

import argparse
import math
import sys
import time

import numpy as np

from . import functionals as fx
from . import hardcore as hc
from .config import ExperimentConfig, build_model
from .errors import ArgumentError, DilutedError, NoClosedFormError, ResourceError, UnsupportedError
from .finite import (
    count_approx_solutions,
    exact_gse,
    exact_log_partition,
    mcmc_log_partition,
    sample_instances,
)
from .rde import load_checkpoint, save_checkpoint, solve_population
from .report import Output, ResultRecord, plot_pool, plot_series, plot_trace, regime_string

EXIT_OK, EXIT_CONFIG, EXIT_NOCONV, EXIT_RESOURCE, EXIT_ORACLE = 0, 2, 3, 4, 5


class Ctx:
    def __init__(self, args, command):
        self.args = args
        cfg = ExperimentConfig.load(args.config)
        self.cfg = cfg.with_overrides(seed=args.seed, grid=args.grid)
        self.seed = self.cfg.seed
        self.workers = max(1, args.workers)
        out_dir = args.out or self.cfg.output["dir"]
        self.out = Output(out_dir, command, self.cfg.digest(), self.cfg.to_dict())
        self.plot = args.plot or self.cfg.output["plot"]
        self.t0 = time.time()

    def record(self, quantity, value, err, method, flags=None, **extra):
        value, err = float(value), float(err)
        rec = ResultRecord(self.cfg.experiment, quantity, value, err, method,
                           regime_string(flags or {}), self.out.digest,
                           round(time.time() - self.t0, 3), extra)
        self.out.add(rec)
        print(f"{quantity},{value!r},{err!r},{method}")
        return rec


def _flags(model):
    return model.regime_flags(seed=0)


def _warn_regime(flags):
    if not flags["replica_symmetric_regime"]:
        print("warning: model lies outside the subcritical and high-temperature regimes; "
              "results are reported without uniqueness guarantees", file=sys.stderr)


def _solve(ctx: Ctx, model, flags):
    s = ctx.cfg.solver
    res = solve_population(model, M=s["M"], tol=s["tol"], window=s["window"],
                           max_iter=s["max_iter"], initial=s["initial"], seed=ctx.seed,
                           workers=ctx.workers, damping=s["damping"])
    ctx.out.table("trace", ["iteration", "distance"],
                  [[i + 1, d] for i, d in enumerate(res.distance_trace)])
    ctx.record("iterations", res.iterations_used, 0.0, "population", flags,
               converged=res.converged)
    if ctx.plot:
        plot_trace(ctx.out, res.distance_trace, s["tol"])
        plot_pool(ctx.out, res.population.values, model.space.points)
    return res


def _pool(ctx: Ctx, model, flags):
    """Population from ``--checkpoint`` when given, else a fresh solve."""
    if ctx.args.checkpoint:
        return load_checkpoint(ctx.args.checkpoint, model), True
    res = _solve(ctx, model, flags)
    return res.population, res.converged


def cmd_solve_rde(ctx: Ctx) -> int:
    model = build_model(ctx.cfg.model)
    flags = _flags(model)
    _warn_regime(flags)
    res = _solve(ctx, model, flags)
    path = ctx.args.checkpoint or ctx.out.path("checkpoint.json")
    save_checkpoint(path, res.population, model)
    ctx.out.files.append("checkpoint.json")
    return EXIT_OK if res.converged else EXIT_NOCONV


def _compare(ctx, flags, est, exact, floor):
    diff = est.value - exact
    tol = max(3 * est.std_error, floor)
    ok = abs(diff) <= tol
    ctx.record("discrepancy", diff, tol, "population-vs-closed-form", flags,
               verdict="pass" if ok else "fail")
    return ok


def cmd_free_energy(ctx: Ctx) -> int:
    model = build_model(ctx.cfg.model)
    if model.is_zero_temp:
        raise ArgumentError("free-energy needs finite beta; use the gse command")
    flags = _flags(model)
    _warn_regime(flags)
    pop, converged = _pool(ctx, model, flags)
    est = fx.eval_P_finite(pop, model, ctx.cfg.solver["n_samples"], ctx.seed, ctx.workers)
    ctx.record("free_energy", est.value, est.std_error, "population", flags)
    ok = True
    try:
        exact = fx.closed_form(model, "F")
        ctx.record("free_energy_closed_form", exact, 0.0, "closed_form", flags)
        ok = _compare(ctx, flags, est, exact, 5e-3)
    except NoClosedFormError:
        pass
    if not converged:
        return EXIT_NOCONV
    return EXIT_ORACLE if (ctx.args.strict and not ok) else EXIT_OK


def cmd_gse(ctx: Ctx) -> int:
    model = build_model(ctx.cfg.model, beta=math.inf)
    flags = _flags(model)
    pop, converged = _pool(ctx, model, flags)
    est = fx.eval_P_infty(pop, model, ctx.cfg.solver["n_samples"], ctx.seed, ctx.workers)
    ctx.record("gse", est.value, est.std_error, "population", flags)
    ok = True
    try:
        exact = fx.closed_form(model, "gse")
        ctx.record("gse_closed_form", exact, 0.0, "closed_form", flags)
        ok = _compare(ctx, flags, est, exact, 5e-3)
    except NoClosedFormError:
        pass
    if not converged:
        return EXIT_NOCONV
    return EXIT_ORACLE if (ctx.args.strict and not ok) else EXIT_OK


def cmd_simulate(ctx: Ctx) -> int:
    model = build_model(ctx.cfg.model)
    if model.is_zero_temp:
        raise ArgumentError("simulate needs finite beta")
    o = ctx.cfg.oracle
    flags = _flags(model)
    rows, means, errs = [], [], []
    for N in o["N"]:
        insts = sample_instances(model, N, o["instances"], ctx.seed)
        F, G = [], []
        for k, inst in enumerate(insts):
            try:
                r = exact_log_partition(inst, model.beta, ctx.workers)
                g = exact_gse(inst, ctx.workers).value
            except (ResourceError, UnsupportedError):
                r = mcmc_log_partition(inst, model.beta, sweeps=o["sweeps"],
                                       chains=o["chains"], seed=ctx.seed)
                g = float("nan")
            F.append(r.value)
            G.append(g)
            rows.append([N, k, inst.K, r.value, r.error_bar, r.method, g])
        F = np.asarray(F)
        se = float(F.std(ddof=1) / math.sqrt(F.size)) if F.size > 1 else 0.0
        means.append(float(F.mean()))
        errs.append(se)
        ctx.record(f"F_N{N}", F.mean(), se, "finite", flags)
    ctx.out.table("instances", ["N", "instance", "clauses", "F_N", "error_bar", "method",
                                "gse_N"], rows)
    if ctx.plot:
        plot_series(ctx.out, o["N"], {"mean F_N": means}, "N", "F_N", "finite_size",
                    {"mean F_N": errs})
    return EXIT_OK


def cmd_count(ctx: Ctx) -> int:
    model = build_model(ctx.cfg.model)
    o = ctx.cfg.oracle
    t, eps = float(o["t"]), float(o["epsilon"])
    if not 0 < t < 1:
        raise ArgumentError("count needs a fraction t strictly inside (0, 1)")
    flags = _flags(model)
    rows = []
    for N in o["N"]:
        insts = sample_instances(model, N, o["instances"], ctx.seed)
        vals = []
        for k, inst in enumerate(insts):
            A = count_approx_solutions(inst, t, eps, ctx.workers)
            v = math.log(A) / N if A > 0 else float("-inf")
            vals.append(v)
            rows.append([N, k, inst.K, A, v])
        v = np.asarray(vals)
        pos = v[np.isfinite(v)]
        ctx.record(f"log_count_N{N}", pos.mean() if pos.size else float("nan"),
                   pos.std(ddof=1) / math.sqrt(pos.size) if pos.size > 1 else 0.0,
                   "exhaustive", flags, empty_instances=int((~np.isfinite(v)).sum()))
    ctx.out.table("counts", ["N", "instance", "clauses", "A_N", "log_count_per_site"], rows)
    try:
        pred = fx.legendre_count_closed_form(model, t)
        ctx.record("log_count_prediction", pred, 0.0, "legendre_closed_form", flags)
    except UnsupportedError:
        pass
    return EXIT_OK


def cmd_hardcore(ctx: Ctx) -> int:
    m = ctx.cfg.model
    if m["family"] not in ("hardcore", "hardcore_soft"):
        raise ArgumentError("hardcore command needs family 'hardcore'")
    eta, alpha, grid = float(m.get("eta", 1.0)), float(m["alpha"]), int(m.get("grid", 64))
    s, o = ctx.cfg.solver, ctx.cfg.oracle
    flags = {"subcritical": 2 * alpha <= 1.0}
    digest = hc.hc_digest(eta, alpha, grid)
    if ctx.args.checkpoint:
        pool = hc.load_hc_checkpoint(ctx.args.checkpoint, digest)
        converged = True
    else:
        res = hc.hc_solve(eta, alpha, s["M"], s["tol"], s["window"], s["max_iter"], grid,
                          ctx.seed, ctx.workers)
        pool, converged = res.pool, res.converged
        ctx.out.table("trace", ["iteration", "distance"],
                      [[i + 1, d] for i, d in enumerate(res.distance_trace)])
        hc.save_hc_checkpoint(ctx.out.path("checkpoint.json"), pool, digest)
        ctx.out.files.append("checkpoint.json")
        if ctx.plot:
            plot_trace(ctx.out, res.distance_trace, s["tol"])
    half = pool.half_values()
    ctx.record("half_cdf_min", half.min(), 0.0, "population", flags,
               bound=hc.half_bound(eta))
    est = hc.hc_eval_P(pool, eta, alpha, s["n_samples"], ctx.seed)
    ctx.record("log_volume", est.value, est.std_error, "population", flags)
    model = build_model({"family": "hardcore_soft", "alpha": alpha, "eta": eta, "grid": grid})
    rows = []
    for N in o["N"]:
        vals = []
        for k, inst in enumerate(sample_instances(model, N, o["instances"], ctx.seed)):
            try:
                v, e, meth = hc.hc_tree_dp(inst, eta), 0.0, "tree_dp"
            except UnsupportedError:
                r = hc.hc_volume_mc(inst, eta, o["shots"], ctx.seed)
                v, e, meth = r.value, r.std_error, "volume_mc"
            vals.append(v)
            rows.append([N, k, inst.K, v, e, meth])
        vals = np.asarray(vals)
        ctx.record(f"log_volume_N{N}", vals.mean(),
                   vals.std(ddof=1) / math.sqrt(vals.size) if vals.size > 1 else 0.0,
                   "finite", flags)
    ctx.out.table("volumes", ["N", "instance", "edges", "log_volume", "error_bar", "method"], rows)
    return EXIT_OK if converged else EXIT_NOCONV


def cmd_closed_form(ctx: Ctx) -> int:
    model = build_model(ctx.cfg.model)
    flags = _flags(model)
    got = False
    for quantity, name in (("F", "free_energy_closed_form"), ("gse", "gse_closed_form")):
        if quantity == "F" and model.is_zero_temp:
            continue
        try:
            ctx.record(name, fx.closed_form(model, quantity), 0.0, "closed_form", flags)
            got = True
        except NoClosedFormError:
            pass
    if not got:
        raise NoClosedFormError(f"no closed form for family {ctx.cfg.model['family']!r}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .acceptance import CRITERIA, run_criteria
    only = None
    if args.only:
        only = [int(x) for x in args.only.split(",")]
        bad = [k for k in only if k not in CRITERIA]
        if bad:
            raise ArgumentError(f"unknown criteria {bad}")
    results = run_criteria(only, workers=max(1, args.workers))
    out = Output(args.out or "verify_out", "verify", "-", {"only": only})
    out.table("acceptance", ["criterion", "passed", "seconds", "summary"],
              [[r.number, str(r.passed), round(r.seconds, 2), r.summary] for r in results])
    status = EXIT_OK if all(r.passed for r in results) else EXIT_ORACLE
    out.finish(status)
    return status


COMMANDS = {
    "solve-rde": cmd_solve_rde,
    "free-energy": cmd_free_energy,
    "gse": cmd_gse,
    "simulate": cmd_simulate,
    "count": cmd_count,
    "hardcore": cmd_hardcore,
    "closed-form": cmd_closed_form,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dilutedrs", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out")
        p.add_argument("--checkpoint")
        p.add_argument("--grid", type=int)
        p.add_argument("--plot", action="store_true", help="render figures into OUT/figures")
        p.add_argument("--strict", action="store_true",
                       help="exit 5 when a closed-form comparison fails")
    v = sub.add_parser("verify", help="run the acceptance suite")
    v.add_argument("--only", help="comma-separated criterion numbers")
    v.add_argument("--workers", type=int, default=1)
    v.add_argument("--out")
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.command == "verify":
            return cmd_verify(args)
        ctx = Ctx(args, args.command)
        status = COMMANDS[args.command](ctx)
        ctx.out.finish(status)
        return status
    except DilutedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
