"""Command-line interface: ``rwre-mle {kappa,simulate,estimate,experiment,bpire-check}``.

Exit codes: 0 success, 2 configuration error, 3 runtime failure (partial outputs
are kept).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import checks
from .env_models import NotTransientRight, classify_regime, make_model, solve_kappa, temkin_benchmark, two_point_benchmark
from .harness.config import ConfigError, load_spec
from .harness.diagnostics import InsufficientData, diagnostics
from .harness.experiment import run_experiment
from .harness.output import emit_boxplot_svg, emit_csv, emit_summary_csv
from .harness.summary import EmptyCell, summarize
from .mle import LeftStepData, estimate
from .moment_est import moment_estimate
from .walk_sim import Walker, default_t_max, dump_trajectory, gen_environment

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

log = logging.getLogger("rwre_mle")


def _add_model_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("environment model")
    g.add_argument("--family", choices=["two_point", "temkin", "beta"], required=True)
    g.add_argument("--p", type=float, help="two_point: weight of a1; temkin: weight of a")
    g.add_argument("--a", type=float, help="temkin support point")
    g.add_argument("--a1", type=float, default=0.4)
    g.add_argument("--a2", type=float, default=0.7)
    g.add_argument("--alpha", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--kappa", type=float, help="solve the known weight p so that the exponent equals this")


def _model_from_args(args):
    try:
        if args.family == "two_point":
            if args.kappa is not None:
                return two_point_benchmark(args.kappa, args.a1, args.a2)
            return make_model("two_point", p=args.p, a1=args.a1, a2=args.a2)
        if args.family == "temkin":
            if args.kappa is not None:
                return temkin_benchmark(args.kappa, 0.4 if args.a is None else args.a)
            return make_model("temkin", a=args.a, p=args.p)
        return make_model("beta", alpha=args.alpha, beta=args.beta)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid model parameters: {exc}") from exc


def cmd_kappa(args) -> int:
    model = _model_from_args(args)
    t0 = time.perf_counter()
    rep = classify_regime(model)
    out = {
        "model": {k: getattr(model, k) for k in model.__dataclass_fields__ if k != "box"},
        "family": model.family,
        "e_log_rho": rep.e_log_rho,
        "e_rho": rep.e_rho,
        "kappa": rep.kappa,
        "regime": rep.regime.value,
        "seconds": time.perf_counter() - t0,
    }
    print(json.dumps(out, indent=2))
    return EXIT_OK


def _t_max(args, model) -> int:
    if args.t_max is not None:
        return args.t_max
    try:
        return default_t_max(args.n, solve_kappa(model))
    except NotTransientRight as exc:
        raise ConfigError("model is not transient to the right; pass --t-max explicitly") from exc


def _simulate(args, model, record=False):
    t_max = _t_max(args, model)
    walker = Walker(gen_environment(model, args.seed), np.random.default_rng(args.walk_seed), t_max, record)
    return walker, walker.advance_to(args.n)


def cmd_simulate(args) -> int:
    model = _model_from_args(args)
    walker, o = _simulate(args, model, record=args.dump_trajectory is not None)
    if args.dump_trajectory:
        dump_trajectory(walker.trajectory(), args.dump_trajectory)
    if args.left_counts_out:
        with open(args.left_counts_out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["site", "left_count"])
            w.writerows([x, int(c)] for x, c in enumerate(o.left_counts))
    out = {
        "n": o.n, "hit": o.hit, "total_steps": o.total_steps, "left_total": o.left_total,
        "min_site": o.min_site, "t_max": walker.t_max,
    }
    if o.n_departed:
        out["v_hat"] = o.n_right_first / o.n_departed
    print(json.dumps(out, indent=2))
    return EXIT_OK


def _read_left_counts(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) != {"site", "left_count"}:
        raise ConfigError(f"{path}: expected columns site,left_count")
    rows.sort(key=lambda r: int(r["site"]))
    sites = [int(r["site"]) for r in rows]
    if sites != list(range(len(sites))):
        raise ConfigError(f"{path}: sites must be 0..n without gaps")
    return np.array([int(r["left_count"]) for r in rows])


def cmd_estimate(args) -> int:
    model = _model_from_args(args)
    if args.left_counts:
        data = LeftStepData.from_counts(_read_left_counts(args.left_counts))
        mom = None
    else:
        if args.n is None:
            raise ConfigError("give --left-counts or --n to simulate a walk")
        _, o = _simulate(args, model)
        if not o.hit:
            print(json.dumps({"censored": True, "total_steps": o.total_steps}))
            return EXIT_OK
        data = LeftStepData.from_outcome(o)
        mom = moment_estimate(o, model) if model.family != "beta" else None
    theta0 = None if args.theta0 is None else np.array(args.theta0)
    res = estimate(data, model, theta0=theta0, level=args.level)
    out = {
        "n": res.n,
        "theta_hat": res.theta_hat.tolist(),
        "criterion_at_hat": res.criterion_at_hat,
        "fisher_hat": res.fisher_hat.tolist(),
        "fisher_hessian_form": res.fisher_hessian.tolist(),
        "ci": res.ci,
        "level": res.level,
        "optimizer_evals": res.optimizer_evals,
        "converged": res.converged,
        "notes": res.notes,
    }
    if mom is not None:
        out["moment_estimate"] = {"theta_hat": mom.theta_hat, "v_hat": mom.v_hat, "clipped": mom.clipped}
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_experiment(args) -> int:
    spec = load_spec(args.spec)
    n_list = None
    if args.n_list:
        try:
            n_list = tuple(int(x) for x in args.n_list.split(","))
        except ValueError as exc:
            raise ConfigError(f"bad --n-list: {exc}") from exc
    try:
        spec = spec.with_overrides(
            seed=args.seed, replicates=args.replicates, n_list=n_list, level=args.level,
            fresh_walk_per_n=True if args.fresh_walk_per_n else None,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    records = run_experiment(spec, threads=args.threads)
    emit_csv(records, out_dir / f"{spec.name}_records.csv")
    log.info("%d records in %.1fs", len(records), time.perf_counter() - t0)
    status = EXIT_OK
    try:
        rows = summarize(records)
        emit_summary_csv(rows, out_dir / f"{spec.name}_summary.csv")
        emit_boxplot_svg(rows, out_dir / f"{spec.name}_boxplot.svg", {spec.name: spec.theta_star.tolist()})
    except EmptyCell as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        report = diagnostics(records, spec).as_dict()
    except InsufficientData as exc:
        report = {"skipped": str(exc)}
    failures = sum(1 for r in records if r.error)
    report["failed_records"] = failures
    (out_dir / f"{spec.name}_diagnostics.json").write_text(json.dumps(report, indent=2) + "\n")
    print(json.dumps(report, indent=2))
    if failures:
        status = EXIT_RUNTIME
    return status


def cmd_bpire_check(args) -> int:
    results = checks.run_battery(seed=args.seed, quick=args.quick)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rwre-mle", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kappa", help="regime and exponent of an environment")
    _add_model_args(p)
    p.set_defaults(func=cmd_kappa)

    for name, func, helptext in (
        ("simulate", cmd_simulate, "run one walk to T_n"),
        ("estimate", cmd_estimate, "estimate the parameter from one walk"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_model_args(p)
        p.add_argument("--n", type=int, required=name == "simulate")
        p.add_argument("--seed", type=int, default=0, help="environment seed")
        p.add_argument("--walk-seed", type=int, default=1)
        p.add_argument("--t-max", type=int)
        if name == "simulate":
            p.add_argument("--dump-trajectory", metavar="CSV")
            p.add_argument("--left-counts-out", metavar="CSV")
        else:
            p.add_argument("--left-counts", metavar="CSV", help="site,left_count file from simulate")
            p.add_argument("--theta0", type=float, nargs="+")
            p.add_argument("--level", type=float, default=0.95)
        p.set_defaults(func=func)

    p = sub.add_parser("experiment", help="Monte Carlo study from a TOML spec")
    p.add_argument("spec")
    p.add_argument("--seed", type=int)
    p.add_argument("--replicates", type=int)
    p.add_argument("--n-list", help="comma-separated, e.g. 100,200,500")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out-dir", default="results")
    p.add_argument("--fresh-walk-per-n", action="store_true")
    p.add_argument("--level", type=float)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("bpire-check", help="walk / branching-chain oracle battery")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quick", action="store_true")
    p.set_defaults(func=cmd_bpire_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
