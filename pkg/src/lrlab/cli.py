"""Command-line surface: spectra, schedules, simulation, bounds, ridge runs.

Exit codes: 0 ok, 2 usage, 3 parse error, 4 numeric/infeasible, 5 I/O.
Every output file starts with a comment header recording the exact
invocation and seed.
"""

from __future__ import annotations

import argparse
import shlex
import sys

import numpy as np

from . import bounds as bounds_mod
from . import reporting
from .errors import (
    DegenerateSpectrumError,
    InfeasibleError,
    InvalidParameterError,
    LrLabError,
    ParseError,
)
from .quadsim import (
    QuadraticProblem,
    exact_expected_loss,
    load_problem,
    monte_carlo_expected_loss,
)
from .ridge import (
    UNRESTRICTED,
    build_ridge_schedule,
    fit_closed_form,
    grid_search,
    parse_libsvm,
    run_ridge_sgd,
)
from .schedules import (
    allocate_delta_numeric,
    allocate_delta_sqrt,
    build_constant,
    build_cosine,
    build_cosine_power,
    build_eigencurve,
    build_elastic_step_decay,
    build_exponential,
    build_general_step_decay,
    build_inverse_time,
    build_inverse_time_practical,
    build_step_decay_ge,
    read_schedule_csv,
    write_schedule_csv,
)
from .spectrum import (
    EigenSpectrum,
    PowerLawSpec,
    bucketize,
    parse_esd_file,
    power_law_buckets,
    preprocess,
    sample_power_law,
    write_esd_file,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_NUMERIC = 4
EXIT_IO = 5

RIDGE_GRID_ETA0 = [0.1, 0.06, 0.03, 0.02, 0.01, 0.006, 0.003, 0.002, 0.001, 0.0006, 0.0003, 0.0002, 0.0001]
RIDGE_GRID_ETA_MIN = [0.1, 0.01, 0.001, 0.0001, 0.00001, 0.0, UNRESTRICTED]

COMPARE_FAMILIES = (
    "constant",
    "inverse_time",
    "step_decay_ge",
    "general_step_decay",
    "cosine",
    "cosine_power",
    "elastic_step_decay",
    "eigencurve",
)


def _buckets_from_args(args):
    """Shared spectrum source: an ESD file (optionally preprocessed) or a
    parametric power law."""
    if getattr(args, "esd", None):
        spec = parse_esd_file(args.esd)
        if getattr(args, "wd", None) is not None:
            spec = preprocess(spec, args.wd)
        return bucketize(spec)
    if getattr(args, "powerlaw_alpha", None) is not None:
        pl = PowerLawSpec(alpha=args.powerlaw_alpha, mu=args.powerlaw_mu, L=args.powerlaw_L)
        return power_law_buckets(pl, args.powerlaw_d)
    raise InvalidParameterError("provide a spectrum via --esd or --powerlaw-alpha/--powerlaw-mu/--powerlaw-L/--powerlaw-d")


def _add_powerlaw_args(p):
    p.add_argument("--powerlaw-alpha", type=float, dest="powerlaw_alpha")
    p.add_argument("--powerlaw-mu", type=float, dest="powerlaw_mu", default=1.0)
    p.add_argument("--powerlaw-L", type=float, dest="powerlaw_L")
    p.add_argument("--powerlaw-d", type=float, dest="powerlaw_d", default=1.0)


def _bucket_payload(buckets):
    return {
        "mu": buckets.mu,
        "L": buckets.L,
        "kappa": buckets.kappa,
        "i_max": buckets.i_max,
        "s": buckets.s.tolist(),
        "d": buckets.d,
    }


def cmd_spectrum(args, headers):
    if args.action == "parse":
        spec = parse_esd_file(args.input)
        write_esd_file(spec, args.out, header_lines=headers)
    elif args.action == "preprocess":
        spec = preprocess(parse_esd_file(args.input), args.wd)
        write_esd_file(spec, args.out, header_lines=headers)
    elif args.action == "bucketize":
        buckets = bucketize(parse_esd_file(args.input))
        reporting.write_json(args.out, _bucket_payload(buckets), headers=headers)
    elif args.action == "powerlaw":
        pl = PowerLawSpec(alpha=args.alpha, mu=args.mu, L=args.L)
        if args.sample:
            spec = sample_power_law(pl, args.sample, args.seed)
            write_esd_file(spec, args.out, header_lines=headers)
        else:
            buckets = power_law_buckets(pl, args.d)
            reporting.write_json(args.out, _bucket_payload(buckets), headers=headers)
    return EXIT_OK


def _build_schedule_from_args(args):
    fam = args.family
    T = args.T
    if fam == "constant":
        return build_constant(T, args.eta0)
    if fam == "inverse_time":
        return build_inverse_time(T, args.L, args.mu)
    if fam == "inverse_time_practical":
        return build_inverse_time_practical(T, args.eta0, args.eta_min)
    if fam == "step_decay_ge":
        return build_step_decay_ge(T, args.eta1)
    if fam == "general_step_decay":
        return build_general_step_decay(T, args.eta0, args.num_intervals, args.decay_factor)
    if fam == "cosine":
        return build_cosine(T, args.eta0, args.eta_min)
    if fam == "cosine_power":
        return build_cosine_power(T, args.eta0, args.eta_min, args.alpha_pow)
    if fam == "elastic_step_decay":
        return build_elastic_step_decay(T, args.eta0, args.r)
    if fam == "exponential":
        return build_exponential(T, args.eta0, args.eta_min)
    if fam == "eigencurve":
        buckets = _buckets_from_args(args)
        allocate = allocate_delta_numeric if args.delta == "numeric" else allocate_delta_sqrt
        delta = allocate(buckets, T)
        return build_eigencurve(buckets, T, delta, eta0=args.eta0, beta=args.beta, eta_min=args.eta_min)
    raise InvalidParameterError(f"unknown family {fam!r}")


def cmd_schedule(args, headers):
    sched = _build_schedule_from_args(args)
    write_schedule_csv(sched, args.out, header_lines=headers)
    if args.plot:
        reporting.render_schedules(
            [(sched.kind, sched.materialize())], args.plot, title=f"{sched.kind}, T={sched.T}"
        )
    return EXIT_OK


def cmd_simulate(args, headers):
    problem = load_problem(args.problem)
    sched = read_schedule_csv(args.schedule)
    if args.T is not None and args.T != sched.T:
        raise InvalidParameterError(
            f"--T {args.T} disagrees with the schedule horizon {sched.T}"
        )
    report = exact_expected_loss(problem, sched)
    payload = {
        "schedule_kind": sched.kind,
        "T": sched.T,
        "d": problem.d,
        "sigma": problem.sigma,
        "exact_total": report.total,
        "mc_mean": None,
        "mc_stderr": None,
        "bias_sum": report.bias_sum,
        "var_sum": report.var_sum,
    }
    if args.mode == "mc":
        mean, stderr = monte_carlo_expected_loss(problem, sched, args.trials, args.seed)
        payload["mc_mean"] = mean
        payload["mc_stderr"] = stderr
    reporting.write_json(args.out, payload, headers=headers)
    return EXIT_OK


def _bound_payload(rep):
    return {
        "name": rep.name,
        "bias_bound": rep.bias_bound,
        "variance_bound": rep.variance_bound,
        "total_bound": rep.total_bound,
        "extra_term": rep.extra_term,
    }


def cmd_bounds(args, headers):
    which = args.which
    if which == "table":
        named = []
        for path in args.esd or []:
            spec = parse_esd_file(path)
            if args.wd is not None:
                spec = preprocess(spec, args.wd)
            named.append((str(path), bucketize(spec)))
        if not named:
            raise InvalidParameterError("--which table needs at least one --esd spectrum")
        rows = bounds_mod.extra_term_table(named, args.T)
        reporting.write_csv(
            args.out,
            ["name", "inverse_time", "step_decay", "eigencurve", "minimax"],
            rows,
            headers=headers + ["step_decay column is ln(T); all columns constant-free"],
        )
        return EXIT_OK

    if which in ("prop1", "prop2", "steplower"):
        problem = load_problem(args.problem)
        if which == "prop1":
            payload = {"name": "prop1", "total_bound": bounds_mod.prop1_bound(problem, args.T)}
        elif which == "prop2":
            payload = {"name": "prop2", "total_bound": bounds_mod.prop2_bound(problem, args.T)}
        else:
            ok, value = bounds_mod.step_decay_lower_bound(
                problem.d, problem.sigma, args.T, args.eta1, problem.lambdas, problem.offset0
            )
            payload = {"name": "step_decay_lower", "threshold_ok": ok, "bound_value": value}
        reporting.write_json(args.out, payload, headers=headers)
        return EXIT_OK

    if which == "corollary1":
        pl = PowerLawSpec(alpha=args.powerlaw_alpha, mu=args.powerlaw_mu, L=args.powerlaw_L)
        rep = bounds_mod.corollary1_bound(pl, args.powerlaw_d, args.T, args.f0_gap, args.sigma)
        reporting.write_json(args.out, _bound_payload(rep), headers=headers)
        return EXIT_OK

    if isinstance(args.esd, list):
        if len(args.esd) > 1:
            raise InvalidParameterError(f"--which {which} takes a single --esd spectrum")
        args.esd = args.esd[0] if args.esd else None
    buckets = _buckets_from_args(args)
    if which == "lemma1":
        allocate = allocate_delta_numeric if args.delta == "numeric" else allocate_delta_sqrt
        dlt = allocate(buckets, args.T)
        rep = bounds_mod.lemma1_bound(buckets, dlt, args.T, args.f0_gap, args.sigma)
    else:
        rep = bounds_mod.theorem1_bound(buckets, args.T, args.f0_gap, args.sigma)
    reporting.write_json(args.out, _bound_payload(rep), headers=headers)
    return EXIT_OK


def cmd_compare(args, headers):
    problem = load_problem(args.problem)
    T = args.T
    lam = problem.lambdas
    L, mu = float(lam.max()), float(lam.min())
    buckets = bucketize(EigenSpectrum.from_values(lam))
    f0 = problem.f0_gap
    eta0 = args.eta0 if args.eta0 is not None else 1.0 / L
    eta_min = args.eta_min if args.eta_min is not None else eta0 / 1000.0

    rows = []
    curves = []
    for fam in args.families.split(","):
        fam = fam.strip()
        if fam == "constant":
            sched = build_constant(T, eta0)
        elif fam == "inverse_time":
            sched = build_inverse_time(T, L, mu)
        elif fam == "inverse_time_practical":
            sched = build_inverse_time_practical(T, eta0, eta_min)
        elif fam == "step_decay_ge":
            sched = build_step_decay_ge(T, eta0)
        elif fam == "general_step_decay":
            sched = build_general_step_decay(T, eta0, max(1, min(T, 5)), 2.0)
        elif fam == "cosine":
            sched = build_cosine(T, eta0, eta_min)
        elif fam == "cosine_power":
            sched = build_cosine_power(T, eta0, eta_min, 2.0)
        elif fam == "elastic_step_decay":
            sched = build_elastic_step_decay(T, eta0, 0.5)
        elif fam == "exponential":
            sched = build_exponential(T, eta0, eta_min)
        elif fam == "eigencurve":
            sched = build_eigencurve(buckets, T, allocate_delta_sqrt(buckets, T))
        else:
            raise InvalidParameterError(f"unknown family {fam!r} in --families")
        rep = exact_expected_loss(problem, sched)
        row = {
            "family": fam,
            "T": T,
            "exact_total": rep.total,
            "bias_sum": rep.bias_sum,
            "var_sum": rep.var_sum,
            "lemma1_bound": None,
            "theorem1_bound": None,
        }
        if fam == "eigencurve":
            delta = sched.params.delta
            row["lemma1_bound"] = bounds_mod.lemma1_bound(buckets, delta, T, f0, problem.sigma).total_bound
            row["theorem1_bound"] = bounds_mod.theorem1_bound(buckets, T, f0, problem.sigma).total_bound
        rows.append(row)
        curves.append((fam, sched.materialize()))
    reporting.write_csv(
        args.out,
        ["family", "T", "exact_total", "bias_sum", "var_sum", "lemma1_bound", "theorem1_bound"],
        rows,
        headers=headers,
    )
    if args.plot:
        reporting.render_compare(rows, args.plot)
    if args.plot_curves:
        reporting.render_schedules(curves, args.plot_curves, title=f"schedules, T={T}")
    return EXIT_OK


def _parse_eta_min(text):
    if text is None or text.upper() == "UNRESTRICTED":
        return UNRESTRICTED
    return float(text)


def cmd_ridge(args, headers):
    data = parse_libsvm(args.data)
    model = fit_closed_form(data, args.alpha)
    rows = []
    traj = []
    if args.grid:
        result = grid_search(
            data,
            args.alpha,
            args.family,
            RIDGE_GRID_ETA0,
            RIDGE_GRID_ETA_MIN,
            epochs=args.epochs,
            trials=args.trials,
            batch_size=args.batch_size,
            seed=args.seed,
            model=model,
        )
        for p in result.points:
            rows.append(
                {
                    "family": p.family,
                    "eta0": p.eta0,
                    "eta_min": p.eta_min,
                    "epochs": p.epochs,
                    "mean_gap": p.mean_gap,
                    "std_gap": p.std_gap,
                }
            )
        best = result.best
        print(
            f"best {best.family}: eta0={best.eta0} eta_min={best.eta_min} "
            f"mean_gap={best.mean_gap:.6g} std_gap={best.std_gap:.3g}"
        )
    else:
        if args.eta0 is None:
            raise InvalidParameterError("--eta0 is required unless --grid is given")
        eta_min = _parse_eta_min(args.eta_min)
        iters = 1 if args.batch_size >= data.n else data.n // args.batch_size
        sched = build_ridge_schedule(args.family, args.epochs * iters, args.eta0, eta_min, model=model)
        finals = []
        for k in range(args.trials):
            gaps = run_ridge_sgd(data, model, sched, args.batch_size, args.seed + k)
            traj.append({"family": args.family, "trial": k, "gaps": list(map(float, gaps))})
            finals.append(float(gaps[-1]))
        finals = np.asarray(finals)
        rows.append(
            {
                "family": args.family,
                "eta0": args.eta0,
                "eta_min": eta_min,
                "epochs": args.epochs,
                "mean_gap": float(np.mean(finals)),
                "std_gap": float(np.std(finals, ddof=1)) if len(finals) > 1 else 0.0,
            }
        )
    reporting.write_csv(
        args.out,
        ["family", "eta0", "eta_min", "epochs", "mean_gap", "std_gap"],
        rows,
        headers=headers,
    )
    if args.trajectories and traj:
        reporting.write_json(args.trajectories, traj, headers=headers)
    if args.plot and traj:
        reporting.render_trajectories(
            [(f"{t['family']}#{t['trial']}", t["gaps"]) for t in traj], args.plot
        )
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="lrlab", description=__doc__)
    parser.add_argument("--seed", type=int, default=0, help="base seed recorded in outputs")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("spectrum", help="parse/preprocess/bucketize/synthesize spectra")
    spa = sp.add_subparsers(dest="action", required=True)
    p = spa.add_parser("parse")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p = spa.add_parser("preprocess")
    p.add_argument("input")
    p.add_argument("--wd", type=float, required=True)
    p.add_argument("--out", required=True)
    p = spa.add_parser("bucketize")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p = spa.add_parser("powerlaw")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--L", type=float, required=True)
    p.add_argument("--d", type=float, default=1.0)
    p.add_argument("--sample", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    sc = sub.add_parser("schedule", help="build and export schedules")
    sca = sc.add_subparsers(dest="action", required=True)
    p = sca.add_parser("build")
    p.add_argument(
        "--family",
        required=True,
        choices=[
            "constant",
            "inverse_time",
            "inverse_time_practical",
            "step_decay_ge",
            "general_step_decay",
            "cosine",
            "cosine_power",
            "elastic_step_decay",
            "exponential",
            "eigencurve",
        ],
    )
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--eta0", type=float)
    p.add_argument("--eta-min", type=float, dest="eta_min")
    p.add_argument("--eta1", type=float)
    p.add_argument("--L", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--num-intervals", type=int, dest="num_intervals")
    p.add_argument("--decay-factor", type=float, dest="decay_factor")
    p.add_argument("--r", type=float)
    p.add_argument("--alpha-pow", type=float, dest="alpha_pow")
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--delta", choices=["sqrt", "numeric"], default="sqrt")
    p.add_argument("--esd")
    p.add_argument("--wd", type=float)
    _add_powerlaw_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--plot")

    p = sub.add_parser("simulate", help="evaluate a schedule on a quadratic problem")
    p.add_argument("--problem", required=True)
    p.add_argument("--schedule", required=True)
    p.add_argument("--mode", choices=["exact", "mc"], default="exact")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--T", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("bounds", help="evaluate convergence bounds")
    p.add_argument(
        "--which",
        required=True,
        choices=["lemma1", "theorem1", "corollary1", "prop1", "prop2", "steplower", "table"],
    )
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--f0-gap", type=float, dest="f0_gap", default=0.0)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--eta1", type=float)
    p.add_argument("--problem")
    p.add_argument("--esd", action="append")
    p.add_argument("--wd", type=float)
    p.add_argument("--delta", choices=["sqrt", "numeric"], default="sqrt")
    _add_powerlaw_args(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("ridge", help="ridge-regression scheduler experiments")
    p.add_argument("--data", required=True, help="libsvm-format training file (local path)")
    p.add_argument("--alpha", type=float, default=1e-3)
    p.add_argument("--family", required=True, choices=["constant", "inverse_time", "exponential", "cosine", "eigencurve"])
    p.add_argument("--epochs", type=int, required=True)
    p.add_argument("--eta0", type=float)
    p.add_argument("--eta-min", dest="eta_min", help="float, or UNRESTRICTED")
    p.add_argument("--grid", action="store_true", help="sweep the built-in eta0/eta_min grids")
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--batch-size", type=int, dest="batch_size", default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--trajectories")
    p.add_argument("--plot")

    p = sub.add_parser("compare", help="exact losses of a schedule set on one problem")
    p.add_argument("--problem", required=True)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--families", default=",".join(COMPARE_FAMILIES))
    p.add_argument("--eta0", type=float)
    p.add_argument("--eta-min", type=float, dest="eta_min")
    p.add_argument("--out", required=True)
    p.add_argument("--plot")
    p.add_argument("--plot-curves", dest="plot_curves")
    return parser


_DISPATCH = {
    "spectrum": cmd_spectrum,
    "schedule": cmd_schedule,
    "simulate": cmd_simulate,
    "bounds": cmd_bounds,
    "ridge": cmd_ridge,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    invocation = "lrlab " + " ".join(shlex.quote(a) for a in argv)
    headers = reporting.header_lines(invocation, seed=getattr(args, "seed", None))
    try:
        return _DISPATCH[args.command](args, headers)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (InvalidParameterError, InfeasibleError, DegenerateSpectrumError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except LrLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
