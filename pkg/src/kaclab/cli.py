"""Command-line entry point: ``kaclab <command> [options]``.

Exit codes: 0 success, 1 computational failure, 2 usage error.
Row-level parallelism uses KACLAB_WORKERS processes (default 1).
"""
import argparse
from concurrent.futures import ProcessPoolExecutor
import json
import os
import sys

import numpy as np

from . import __version__
from .charfn import CharFnGrid
from .densities import GeneratingFunction, delta_schedule, eta_mid, eta_window, sigma_sq
from .errors import KacLabError, ParameterDomainError
from .records import stable_hash, stamp_rows, to_csv, to_json

EPILOG = """examples:
  kaclab zn --single-a 0.25 --N-list 4,8,16,32
  kaclab zn --N 2 --delta 0.2 --E 2 --z 0.5,0
  kaclab approx-scan --N-list 32,64,128,256 --out scan.csv --plot
  kaclab gamma --N-list 32,64,128,256 --budget 200000 --format json --out gamma.json
  kaclab validate --budget 10000 --seed 0
  kaclab walk --N 64 --t-end 200 --kernel relative_speed --gamma 1 --out walk.csv
  kaclab fubini-check --N 4 --j 2 --budget 20000

environment:
  KACLAB_WORKERS   number of worker processes for row-level parallelism (default 1)

exit codes: 0 success, 1 computational failure or failed check, 2 usage error
"""


class UsageError(Exception):
    pass


def _int_list(text):
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma separated integer list: {text!r}")
    return vals


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma separated list of numbers: {text!r}")


def _common(p, n_list=True):
    p.add_argument("--d", type=int, default=2, help="dimension (default 2)")
    if n_list:
        g = p.add_mutually_exclusive_group()
        g.add_argument("--N", type=int, help="single particle count")
        g.add_argument("--N-list", type=_int_list, help="comma separated particle counts")
    p.add_argument("--beta", type=float, default=0.5, help="auxiliary exponent (default 0.5)")
    p.add_argument("--eta", type=float, default=None, help="schedule exponent (default: window midpoint)")
    p.add_argument("--delta", type=float, default=None, help="fixed mixture weight instead of the schedule")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=None, help="Monte Carlo / fuzz budget")
    p.add_argument("--grid-rule", choices=["binomial", "bessel"], default="binomial")
    p.add_argument("--grid-nodes", type=int, default=24, help="Gauss nodes per t panel")
    p.add_argument("--grid-t-max", type=float, default=None, help="cap of the t panels")
    p.add_argument("--grid-scan", type=_int_list, default=None, help="scan lattice size n_u,n_v")
    p.add_argument("--out", default=None, help="output file (stdout when omitted)")
    p.add_argument("--format", choices=["csv", "json"], default=None,
                   help="output format (default from --out suffix, else csv)")
    p.add_argument("--plot", nargs="?", const=True, default=None, metavar="PNG",
                   help="also write a figure (default path: --out with .png suffix)")


def build_parser():
    ap = argparse.ArgumentParser(prog="kaclab", description=__doc__.splitlines()[0],
                                 epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--version", action="version", version=f"kaclab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("zn", help="normalisation function table")
    _common(p)
    p.add_argument("--E", type=float, default=None, help="energy (default N)")
    p.add_argument("--z", type=_float_list, default=None, help="momentum vector, comma separated")
    p.add_argument("--single-a", type=float, default=None, help="single Maxwellian M_a instead of the mixture")

    p = sub.add_parser("approx-scan", help="sup error of the Gaussian approximation along the schedule")
    _common(p)
    p.add_argument("--no-l1", action="store_true", help="skip the Fourier-side L1 integrals")

    p = sub.add_parser("entropy", help="H_N / N and its two components")
    _common(p)

    p = sub.add_parser("production", help="entropy production pairing estimates")
    _common(p)
    p.add_argument("--surrogate", action="store_true", help="Gaussian surrogate for the pair weight")

    p = sub.add_parser("gamma", help="scaling study of the Gamma_N witness")
    _common(p)
    p.add_argument("--surrogate", action="store_true")

    p = sub.add_parser("validate", help="inequality fuzz suites")
    _common(p, n_list=False)

    p = sub.add_parser("walk", help="simulate the N-particle collision process")
    _common(p, n_list=False)
    p.add_argument("--N", type=int, default=64)
    p.add_argument("--t-end", type=float, default=100.0)
    p.add_argument("--samples", type=int, default=1000, help="number of recorded times")
    p.add_argument("--init", choices=["single_hot", "uniform", "json"], default="single_hot")
    p.add_argument("--init-file", default=None, help="JSON velocities for --init json")
    p.add_argument("--kernel", choices=["energy_form", "relative_speed"], default=None)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--burn-fraction", type=float, default=0.2)

    p = sub.add_parser("fubini-check", help="two Monte Carlo sides of the sphere Fubini identity")
    _common(p, n_list=False)
    p.add_argument("--N", type=int, default=4)
    p.add_argument("--j", type=int, default=1)
    return ap


# --------------------------------------------------------------------------


def _workers():
    try:
        return max(1, int(os.environ.get("KACLAB_WORKERS", "1")))
    except ValueError:
        return 1


def _pmap(fn, items):
    n = _workers()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def _grid(args):
    return CharFnGrid(rule=args.grid_rule, nodes_per_panel=args.grid_nodes, t_max=args.grid_t_max)


def _N_list(args, default=(32, 64, 128, 256)):
    if getattr(args, "N_list", None) is not None:
        if len(args.N_list) == 0:
            raise UsageError("empty N list")
        return args.N_list
    if getattr(args, "N", None) is not None:
        return [args.N]
    return list(default)


def _resolve_eta(args):
    lo, hi = eta_window(args.beta, args.d)
    eta = eta_mid(args.beta, args.d) if args.eta is None else args.eta
    if not lo < eta < hi:
        raise UsageError(f"eta={eta} outside the admissible window ({lo:.6g}, {hi:.6g}) for beta={args.beta}")
    return eta


def _family(args, N, eta):
    if args.delta is not None:
        return GeneratingFunction(args.d, args.delta)
    return GeneratingFunction(args.d, delta_schedule(N, eta))


def _validate_schedule(args, Ns):
    if args.delta is not None:
        GeneratingFunction(args.d, args.delta)
        return None
    eta = _resolve_eta(args)
    for N in Ns:
        delta_schedule(N, eta)
    return eta


# commands return (rows, summary, ok)


def _zn_row(job):
    args, N = job
    from .charfn import z2_oracle, z_n, z_n_gaussian_closed
    E = float(N) if args.E is None else args.E
    z = np.zeros(args.d) if args.z is None else np.asarray(args.z, dtype=float)
    if z.shape != (args.d,):
        raise UsageError("--z must have d components")
    if args.single_a is not None:
        g = GeneratingFunction.maxwellian(args.d, args.single_a)
    else:
        g = _family(args, N, args._eta)
    r = z_n(g, N, E, z, _grid(args))
    row = {"N": N, "E": E, "z_mod": float(np.linalg.norm(z)), "delta": None if g.is_single else g.delta,
           "log_zn": r.log_zn, "log_prefactor": r.log_prefactor, "hN": r.hN_value,
           "oracle": None, "oracle_delta": None}
    if g.is_single:
        ex = z_n_gaussian_closed(g.single_a, args.d, N, E)
        row.update(oracle="gaussian_closed_form", oracle_delta=abs(r.log_zn - ex) / abs(ex))
    elif N == 2:
        ex = z2_oracle(g, E, z)
        row.update(oracle="z2_quadrature", oracle_delta=abs(np.expm1(r.log_zn - ex)))
    return row


def cmd_zn(args):
    Ns = _N_list(args, default=(8,))
    if args.single_a is None and args.delta is None:
        args._eta = _validate_schedule(args, Ns)
    else:
        args._eta = None
        if args.single_a is not None and not args.single_a > 0:
            raise UsageError("--single-a must be positive")
    rows = _pmap(_zn_row, [(args, N) for N in Ns])
    deltas = [r["oracle_delta"] for r in rows if r["oracle_delta"] is not None]
    summary = {"max_oracle_delta": max(deltas) if deltas else None}
    return rows, summary, True


def _scan_row(job):
    args, N = job
    from .bounds import total_l1_error
    from .charfn import approx_error_scan
    g = _family(args, N, args._eta)
    kw = {}
    if args.grid_scan:
        kw = {"n_u": args.grid_scan[0], "n_v": args.grid_scan[-1]}
    r = approx_error_scan(g, N, _grid(args), **kw)
    row = {"N": N, "delta": g.delta, "sigma": float(np.sqrt(sigma_sq(g))),
           "sup_error": r["sup_error"], "scaled_sup": r["scaled"],
           "argmax_u": r["argmax_u"], "argmax_v": r["argmax_v"]}
    if not args.no_l1:
        t = total_l1_error(g, N, args.beta)
        row.update({"T": t["T"], "scaled_T": t["scaled"], **{f"T_{k}": v for k, v in t["parts"].items()}})
    return row


def _decreasing(x):
    return bool(np.all(np.diff(np.asarray(x, dtype=float)) < 0))


def cmd_approx_scan(args):
    Ns = _N_list(args)
    args._eta = _validate_schedule(args, Ns)
    rows = _pmap(_scan_row, [(args, N) for N in Ns])
    summary = {"eta": args._eta, "beta": args.beta}
    if len(rows) >= 2:
        s = [r["scaled_sup"] for r in rows]
        summary.update({
            "verdict": "decreasing" if _decreasing(s) else "not decreasing",
            "last_over_first": s[-1] / s[0],
            "halved": s[-1] < s[0] / 2,
        })
        if "scaled_T" in rows[0]:
            summary["verdict_T"] = "decreasing" if _decreasing([r["scaled_T"] for r in rows]) else "not decreasing"
    return rows, summary, True


def _entropy_row(job):
    args, N = job
    from .entropy import entropy_limit_components
    g = _family(args, N, args._eta)
    r = entropy_limit_components(g, N, _grid(args))
    r["delta"] = g.delta
    r["log2_gap"] = abs(r["H_over_N_limit"] - r["H_over_N"])
    return r


def cmd_entropy(args):
    Ns = _N_list(args)
    args._eta = _validate_schedule(args, Ns)
    rows = _pmap(_entropy_row, [(args, N) for N in Ns])
    gaps = [r["log2_gap"] for r in rows]
    summary = {"gap_decreasing": _decreasing(gaps) if len(gaps) > 1 else None, "final_gap": gaps[-1]}
    return rows, summary, True


def _production_row(job):
    args, N, seed = job
    from .entropy import ConditionedFamily, entropy_production_DN
    g = _family(args, N, args._eta)
    fam = ConditionedFamily(g, N, _grid(args))
    r = entropy_production_DN(fam, args.budget or 200_000, np.random.default_rng(seed),
                              mode="surrogate" if args.surrogate else "exact")
    r["delta"] = g.delta
    r["shape"] = r["pairing"] / (g.delta * np.log(1 / g.delta))
    return r


def cmd_production(args):
    Ns = _N_list(args)
    args._eta = _validate_schedule(args, Ns)
    seeds = np.random.SeedSequence(args.seed).spawn(len(Ns))
    rows = _pmap(_production_row, [(args, N, s) for N, s in zip(Ns, seeds)])
    shapes = [r["shape"] for r in rows]
    summary = {"shape_max_over_min": max(shapes) / min(shapes) if min(shapes) > 0 else None}
    return rows, summary, True


def cmd_gamma(args):
    from .entropy import rows_as_dicts, scaling_study
    Ns = _N_list(args)
    if args.delta is not None:
        raise UsageError("gamma runs along the schedule; --delta is not accepted")
    eta = _validate_schedule(args, Ns)
    rows, fits = scaling_study(eta, args.beta, Ns, budget=args.budget or 200_000, d=args.d,
                               seed=args.seed, grid=_grid(args),
                               mode="surrogate" if args.surrogate else "exact")
    rows = rows_as_dicts(rows)
    summary = {"eta": eta, **fits}
    good = [r for r in rows if r["status"] == "ok"]
    if len(good) >= 2:
        shapes = [r["production_shape"] for r in good]
        summary.update({
            "slope_within_0.15": abs(fits["slope_gamma"] - fits["target_slope_gamma"]) <= 0.15,
            "final_gap": good[-1]["log2_gap"],
            "final_gap_below_0.15": good[-1]["log2_gap"] < 0.15,
            "gap_decreasing": _decreasing([r["log2_gap"] for r in good]),
            "shape_max_over_min": max(shapes) / min(shapes),
            "gamma_decreasing": _decreasing([r["gamma_upper_witness"] for r in good]),
        })
    ok = all(r["status"] == "ok" for r in rows)
    return rows, summary, ok


def cmd_validate(args):
    from . import bounds
    budget = 10_000 if args.budget is None else args.budget
    if budget == 0:
        return [], {"status": "skipped"}, True
    ss = np.random.SeedSequence(args.seed).spawn(4)
    rows = []
    r = bounds.gaussian_tail_fuzz(budget, np.random.default_rng(ss[0]))
    rows.append({"check": "gaussian_tail", "samples": budget, "violations": len(r["violations"]),
                 "inconclusive": r["inconclusive"], "margin": r["min_rel_margin"],
                 "fitted_constant": None, "status": "pass" if not r["violations"] else "fail",
                 "violating": r["violations"][:5]})
    r = bounds.product_envelope_fuzz(budget, np.random.default_rng(ss[1]), d=args.d, beta=args.beta)
    rows.append({"check": "product_envelope", "samples": budget, "violations": len(r["violations"]),
                 "margin": r["min_rel_margin"], "fitted_constant": None,
                 "status": "pass" if not r["violations"] else "fail", "violating": r["violations"][:5]})
    seed_rt = int(ss[2].generate_state(1)[0])
    for m, dd in ((2, 2), (0, 2), (4, 3)):
        rep = bounds.radial_tail_bound_check(m, dd, n=4000, rng=seed_rt)
        rows.append({"check": f"radial_tail_m{m}_d{dd}", "samples": rep.params["n"], "violations": 0,
                     "margin": None, "fitted_constant": rep.fitted_constant,
                     "asymptotic_constant": rep.params["asymptotic_constant"], "status": rep.status})
    rep = bounds.mixture_contraction_check(args.beta, args.d)
    rows.append({"check": "mixture_contraction", "samples": rep.params["grid_size"], "violations": 0,
                 "margin": rep.margin, "fitted_constant": rep.fitted_constant,
                 "margin_slope": rep.params["margin_slope"], "status": rep.status})
    ok = all(r["status"] == "pass" for r in rows)
    return rows, {"status": "pass" if ok else "fail"}, ok


def cmd_walk(args):
    from .sphere import v1_moment_oracle
    from .walk import initial_state, run, batch_means_se, kernel_bound
    if args.N < 2:
        raise UsageError("--N must be >= 2")
    if args.init == "json" and not args.init_file:
        raise UsageError("--init json needs --init-file")
    rng = np.random.default_rng(args.seed)
    sys_ = initial_state(args.init, args.N, args.d, rng=rng, path=args.init_file)
    if args.kernel is not None:
        kernel_bound(args.gamma, args.kernel, sys_.E0)
    res = run(sys_, args.t_end, ("v1_4", "mean_v4", "energy"), rng, n_samples=args.samples,
              kernel=args.kernel, gamma=args.gamma)
    E0 = sys_.E0
    rows = []
    for k in range(len(res["time"])):
        rows.append({"time": res["time"][k], "v1_4": res["v1_4"][k], "mean_v4": res["mean_v4"][k],
                     "energy_drift": abs(res["energy"][k] - E0) / E0, "acceptance": res["acceptance"][k]})
    de, dz = sys_.drift()
    tail = res["mean_v4"][int(args.burn_fraction * len(res["mean_v4"])):]
    oracle = v1_moment_oracle(args.N, args.d, E0 * 1.0, power=2) if np.allclose(sys_.z0, 0) else None
    summary = {"final_energy_drift": de, "final_momentum_drift": dz,
               "max_energy_drift": float(max(r["energy_drift"] for r in rows)),
               "conservation_ok": bool(de <= 1e-9 and dz <= 1e-9)}
    if len(tail) >= 20:
        m, se = batch_means_se(tail)
        summary.update({"mean_v4": m, "mean_v4_se": se})
        if oracle is not None:
            # both kernels depend only on pair-conserved quantities, so the uniform law stays stationary
            summary.update({"oracle_mean_v4": oracle, "z_score": (m - oracle) / se,
                            "equilibrium_within_3se": abs(m - oracle) <= 3 * se})
    return rows, summary, summary["conservation_ok"]


def cmd_fubini(args):
    from .sphere import BoltzmannSphereSpec, fubini_check
    if not 1 <= args.j <= args.N - 2:
        raise UsageError("need 1 <= j <= N-2")
    spec = BoltzmannSphereSpec(args.N, args.d, float(args.N))
    budget = args.budget or 20_000
    fns = {
        "one": lambda v: 1.0,
        "v1_sq": lambda v: float(v[0] @ v[0]),
        "exp_minus_v1_sq": lambda v: float(np.exp(-(v[0] @ v[0]))),
        "v1_dot_vlast": lambda v: float(v[0] @ v[-1]),
    }
    rows = []
    ss = np.random.SeedSequence(args.seed).spawn(len(fns))
    for (name, fn), s in zip(fns.items(), ss):
        lhs, lse, rhs, rse = fubini_check(fn, spec, args.j, budget, np.random.default_rng(s))
        comb = np.hypot(lse, rse)
        rows.append({"test_fn": name, "N": args.N, "d": args.d, "j": args.j, "lhs": lhs, "lhs_se": lse,
                     "rhs": rhs, "rhs_se": rse, "z_score": (lhs - rhs) / comb if comb > 0 else 0.0,
                     "agree_3se": bool(abs(lhs - rhs) <= 3 * comb + 1e-12)})
    ok = all(r["agree_3se"] for r in rows)
    return rows, {"all_agree": ok}, ok


COMMANDS = {
    "zn": cmd_zn, "approx-scan": cmd_approx_scan, "entropy": cmd_entropy,
    "production": cmd_production, "gamma": cmd_gamma, "validate": cmd_validate,
    "walk": cmd_walk, "fubini-check": cmd_fubini,
}


def _config(args):
    cfg = {k: v for k, v in vars(args).items() if not k.startswith("_") and k not in ("out", "format", "plot")}
    return cfg


def _error(kind, exc, code):
    print(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
    return code


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)  # exits with 2 on usage errors
    cfg = _config(args)
    config_hash = stable_hash(cfg)
    grid_hash = stable_hash(_grid(args).to_json())
    try:
        rows, summary, ok = COMMANDS[args.command](args)
    except (UsageError, ParameterDomainError) as exc:
        return _error("usage", exc, 2)
    except (KacLabError, FloatingPointError, ArithmeticError) as exc:
        return _error("computation", exc, 1)
    rows = stamp_rows(rows, config_hash, grid_hash, args.seed)
    summary = dict(summary or {})
    summary.update({"config_hash": config_hash, "grid_hash": grid_hash, "config": cfg})
    fmt = args.format or ("json" if (args.out or "").endswith(".json") else "csv")
    text = to_json(args.command, rows, summary) if fmt == "json" else to_csv(args.command, rows, summary)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.plot is not None and rows:
        from .plotting import render
        if args.plot is True:
            if not args.out:
                return _error("usage", UsageError("--plot without a path needs --out"), 2)
            path = os.path.splitext(args.out)[0] + ".png"
        else:
            path = args.plot
        render(args.command, rows, summary, path)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
