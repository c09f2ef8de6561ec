"""Command-line front end.

Every number written here comes from a library call; this module only wires
stages together and serializes their results.  BLAS runs single-threaded so
that repeated runs are bit-identical whatever the machine's thread settings.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .. import ball, entire, linearized, perturbation
from ..cylinder import calibrate
from ..params import compute_constants, indicial_roots
from . import outputs
from .config import OUT_ENV, ConfigError, RunConfig, load_config

log = logging.getLogger("fraclane")

EXIT_OK, EXIT_NUMERICAL, EXIT_INPUT = 0, 1, 2


# ----------------------------------------------------------------------------
# stages


def constants_record(cfg: RunConfig) -> dict:
    c = compute_constants(cfg.params)
    return {"beta": c.beta, "ds": c.ds, "hardy": c.hardy, "stable": c.stable, "pJL": c.p_jl, "tau0": c.tau0}


def indicial_rows(cfg: RunConfig, modes) -> list:
    consts = compute_constants(cfg.params)
    rows = []
    for m in sorted(set(int(k) for k in modes)):
        rep = indicial_roots(cfg.params, consts, m)
        a, b = rep.roots_at_infinity
        rows.append([m, rep.roots_at_zero[0], rep.roots_at_zero[1],
                     "complex" if rep.complex_at_infinity else "real", a, b])
    return rows


INDICIAL_HEADER = ["mode", "rootZeroPlus", "rootZeroMinus", "rootInfType", "rootInfA", "rootInfB"]


def stage_kernel(cfg: RunConfig, m: int, out: Path | None):
    table = calibrate(cfg.params, m, cfg.grid)
    info = {"mode": m, "h": table.h, "c": table.c, "c_analytic": table.c_analytic, "beta": table.beta,
            "lmax": table.lmax, "calibration_alpha": table.calibration_alpha,
            "validation": {f"{k:.6g}": v for k, v in table.validation.items()}}
    if out is not None:
        table.to_csv(out / f"kernel_m{m}.csv")
        outputs.write_json(out / f"kernel_m{m}.json", info)
    return table, info


def stage_ball(cfg: RunConfig, out: Path):
    op = ball.build_green(cfg.params, cfg.ball_grid)
    start = ball.minimal_branch(op, cfg.branch_start)
    res = ball.continue_branch(op, start, target_sup=cfg.target_sup)
    st = res.states
    outputs.write_columns(out / "branch.csv", {"arcLength": [x.arc_length for x in st],
                                               "lambda": [x.lam for x in st],
                                               "supNorm": [x.sup_norm for x in st]})
    r = cfg.ball_grid.nodes
    outputs.write_columns(out / "ball_profile.csv", {"r": r, "w": st[-1].w})
    info = {"lambda_star": res.lambda_star, "folds": [f[0] for f in res.folds], "states": len(st),
            "final_sup": st[-1].sup_norm, "final_lambda": st[-1].lam,
            "torsion_ratio": op.torsion_ratio, "kappa": op.kappa, "kappa_analytic": op.kappa_analytic}
    blow = None
    if st[-1].sup_norm >= 1e2:
        blow = ball.blow_up_rescale(cfg.params, st[-1], r, cfg.grid)
        info["blow_up"] = blow.metadata
    outputs.write_json(out / "ball.json", info)
    return res, blow


def stage_entire(cfg: RunConfig, table0, out: Path):
    p = cfg.params
    consts = compute_constants(p)
    sol = entire.solve_entire(p, table0, entire.sigmoid_guess(p, consts, cfg.grid), consts, tol=cfg.newton_tol)
    sol = entire.normalize_origin(sol, table0, consts, tol=cfg.newton_tol)
    prof = entire.to_physical(sol)
    outputs.write_columns(out / "entire_profile.csv", {"r": prof.r, "w": prof.w, "rTau0w": prof.scaled})
    H = entire.hamiltonian_boundary(sol, consts)
    outputs.write_columns(out / "entire_cylinder.csv", {"t": sol.grid.nodes, "v": sol.v.values, "H1": H.values})
    asym = entire.verify_asymptotics(sol, consts)
    info = {"fittedLimit": sol.fitted_limit, "fittedDecay": sol.fitted_decay, "residualNorm": sol.residual_norm,
            "iterations": sol.iterations, "indicial": asym,
            "H1_minus_inf": entire.hamiltonian_limit(p, consts), "H1_plus_inf": 0.0}
    outputs.write_json(out / "entire.json", info)
    return sol, H


def stage_linearized(cfg: RunConfig, sol, table0, table1, out: Path):
    consts = compute_constants(cfg.params)
    pot = linearized.build_potential(sol, consts)
    norms = linearized.WeightedNorms(cfg.params)
    rep = linearized.kernel_residuals(sol, pot, table0, table1)
    info = {"kernels": rep.as_dict(), "sigma": norms.sigma}
    for m, table in ((0, table0), (1, table1)):
        op = linearized.assemble(sol, pot, table, consts)
        sv = linearized.singular_report(op)
        info[f"mode{m}"] = {"C_estimate": linearized.stability_constant(op, norms),
                            "needs_orthogonality": op.needs_orthogonality,
                            "sigma_min": sv.sigma_min, "sigma_next": sv.sigma_next,
                            "kernel_overlap": sv.kernel_overlap}
    t, e0, e1 = linearized.kernel_functions(sol)
    outputs.write_columns(out / "linearized_kernels.csv", {"t": t, "z0": e0, "wPrime": e1})
    outputs.write_json(out / "linearized.json", info)
    return pot, norms, info


def stage_perturb(cfg: RunConfig, sol, table0, pot, norms, out: Path):
    spec = cfg.potential_spec
    kw = {} if cfg.rho is None else {"rho": cfg.rho}
    sweep = perturbation.lambda_sweep(cfg.params, table0, sol, pot, spec, cfg.lambdas, norms, **kw)
    cols = ["lambda", "phiStarNorm", "uSupNorm", "iterations", "residual"]
    outputs.write_csv(out / "sweep.csv", cols, [[r[c] for c in cols] for r in sweep.rows])
    for k, row in enumerate(sweep.rows):
        bs = row["state"]
        if bs is None:
            continue
        y = np.geomspace(1e-3, 1e3, 241)
        outputs.write_columns(out / f"bound_state_{k}.csv", {"y": y, "u": bs.u(y, sol)})
    info = {"slope": sweep.slope, "sigma": norms.sigma, "working_range": sweep.working_range,
            "potential": {"family": spec.family, "mu": spec.mu, "amp": spec.amp, "radius": spec.radius},
            "runs": [{k: v for k, v in r.items() if k != "state"} | (
                {"contraction_ratios": r["state"].contraction_ratios, "rho": r["state"].rho,
                 "reconstruction": r["state"].reconstruction} if r["state"] else {}) for r in sweep.rows]}
    outputs.write_json(out / "perturb.json", info)
    return sweep


def _plots(out: Path, **data):
    if "sol" in data:
        sol, H = data["sol"], data["H"]
        prof = entire.to_physical(sol)
        outputs.svg_plot(out / "profile.svg", {"r^tau0 w": (np.log10(prof.r), prof.scaled)},
                         "entire profile", "log10 r", "r^tau0 w")
        outputs.svg_plot(out / "hamiltonian.svg", {"H1": (sol.grid.nodes, H.values)}, "H1 along the cylinder", "t", "H1")
    if "branch" in data:
        st = data["branch"].states
        outputs.svg_plot(out / "branch.svg", {"branch": ([x.lam for x in st], np.log10([x.sup_norm for x in st]))},
                         "ball branch", "lambda", "log10 sup w")
    if "sweep" in data:
        ok = [r for r in data["sweep"].rows if not r["error"]]
        outputs.svg_plot(out / "sweep.svg", {"phi*": (np.log10([r["lambda"] for r in ok]),
                                                      np.log10([r["phiStarNorm"] for r in ok]))},
                         "perturbation sweep", "log10 lambda", "log10 ||phi||_*")


def run_pipeline(cfg: RunConfig) -> int:
    out = _prepare(cfg.out)
    stages = []
    data = {}

    def done(name):
        stages.append(name)
        log.info("stage %s done", name)

    try:
        outputs.write_json(out / "constants.json", constants_record(cfg))
        outputs.write_csv(out / "indicial.csv", INDICIAL_HEADER, indicial_rows(cfg, cfg.modes))
        done("constants")
        t0, _ = stage_kernel(cfg, 0, out)
        t1, _ = stage_kernel(cfg, 1, out)
        done("kernels")
        data["branch"], _ = stage_ball(cfg, out)
        done("branch")
        data["sol"], data["H"] = stage_entire(cfg, t0, out)
        done("entire")
        pot, norms, _ = stage_linearized(cfg, data["sol"], t0, t1, out)
        done("linearized")
        data["sweep"] = stage_perturb(cfg, data["sol"], t0, pot, norms, out)
        done("perturbation")
        if cfg.plots:
            _plots(out, **data)
    except (ArithmeticError, ValueError) as exc:
        # the manifest records the completed prefix before the error propagates
        outputs.write_manifest(out, cfg.as_dict(), stages, "failed", f"{type(exc).__name__}: {exc}")
        raise
    outputs.write_manifest(out, cfg.as_dict(), stages, "complete")
    return EXIT_OK


# ----------------------------------------------------------------------------
# argument handling


def _prepare(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory not writable: {exc}") from exc
    return out


def _parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--n", type=int)
    shared.add_argument("--s", type=float)
    shared.add_argument("--p", type=float)
    shared.add_argument("--config", help="file of key = value lines")
    shared.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./fraclane-out)")
    shared.add_argument("--plots", action="store_true", default=None, help="write SVG plots")
    shared.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key")
    shared.add_argument("-v", "--verbose", action="store_true")
    ap = argparse.ArgumentParser(prog="fraclane", description="Fractional Lane-Emden solvers.")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("constants", parents=[shared], help="print the spectral constants as JSON")
    ind = sub.add_parser("indicial", parents=[shared], help="indicial roots per mode as CSV")
    ind.add_argument("--modes", help="comma-separated modes")
    ker = sub.add_parser("kernel", parents=[shared], help="calibrate one mode and export its kernel")
    ker.add_argument("--mode", type=int)
    sub.add_parser("solve-ball", parents=[shared], help="ball Green operator and solution branch")
    sub.add_parser("solve-entire", parents=[shared], help="entire solution on the cylinder")
    sub.add_parser("linearized", parents=[shared], help="kernel residuals and stability constants")
    sub.add_parser("perturb", parents=[shared], help="bound states along a lambda sweep")
    sub.add_parser("pipeline", parents=[shared], help="run every stage and write a manifest")
    return ap


def _config(args) -> RunConfig:
    over = {"n": args.n, "s": args.s, "p": args.p, "out": args.out, "plots": args.plots}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        over[k.strip()] = v.strip()
    if getattr(args, "modes", None):
        over["modes"] = args.modes
    if getattr(args, "mode", None) is not None:
        over["kernel_mode"] = args.mode
    return load_config(args.config, over)


def _dispatch(args, cfg: RunConfig) -> int:
    cmd = args.command
    if cmd == "constants":
        sys.stdout.write(outputs.dumps(constants_record(cfg)))
        return EXIT_OK
    if cmd == "indicial":
        import csv
        wr = csv.writer(sys.stdout, lineterminator="\n")
        wr.writerow(INDICIAL_HEADER)
        for row in indicial_rows(cfg, cfg.modes):
            wr.writerow([outputs.fmt(x) for x in row])
        return EXIT_OK
    if cmd == "pipeline":
        return run_pipeline(cfg)
    out = _prepare(cfg.out)
    data = {}
    if cmd == "kernel":
        _, info = stage_kernel(cfg, cfg.kernel_mode, out)
        sys.stdout.write(outputs.dumps(info))
        return EXIT_OK
    if cmd == "solve-ball":
        data["branch"], _ = stage_ball(cfg, out)
    else:
        t0, _ = stage_kernel(cfg, 0, None)
        data["sol"], data["H"] = stage_entire(cfg, t0, out)
        if cmd == "linearized":
            t1, _ = stage_kernel(cfg, 1, None)
            stage_linearized(cfg, data["sol"], t0, t1, out)
        elif cmd == "perturb":
            pot = linearized.build_potential(data["sol"])
            data["sweep"] = stage_perturb(cfg, data["sol"], t0, pot, linearized.WeightedNorms(cfg.params), out)
    if cfg.plots:
        _plots(out, **data)
    return EXIT_OK


def main(argv=None) -> int:
    ap = _parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = _config(args)
        with threadpool_limits(limits=1):
            return _dispatch(args, cfg)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ArithmeticError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
