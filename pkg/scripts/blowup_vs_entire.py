"""Compare the rescaled large ball solution with the entire solution.

For each ball mesh the branch is followed to the target sup-norm, rescaled so
that W(0) = 1, and compared with the normalized cylinder solution on
r in [e^-5, e^5].  Both rescaling variants are reported.

Usage: python scripts/blowup_vs_entire.py [--N 200 400 800] [--target 1e3]
"""

import argparse
from dataclasses import dataclass

import numpy as np

from fraclane import ball, entire
from fraclane.cylinder import CylinderGrid, calibrate
from fraclane.params import ProblemParams, compute_constants


@dataclass(frozen=True)
class CompareConfig:
    n: int = 3
    s: float = 0.5
    p: float = 3.0
    T: float = 20.0
    h: float = 0.05
    target: float = 1e3
    r_lo: float = -5.0
    r_hi: float = 5.0


def entire_profile(cfg: CompareConfig):
    params = ProblemParams(cfg.n, cfg.s, cfg.p)
    c = compute_constants(params)
    grid = CylinderGrid(cfg.T, cfg.h)
    table = calibrate(params, 0, grid)
    sol = entire.solve_entire(params, table, entire.sigmoid_guess(params, c, grid), c, tol=1e-10)
    return params, grid, entire.normalize_origin(sol, table, c, tol=1e-10)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, nargs="+", default=[200, 400, 800])
    ap.add_argument("--target", type=float, default=CompareConfig.target)
    a = ap.parse_args()
    cfg = CompareConfig(target=a.target)
    params, grid, sol = entire_profile(cfg)
    r = np.exp(np.linspace(cfg.r_lo, cfg.r_hi, 201))
    we = entire.to_physical(sol, r).w
    print(f"{'N':>5} {'sup-norm':>10} {'lambda':>12} {'gap scaled':>12} {'gap shifted':>12}")
    for N in a.N:
        op = ball.build_green(params, ball.BallGrid(N))
        res = ball.continue_branch(op, ball.minimal_branch(op, 0.05), target_sup=cfg.target)
        last = res.states[-1]
        gaps = []
        for variant in ("scaled", "shifted"):
            prof = ball.blow_up_rescale(params, last, op.nodes, grid, variant=variant)
            gaps.append(np.max(np.abs(prof(r) - we)) / np.max(np.abs(we)))
        print(f"{N:>5} {last.sup_norm:10.4g} {last.lam:12.8f} {gaps[0]:12.4e} {gaps[1]:12.4e}")


if __name__ == "__main__":
    main()
