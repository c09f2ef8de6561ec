"""Kernel residuals, stability constants and singular values under refinement.

Usage: python scripts/linearized_report.py [--h 0.1 0.05 0.025]
"""

import argparse
from dataclasses import dataclass

from fraclane import entire, linearized
from fraclane.cylinder import CylinderGrid, calibrate
from fraclane.params import ProblemParams, compute_constants


@dataclass(frozen=True)
class ReportConfig:
    n: int = 3
    s: float = 0.5
    p: float = 3.0
    T: float = 20.0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h", type=float, nargs="+", default=[0.1, 0.05])
    ap.add_argument("--p", type=float, default=ReportConfig.p)
    a = ap.parse_args()
    cfg = ReportConfig(p=a.p)
    params = ProblemParams(cfg.n, cfg.s, cfg.p)
    c = compute_constants(params)
    norms = linearized.WeightedNorms(params)
    print(f"sigma = {norms.sigma:.4g}")
    print(f"{'h':>6} {'z0 res':>10} {'w1 res':>10} {'z0 exp':>8} {'w1 exp':>8} {'C mode0':>10} "
          f"{'C mode1':>10} {'smin0':>9} {'snext0':>9} {'overlap':>8}")
    for h in a.h:
        grid = CylinderGrid(cfg.T, h)
        t0, t1 = calibrate(params, 0, grid), calibrate(params, 1, grid)
        sol = entire.solve_entire(params, t0, entire.sigmoid_guess(params, c, grid), c, tol=1e-10)
        sol = entire.normalize_origin(sol, t0, c, tol=1e-10)
        pot = linearized.build_potential(sol, c)
        rep = linearized.kernel_residuals(sol, pot, t0, t1)
        op0 = linearized.assemble(sol, pot, t0, c)
        op1 = linearized.assemble(sol, pot, t1, c)
        sv = linearized.singular_report(op0)
        print(f"{h:6.3f} {rep.z0_residual:10.3e} {rep.w1_residual:10.3e} {rep.z0_decay_exponent:8.4f} "
              f"{rep.w1_decay_exponent:8.4f} {linearized.stability_constant(op0, norms):10.4g} "
              f"{linearized.stability_constant(op1, norms):10.4g} {sv.sigma_min:9.2e} {sv.sigma_next:9.2e} "
              f"{sv.kernel_overlap:8.5f}")


if __name__ == "__main__":
    main()
