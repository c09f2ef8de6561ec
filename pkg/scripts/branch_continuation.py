"""Follow the ball branch to large sup-norm and list every turning point.

Usage: python scripts/branch_continuation.py [--N 400] [--target 1e3] [--out DIR]
"""

import argparse
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from fraclane import ball
from fraclane.io import outputs
from fraclane.params import ProblemParams


@dataclass(frozen=True)
class BranchConfig:
    n: int = 3
    s: float = 0.5
    p: float = 3.0
    N: int = 400
    start: float = 0.05
    target: float = 1e3


def run(cfg: BranchConfig):
    params = ProblemParams(cfg.n, cfg.s, cfg.p)
    op = ball.build_green(params, ball.BallGrid(cfg.N))
    res = ball.continue_branch(op, ball.minimal_branch(op, cfg.start), target_sup=cfg.target)
    return op, res


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=BranchConfig.N)
    ap.add_argument("--target", type=float, default=BranchConfig.target)
    ap.add_argument("--p", type=float, default=BranchConfig.p)
    ap.add_argument("--out")
    a = ap.parse_args()
    cfg = BranchConfig(p=a.p, N=a.N, target=a.target)
    op, res = run(cfg)
    print(f"torsion ratio (quadrature / closed form): {op.torsion_ratio:.12f}")
    print(f"states: {len(res.states)}, final sup-norm {res.states[-1].sup_norm:.4g}")
    print(f"{'fold':>4} {'lambda':>14} {'sup-norm':>12}")
    for k, (lam, i) in enumerate(res.folds):
        print(f"{k:>4} {lam:14.10f} {res.states[i].sup_norm:12.5g}")
    if len(res.folds) >= 3:
        lams = np.array([f[0] for f in res.folds])
        gaps = np.abs(np.diff(lams))
        print("ratios of successive fold gaps:", np.round(gaps[:-1] / gaps[1:], 3))
    if a.out:
        out = Path(a.out)
        out.mkdir(parents=True, exist_ok=True)
        st = res.states
        outputs.write_columns(out / "branch.csv", {"arcLength": [x.arc_length for x in st],
                                                   "lambda": [x.lam for x in st],
                                                   "supNorm": [x.sup_norm for x in st]})
        outputs.svg_plot(out / "branch.svg", {"branch": ([x.lam for x in st], np.log10([x.sup_norm for x in st]))},
                         "ball branch", "lambda", "log10 sup w")


if __name__ == "__main__":
    main()
