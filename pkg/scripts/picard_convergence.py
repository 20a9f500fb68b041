"""Picard iterates for the cubic wave equation with a two-point condition, plus continuation."""

import argparse

import numpy as np

from multiwave.cli import write_csv
from multiwave.data import gaussian_bumps
from multiwave.errors import WindowCollapseError
from multiwave.multipoint import LinearProblem, MultipointSpec
from multiwave.nonlinear import Nonlinearity, PicardConfig, continue_solution, solve_nonlinear
from multiwave.operators import build_operator
from multiwave.spectral import Field, GridSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--amp", type=float, default=0.3)
    ap.add_argument("--coupling", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--horizon", type=float, default=2.0)
    ap.add_argument("--out", default="picard_convergence.csv")
    args = ap.parse_args()

    g = GridSpec.cube(2, 32, 16.0)
    rng = np.random.default_rng(args.seed)
    phi = Field(g, args.amp * gaussian_bumps(g, 1, rng).values)
    psi = Field(g, 0.5 * args.amp * gaussian_bumps(g, 1, rng).values)
    prob = LinearProblem(g, build_operator([[1.0]]), phi, psi, 1.0)
    spec = MultipointSpec([0.2], [0.1], [0.25])
    nl = Nonlinearity("scalar_power", args.coupling, 3)

    _, rep = solve_nonlinear(prob, spec, nl, PicardConfig(p=1))
    print(f"window {rep.window:.4g}, M {rep.M:.4g}, {rep.iterates} iterations, converged {rep.converged}")
    rows = [{"iterate": i + 1, "difference": d, "ratio": rep.ratios[i - 1] if i else ""}
            for i, d in enumerate(rep.differences)]
    write_csv(args.out, rows, ["iterate", "difference", "ratio"])

    try:
        traj, reports = continue_solution(prob, spec, nl, PicardConfig(p=1), args.horizon)
        print(f"continued to t={traj.times[-1]:.3f} over {len(reports)} windows")
    except WindowCollapseError as err:
        end = err.partial.times[-1] if err.partial is not None else 0.0
        print(f"window collapsed after t={end:.3f}")
    print(args.out)


if __name__ == "__main__":
    main()
