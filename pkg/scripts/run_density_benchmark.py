"""Interaction-free density benchmarks against closed-form Gaussians.

Runs the heat-equation oracle (no environmental noise) and the rigid-shift
oracle (environmental noise only) and prints grid-L2 errors, writing the
harness CSVs for the plotting component.
"""

import argparse
from pathlib import Path

import numpy as np

from hk_chaos.harness import ExperimentConfig, run
from hk_chaos.noise import Rho0Spec, generate
from hk_chaos.spde import SigmaSpec, SpdeConfig, solve_moving_frame


def analytic(x, t, std0=0.5):
    s2 = std0**2 + t
    return np.exp(-(x**2) / (2 * s2)) / np.sqrt(2 * np.pi * s2)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/density_benchmark")
    parser.add_argument("--dt", type=float, default=1e-4)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()

    cfg = SpdeConfig(
        T=0.5, dt=args.dt, x0=-8.0, x1=8.0, dx=0.01,
        sigma=SigmaSpec(a=1.0), nu=0.0, kernel_mode="none",
        rho0=Rho0Spec(family="gaussian", std=0.5),
    )
    sol = solve_moving_frame(cfg, np.zeros(cfg.n_steps))
    rho = sol.at(0.5)
    err = np.sqrt(np.trapezoid((rho.values - analytic(rho.grid, 0.5)) ** 2, dx=cfg.dx))
    print(f"heat benchmark: grid-L2 error at T=0.5: {err:.3e}")

    cfg_shift = SpdeConfig(
        T=0.5, dt=args.dt, x0=-8.0, x1=8.0, dx=0.01,
        sigma=SigmaSpec(a=1.0), nu=0.5, kernel_mode="none",
        rho0=Rho0Spec(family="gaussian", std=0.5),
    )
    w = generate(args.seed, 0, cfg_shift.n_steps, args.dt, cfg_shift.rho0).W_increments
    sol = solve_moving_frame(cfg_shift, w)
    rho = sol.at(0.5)
    shift = 0.5 * w.sum()
    err = np.sqrt(
        np.trapezoid((rho.values - analytic(rho.lab_grid - shift, 0.5)) ** 2, dx=cfg.dx)
    )
    print(f"shift benchmark: lab-frame L2 error vs translated Gaussian: {err:.3e}")

    out = run(
        ExperimentConfig(experiment="spde", kernel="none", seed=args.seed),
        Path(args.out),
    )
    print(f"CSV artifacts written to {out}")


if __name__ == "__main__":
    main()
