"""Command line entry point.

    hk-chaos <subcommand> [--config FILE] [--seed S] [--threads K] [--out DIR]

Subcommands: simulate, spde, chaos-sweep, validate, kernel-report.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
The HK_CHAOS_SEED environment variable overrides the config seed; the
--seed flag overrides both.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from .harness import (
    ConfigError,
    ExperimentConfig,
    load_config,
    parse_rho0,
    parse_sigma,
    run,
)
from .kernel import build_regularized_kernel, kernel_property_report
from .particles import NumericalBlowup

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML experiment config")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--threads", type=int, help="replica worker count")
    p.add_argument("--out", default="out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hk-chaos", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the N-particle system, write positions CSV")
    _add_common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--kernel", choices=["exact", "regularized", "none"])
    p.add_argument("--tau", type=float)
    p.add_argument("--t-end", type=float, dest="t_end")
    p.add_argument("--dt", type=float)
    p.add_argument("--sigma", help="const:a or bump:a,b,L")
    p.add_argument("--nu", type=float)
    p.add_argument("--rho0", help="gaussian[:mu,std] | two_cluster[:c1,c2,std] | bump[:a]")
    p.add_argument("--checkpoints", help="comma-separated times")

    p = sub.add_parser("spde", help="solve the density equation on one environmental path")
    _add_common(p)
    p.add_argument("--kernel", choices=["exact", "reg", "regularized", "none"])
    p.add_argument("--tau", type=float)
    p.add_argument("--sigma", help="const:a or bump:a,b,L")
    p.add_argument("--nu", type=float)
    p.add_argument("--grid", help="x0,x1,dx")
    p.add_argument("--dt", type=float)
    p.add_argument("--t-end", type=float, dest="t_end")
    p.add_argument("--scheme", choices=["frame", "direct"])
    p.add_argument("--rho0")

    p = sub.add_parser("chaos-sweep", help="run a convergence sweep from a config file")
    _add_common(p)

    p = sub.add_parser("validate", help="run the invariant suite and summarize pass/fail")
    _add_common(p)

    p = sub.add_parser("kernel-report", help="print the smoothed-kernel property report as JSON")
    p.add_argument("--r", type=float, default=1.0, dest="radius")
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--samples-out", help="also write tabulated kernel samples CSV here")
    return parser


def _base_config(args, default_experiment: str) -> ExperimentConfig:
    if args.config:
        cfg = load_config(args.config)
        if args.command == "chaos-sweep":
            if cfg.experiment not in ("chaos-weak", "chaos-strong", "density-distance"):
                raise ConfigError(
                    f"chaos-sweep needs a chaos experiment config, got {cfg.experiment!r}"
                )
        else:
            cfg = dataclasses.replace(cfg, experiment=default_experiment)
    else:
        if args.command == "chaos-sweep":
            raise ConfigError("chaos-sweep requires --config")
        cfg = ExperimentConfig(experiment=default_experiment)
    env_seed = os.environ.get("HK_CHAOS_SEED")
    if env_seed is not None:
        try:
            cfg = dataclasses.replace(cfg, seed=int(env_seed))
        except ValueError as exc:
            raise ConfigError(f"HK_CHAOS_SEED must be an integer: {env_seed!r}") from exc
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.threads is not None:
        cfg = dataclasses.replace(cfg, threads=args.threads)
    return cfg


def _apply_flags(cfg: ExperimentConfig, args) -> ExperimentConfig:
    updates = {}
    for flag, key in [
        ("n", "n"),
        ("tau", "tau"),
        ("t_end", "T"),
        ("dt", "dt"),
        ("nu", "nu"),
        ("scheme", "scheme"),
    ]:
        value = getattr(args, flag, None)
        if value is not None:
            updates[key] = value
    kernel = getattr(args, "kernel", None)
    if kernel is not None:
        updates["kernel"] = "regularized" if kernel == "reg" else kernel
    if getattr(args, "sigma", None) is not None:
        updates["sigma"] = parse_sigma(args.sigma)
    if getattr(args, "rho0", None) is not None:
        updates["rho0"] = parse_rho0(args.rho0)
    if getattr(args, "checkpoints", None) is not None:
        try:
            updates["checkpoints"] = tuple(float(v) for v in args.checkpoints.split(","))
        except ValueError as exc:
            raise ConfigError(f"cannot parse checkpoints {args.checkpoints!r}") from exc
    if getattr(args, "grid", None) is not None:
        try:
            x0, x1, dxg = (float(v) for v in args.grid.split(","))
        except ValueError as exc:
            raise ConfigError(f"cannot parse grid {args.grid!r}; expected x0,x1,dx") from exc
        updates["grid"] = (x0, x1, dxg)
    cfg = dataclasses.replace(cfg, **updates)
    cfg.validate()
    return cfg


def _kernel_report(args) -> int:
    try:
        kern = build_regularized_kernel(args.radius, args.tau)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = kernel_property_report(kern)
    print(json.dumps(report, indent=2, sort_keys=True))
    if args.samples_out:
        from .kernel import KernelSpec

        sharp = KernelSpec(args.radius)
        with open(args.samples_out, "w", newline="\n") as f:
            f.write("x,k_tau,k_sharp\n")
            for x, k in zip(kern.grid_x, kern.grid_k):
                f.write(f"{float(x)!r},{float(k)!r},{float(sharp.eval(float(x)))!r}\n")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "kernel-report":
        return _kernel_report(args)
    try:
        experiment = {
            "simulate": "simulate",
            "spde": "spde",
            "chaos-sweep": "chaos-weak",  # real kind comes from the config
            "validate": "validate",
        }[args.command]
        cfg = _base_config(args, experiment)
        if args.command in ("simulate", "spde"):
            cfg = _apply_flags(cfg, args)
        run(cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalBlowup as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
