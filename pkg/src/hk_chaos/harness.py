"""Config loading, run orchestration and CSV persistence.

One YAML config fully determines a run; every output directory contains
the resolved config, a manifest with versions and monitor summaries, and
CSV result tables.  Re-running the same config and seed reproduces every
CSV byte for byte.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__
from .chaos import (
    DEFAULT_TEST_FUNCTIONS,
    ChaosResult,
    SweepConfig,
    TestFunction,
    density_distance_experiment,
    strong_coupling_experiment,
    weak_error_experiment,
)
from .kernel import build_regularized_kernel, kernel_property_report
from .noise import Rho0Spec, generate
from .particles import NumericalBlowup, SimConfig, simulate
from .spde import (
    SigmaSpec,
    SpdeConfig,
    check_global_existence_condition,
    default_grid,
    solve_direct_em,
    solve_moving_frame,
)

EXPERIMENTS = (
    "simulate",
    "spde",
    "chaos-weak",
    "chaos-strong",
    "density-distance",
    "validate",
)


class ConfigError(ValueError):
    """Malformed or semantically invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    """Resolved settings for one run; round-trips through YAML unchanged."""

    experiment: str
    seed: int = 42
    threads: int = 1
    replicas: int = 200
    # shared physics
    R: float = 1.0
    tau: float = 0.5
    sigma: SigmaSpec = field(default_factory=SigmaSpec)
    nu: float = 0.25
    T: float = 0.5
    dt: float = 1e-3
    rho0: Rho0Spec = field(default_factory=Rho0Spec)
    checkpoints: tuple[float, ...] = ()
    # simulate
    n: int = 100
    kernel: str = "regularized"  # exact | regularized | none
    # spde
    grid: tuple[float, float, float] | None = None  # (x0, x1, dx)
    scheme: str = "frame"  # frame | direct
    dx: float = 0.01
    # chaos sweeps
    n_list: tuple[int, ...] = (50, 100, 200, 400)
    tau_list: tuple[float, ...] = (0.2, 0.1, 0.05)
    fix_w: bool = False
    phis: tuple[TestFunction, ...] = DEFAULT_TEST_FUNCTIONS

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(
                f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}"
            )
        if self.dt <= 0 or self.T <= 0:
            raise ConfigError("T and dt must be positive")
        steps = self.T / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ConfigError(f"dt={self.dt} must divide T={self.T}")
        if self.kernel not in ("exact", "regularized", "none"):
            raise ConfigError(f"unknown kernel mode {self.kernel!r}")
        if self.scheme not in ("frame", "direct"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.tau <= 0 or self.R <= 0:
            raise ConfigError("R and tau must be positive")
        if self.replicas < 1 or self.threads < 1 or self.n < 1:
            raise ConfigError("replicas, threads and n must be at least 1")
        for t in self.checkpoints:
            k = t / self.dt
            if t < 0 or t > self.T or abs(k - round(k)) > 1e-9 * max(1.0, abs(k)):
                raise ConfigError(f"checkpoint {t} is not a multiple of dt within [0, T]")
        if self.grid is not None:
            x0, x1, dxg = self.grid
            if x1 <= x0 or dxg <= 0:
                raise ConfigError(f"invalid grid {self.grid}")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["sigma"] = dataclasses.asdict(self.sigma)
        d["rho0"] = dataclasses.asdict(self.rho0)
        d["phis"] = [dataclasses.asdict(p) for p in self.phis]
        d["checkpoints"] = list(self.checkpoints)
        d["n_list"] = list(self.n_list)
        d["tau_list"] = list(self.tau_list)
        d["grid"] = list(self.grid) if self.grid is not None else None
        d["rho0"]["centers"] = list(self.rho0.centers)
        return d


def config_from_dict(raw: dict) -> ExperimentConfig:
    raw = dict(raw)
    if "experiment" not in raw:
        raise ConfigError("config needs an 'experiment' key")
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "sigma" in raw:
        s = raw["sigma"]
        raw["sigma"] = parse_sigma(s) if isinstance(s, str) else SigmaSpec(**s)
    if "rho0" in raw:
        r = raw["rho0"]
        if isinstance(r, str):
            raw["rho0"] = parse_rho0(r)
        else:
            if "centers" in r:
                r = {**r, "centers": tuple(r["centers"])}
            raw["rho0"] = Rho0Spec(**r)
    if "phis" in raw:
        raw["phis"] = tuple(TestFunction(**p) for p in raw["phis"])
    for key in ("checkpoints", "n_list", "tau_list"):
        if key in raw and raw[key] is not None:
            raw[key] = tuple(raw[key])
    if raw.get("grid") is not None:
        g = tuple(float(v) for v in raw["grid"])
        if len(g) != 3:
            raise ConfigError(f"grid must be [x0, x1, dx], got {raw['grid']}")
        raw["grid"] = g
    try:
        cfg = ExperimentConfig(**raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    cfg.validate()
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}" if mark else ""
        raise ConfigError(f"cannot parse {path}{where}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be a mapping, got {type(raw).__name__}")
    return config_from_dict(raw)


def parse_sigma(text: str) -> SigmaSpec:
    """'const:a' or 'bump:a,b,L'."""
    try:
        family, _, rest = text.partition(":")
        if family == "const":
            return SigmaSpec(a=float(rest or 1.0))
        if family == "bump":
            a, b, L = (float(v) for v in rest.split(","))
            return SigmaSpec(family="bump", a=a, b=b, L=L)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"cannot parse sigma spec {text!r}: {exc}") from exc
    raise ConfigError(f"unknown sigma family in {text!r}; expected const:a or bump:a,b,L")


def parse_rho0(text: str) -> Rho0Spec:
    """'gaussian[:mu,std]' | 'two_cluster[:c1,c2,std]' | 'bump[:a]'."""
    family, _, rest = text.partition(":")
    try:
        if family == "gaussian":
            if rest:
                mu, std = (float(v) for v in rest.split(","))
                return Rho0Spec(family="gaussian", mu=mu, std=std)
            return Rho0Spec(family="gaussian")
        if family == "two_cluster":
            if rest:
                c1, c2, std = (float(v) for v in rest.split(","))
                return Rho0Spec(family="two_cluster", centers=(c1, c2), cluster_std=std)
            return Rho0Spec(family="two_cluster")
        if family == "bump":
            return Rho0Spec(family="bump", a=float(rest) if rest else 1.0)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"cannot parse rho0 spec {text!r}: {exc}") from exc
    raise ConfigError(f"unknown rho0 family in {text!r}")


def _fmt(value) -> str:
    """Stable text form: repr for floats so re-runs are byte-identical."""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: list, rows) -> None:
    with open(path, "w", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def _checkpoints(config: ExperimentConfig) -> tuple[float, ...]:
    return tuple(sorted(set(config.checkpoints) | {config.T}))


def _spde_cfg(config: ExperimentConfig, kernel_mode: str) -> SpdeConfig:
    shim = SpdeConfig(
        T=config.T,
        dt=config.dt,
        x0=-1.0,
        x1=1.0,
        dx=config.dx,
        sigma=config.sigma,
        nu=config.nu,
        kernel_mode=kernel_mode,
        R=config.R,
        tau=config.tau,
        rho0=config.rho0,
    )
    if config.grid is not None:
        x0, x1, dxg = config.grid
    else:
        x0, x1 = default_grid(shim)
        dxg = config.dx
    return dataclasses.replace(
        shim, x0=x0, x1=x1, dx=dxg, checkpoint_times=_checkpoints(config)
    )


def _sweep(config: ExperimentConfig) -> SweepConfig:
    return SweepConfig(
        T=config.T,
        dt=config.dt,
        nu=config.nu,
        R=config.R,
        sigma=config.sigma,
        rho0=config.rho0,
        dx=config.dx,
        checkpoint_times=config.checkpoints,
        seed=config.seed,
        threads=config.threads,
        fix_w=config.fix_w,
    )


def _run_simulate(config: ExperimentConfig, out: Path) -> dict:
    bundle = generate(config.seed, config.n, int(round(config.T / config.dt)), config.dt, config.rho0)
    cfg = SimConfig(
        N=config.n,
        T=config.T,
        dt=config.dt,
        nu=config.nu,
        kernel_mode=config.kernel,
        R=config.R,
        tau=config.tau,
        checkpoint_times=_checkpoints(config),
    )
    ensembles = simulate(cfg, bundle, config.sigma)
    rows = []
    for t in sorted(ensembles):
        for i, x in enumerate(ensembles[t].positions):
            rows.append([t, i, float(x)])
    _write_csv(out / "simulate.csv", ["t", "particle_id", "position"], rows)
    return {}


def _is_gaussian_benchmark(config: ExperimentConfig) -> bool:
    return (
        config.kernel == "none"
        and config.sigma.family == "constant"
        and config.rho0.family == "gaussian"
    )


def _run_spde(config: ExperimentConfig, out: Path) -> dict:
    cfg = _spde_cfg(config, config.kernel)
    w = generate(config.seed, 0, cfg.n_steps, config.dt, config.rho0).W_increments
    solver = solve_moving_frame if config.scheme == "frame" else solve_direct_em
    sol = solver(cfg, w)
    rows = []
    for t in sorted(sol.checkpoints):
        rho = sol.checkpoints[t]
        lab = rho.lab_grid
        for j in range(lab.size):
            rows.append([t, float(lab[j]), float(rho.values[j])])
    _write_csv(out / "spde.csv", ["t", "x", "rho"], rows)

    if _is_gaussian_benchmark(config):
        # closed-form solution for the interaction-free constant-sigma
        # benchmark, shifted by the environmental path: the report overlay
        # reads this instead of computing statistics itself
        w_end = {t: cfg.nu * float(np.sum(w[: cfg.step_of(t)])) for t in sol.checkpoints}
        arows = []
        for t in sorted(sol.checkpoints):
            rho = sol.checkpoints[t]
            s2 = config.rho0.std**2 + config.sigma.a**2 * t
            lab = rho.lab_grid
            mu = config.rho0.mu + w_end[t]
            vals = np.exp(-((lab - mu) ** 2) / (2 * s2)) / np.sqrt(2 * np.pi * s2)
            for j in range(lab.size):
                arows.append([t, float(lab[j]), float(vals[j])])
        _write_csv(out / "density_analytic.csv", ["t", "x", "rho"], arows)
    return {
        "max_mass_drift": sol.max_mass_drift,
        "total_clip_adjustment": sol.total_clip_adjustment,
        "l2_exceeded_monitor": sol.l2_exceeded_monitor,
    }


def _write_chaos(result: ChaosResult, out: Path) -> None:
    _write_csv(
        out / "results.csv",
        ["experiment", "N", "tau", "t", "phi", "error", "stderr", "replicas"],
        [
            [r["experiment"], r["N"], r["tau"], r["t"], r["phi"], r["error"], r["stderr"], r["replicas"]]
            for r in result.rows
        ],
    )
    _write_csv(
        out / "rates.csv",
        ["experiment", "tau", "phi", "slope", "r2"],
        [[r["experiment"], r["tau"], r["phi"], r["slope"], r["r2"]] for r in result.rates],
    )


def _run_chaos(config: ExperimentConfig, out: Path) -> dict:
    sweep = _sweep(config)
    if config.experiment == "chaos-weak":
        result = weak_error_experiment(
            sweep, list(config.n_list), config.tau, config.phis, M=config.replicas
        )
    elif config.experiment == "chaos-strong":
        result = strong_coupling_experiment(
            sweep, list(config.n_list), config.tau, M=config.replicas
        )
    else:
        result = density_distance_experiment(sweep, list(config.tau_list), M=config.replicas)
    _write_chaos(result, out)
    return {}


def _run_validate(config: ExperimentConfig, out: Path) -> dict:
    checks = {}
    for tau in config.tau_list:
        report = kernel_property_report(build_regularized_kernel(config.R, tau))
        checks[f"kernel_tau_{tau:g}"] = {
            "passed": report["all_passed"],
            "norms": report["norms"],
        }
    cond = check_global_existence_condition(config.sigma, config.R**2)
    checks["existence_condition"] = {"passed": True, **cond}

    families = (
        Rho0Spec(family="gaussian"),
        Rho0Spec(family="two_cluster"),
        Rho0Spec(family="bump"),
    )
    w = generate(config.seed, 0, int(round(config.T / config.dt)), config.dt, config.rho0).W_increments
    for rho0 in families:
        for mode in ("exact", "regularized"):
            cfg = _spde_cfg(dataclasses.replace(config, rho0=rho0), mode)
            try:
                sol = solve_moving_frame(cfg, w)
                entry = {
                    "passed": sol.max_mass_drift <= 1e-6
                    and sol.total_clip_adjustment <= 1e-8
                    and not sol.l2_exceeded_monitor,
                    "max_mass_drift": sol.max_mass_drift,
                    "total_clip_adjustment": sol.total_clip_adjustment,
                }
            except NumericalBlowup as exc:
                entry = {"passed": False, "failure": str(exc)}
            checks[f"density_{rho0.family}_{mode}"] = entry

    summary = {"all_passed": all(c["passed"] for c in checks.values()), "checks": checks}
    (out / "validation.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if not summary["all_passed"]:
        raise NumericalBlowup("validation suite reported failures; see validation.json")
    return {"validation_all_passed": True}


def run(config: ExperimentConfig, out_dir) -> Path:
    """Execute one experiment, writing all artifacts into out_dir."""
    config.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "resolved_config.yaml").write_text(
        yaml.safe_dump(config.to_dict(), sort_keys=True)
    )
    start = time.monotonic()
    if config.experiment == "simulate":
        monitors = _run_simulate(config, out)
    elif config.experiment == "spde":
        monitors = _run_spde(config, out)
    elif config.experiment == "validate":
        monitors = _run_validate(config, out)
    else:
        monitors = _run_chaos(config, out)
    manifest = {
        "experiment": config.experiment,
        "seed": config.seed,
        "versions": {
            "hk_chaos": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "wall_time_s": round(time.monotonic() - start, 3),
        "monitors": monitors,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out
