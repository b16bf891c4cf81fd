"""Conditional mean-field dynamics driven by a solved density flow.

Each mean-field trajectory follows

    dXbar^i = -(k * rho_t)(Xbar^i) dt + sigma(Xbar^i) dB^i + nu dW,

with rho_t the per-path density from the moving-frame solver.  Feeding the
same initial opinions, idiosyncratic paths and environmental path as a
particle simulation yields the synchronous coupling used by the
convergence experiments.
"""

from __future__ import annotations

import numpy as np

from .noise import NoiseBundle
from .particles import NumericalBlowup, ParticleEnsemble, SimConfig
from .spde import DriftRecord


def simulate_meanfield(
    config: SimConfig,
    bundle: NoiseBundle,
    sigma,
    drift_record: DriftRecord | None,
) -> dict[float, ParticleEnsemble]:
    """Euler-Maruyama for N independent copies of the mean-field equation.

    drift_record supplies the frozen field (k * rho_t) per step; pass None
    for interaction-free dynamics.  The record must have been produced
    with the same dt and the same environmental path as the bundle.
    """
    if bundle.N != config.N or bundle.n_steps < config.n_steps:
        raise ValueError(
            f"bundle sized ({bundle.N}, {bundle.n_steps}) does not cover config "
            f"({config.N}, {config.n_steps})"
        )
    if abs(bundle.dt - config.dt) > 1e-12 * config.dt:
        raise ValueError(f"bundle dt {bundle.dt} != config dt {config.dt}")
    if drift_record is not None:
        if abs(drift_record.dt - config.dt) > 1e-12 * config.dt:
            raise ValueError(
                f"drift record dt {drift_record.dt} != config dt {config.dt}"
            )
        if drift_record.conv.shape[0] < config.n_steps + 1:
            raise ValueError("drift record shorter than the number of steps")

    times = set(config.checkpoint_times) | {config.T}
    checkpoint_steps = {config.step_of(t): t for t in times}

    x = bundle.initial_opinions.copy()
    out: dict[float, ParticleEnsemble] = {}
    if 0 in checkpoint_steps:
        out[checkpoint_steps[0]] = ParticleEnsemble(positions=x.copy(), time=0.0)
    dt = config.dt
    for n in range(config.n_steps):
        t = n * dt
        drift = drift_record.drift_at(n, x) if drift_record is not None else 0.0
        x = x + drift * dt + sigma(t, x) * bundle.B_increments[:, n] + config.nu * bundle.W_increments[n]
        if not np.all(np.isfinite(x)):
            raise NumericalBlowup(f"non-finite mean-field positions after step {n + 1}")
        if n + 1 in checkpoint_steps:
            out[checkpoint_steps[n + 1]] = ParticleEnsemble(
                positions=x.copy(), time=checkpoint_steps[n + 1]
            )
    return out
