"""Per-path solver for the conditional-density stochastic Fokker-Planck equation.

The primary scheme works in the moving frame y = x - nu*W_t, which removes
the transport noise exactly and leaves, per environmental path, the
parabolic equation

    d rho~/dt = d^2/dy^2 [ sigma^2(y + nu*W_t)/2 * rho~ ] + d/dy [ (k*rho~) rho~ ].

Diffusion is advanced with Crank-Nicolson (tridiagonal solves), the
nonlinear drift explicitly in conservative form.  A direct explicit
discretization of the original equation on the fixed lab grid is retained
as an independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .kernel import KernelSpec, build_regularized_kernel, convolve_samples
from .noise import Rho0Spec
from .particles import NumericalBlowup

C_GNS = (4.0 * np.pi**2 / 9.0) ** (-0.25)


@dataclass(frozen=True)
class SigmaSpec:
    """Diffusion coefficient families, time-independent.

    constant: sigma(x) = a
    bump:     sigma(x) = a + b*(1 - (x/L)^2)^4 for |x| <= L, a otherwise
    """

    family: str = "constant"
    a: float = 1.0
    b: float = 0.0
    L: float = 0.0

    def __post_init__(self):
        if self.family not in ("constant", "bump"):
            raise ValueError(f"unknown sigma family: {self.family!r}")
        if self.a <= 0:
            raise ValueError(f"ellipticity requires a > 0, got {self.a}")
        if self.family == "bump" and self.L <= 0:
            raise ValueError("bump family needs L > 0")

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "constant":
            return np.full_like(x, self.a) if x.ndim else self.a
        u = np.clip(1.0 - (x / self.L) ** 2, 0.0, None)
        return self.a + self.b * u**4

    def __call__(self, t, x):
        return self.value(x)

    def ellipticity(self) -> float:
        """Lower bound lambda on sigma^2."""
        if self.family == "constant" or self.b >= 0:
            return self.a**2
        x = np.linspace(-self.L, self.L, 20001)
        return float(np.min(self.value(x) ** 2))

    def sup_sigma_sq(self) -> float:
        if self.family == "constant" or self.b <= 0:
            return self.a**2
        return float((self.a + self.b) ** 2)

    def derivative_sup_norms(self) -> tuple[float, float, float]:
        """Sup norms of the first three x-derivatives, by fine-grid differencing."""
        if self.family == "constant":
            return (0.0, 0.0, 0.0)
        x = np.linspace(-self.L, self.L, 40001)
        h = x[1] - x[0]
        v = self.value(x)
        d1 = np.gradient(v, h)
        d2 = np.gradient(d1, h)
        d3 = np.gradient(d2, h)
        return tuple(float(np.max(np.abs(d))) for d in (d1, d2, d3))

    def smoothness_constant(self) -> float:
        """Lambda: sum of the first three derivative sup norms."""
        return float(sum(self.derivative_sup_norms()))

    def d_sigma_sq_sup(self) -> float:
        """sup |d(sigma^2)/dx|."""
        if self.family == "constant":
            return 0.0
        x = np.linspace(-self.L, self.L, 40001)
        v = self.value(x) ** 2
        return float(np.max(np.abs(np.gradient(v, x[1] - x[0]))))


@dataclass(frozen=True)
class GridDensity:
    """Density samples on a uniform grid with moving-frame metadata.

    Grid coordinate y_i = x0 + i*dx; the lab-frame position is
    y_i + frame_offset where frame_offset = nu*W_t.
    """

    x0: float
    dx: float
    values: np.ndarray
    time: float = 0.0
    frame_offset: float = 0.0

    @property
    def grid(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.values.size)

    @property
    def lab_grid(self) -> np.ndarray:
        return self.grid + self.frame_offset

    def sample_lab(self, x) -> np.ndarray:
        """Linear interpolation of the density at lab-frame positions."""
        return np.interp(x, self.lab_grid, self.values, left=0.0, right=0.0)


def mass(rho: GridDensity) -> float:
    """Trapezoid quadrature of the total mass."""
    return float(np.trapezoid(rho.values, dx=rho.dx))


def l2_norm(rho: GridDensity) -> float:
    return float(np.sqrt(np.trapezoid(rho.values**2, dx=rho.dx)))


def pairing(rho: GridDensity, phi) -> float:
    """<rho_t, phi> by trapezoid quadrature in the lab frame.

    phi must expose eval(x) and support() -> (lo, hi); its support must
    sit inside the grid.
    """
    lo, hi = phi.support()
    lab = rho.lab_grid
    if lo < lab[0] or hi > lab[-1]:
        raise ValueError(
            f"test function support [{lo}, {hi}] exceeds grid [{lab[0]}, {lab[-1]}]"
        )
    return float(np.trapezoid(phi.eval(lab) * rho.values, dx=rho.dx))


def check_global_existence_condition(sigma: SigmaSpec, kernel_l1: float) -> dict:
    """Diffusion-dominance condition for global existence.

    For constant sigma the condition is C_GNS^2 * ||k||_{L^1} <= sigma.
    For the bump family it is the full form
    2 L^2 S + sqrt(C_GNS^4 ||k||_1^2 + 4 L^4 S^2) <= lambda
    with S = sup |d(sigma^2)/dx|.
    """
    if sigma.family == "constant":
        lhs = C_GNS**2 * kernel_l1
        margin = sigma.a - lhs
        return {"holds": bool(margin >= 0.0), "margin": float(margin), "lhs": float(lhs), "rhs": sigma.a}
    lam = sigma.ellipticity()
    s = sigma.d_sigma_sq_sup()
    L = sigma.L
    lhs = 2 * L**2 * s + np.sqrt(C_GNS**4 * kernel_l1**2 + 4 * L**4 * s**2)
    margin = lam - lhs
    return {"holds": bool(margin >= 0.0), "margin": float(margin), "lhs": float(lhs), "rhs": lam}


@dataclass(frozen=True)
class SpdeConfig:
    T: float
    dt: float
    x0: float
    x1: float
    dx: float
    sigma: SigmaSpec = SigmaSpec()
    nu: float = 0.25
    kernel_mode: str = "exact"  # exact | regularized | none
    R: float = 1.0
    tau: float = 0.5
    rho0: Rho0Spec = Rho0Spec()
    checkpoint_times: tuple[float, ...] = ()
    mass_tol: float = 1e-6
    clip_tol: float = 1e-10
    max_clip_adjustment: float = 1e-8

    def __post_init__(self):
        if self.dt <= 0 or self.dx <= 0:
            raise ValueError("dt and dx must be positive")
        if self.x1 <= self.x0:
            raise ValueError("empty grid")
        n = self.T / self.dt
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ValueError(f"T={self.T} must be an integer multiple of dt={self.dt}")
        if self.kernel_mode not in ("exact", "regularized", "none"):
            raise ValueError(f"unknown kernel mode: {self.kernel_mode!r}")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def grid(self) -> np.ndarray:
        n = int(round((self.x1 - self.x0) / self.dx))
        return self.x0 + self.dx * np.arange(n + 1)

    def build_kernel(self):
        if self.kernel_mode == "none":
            return None
        if self.kernel_mode == "exact":
            return KernelSpec(R=self.R)
        return build_regularized_kernel(self.R, self.tau)

    def step_of(self, t: float) -> int:
        n = t / self.dt
        if abs(n - round(n)) > 1e-9 * max(1.0, abs(n)):
            raise ValueError(f"checkpoint {t} is not a multiple of dt={self.dt}")
        return int(round(n))


def default_grid(config_like, pad: float = 0.5) -> tuple[float, float]:
    """Symmetric domain edges covering the initial mass plus expansion margin."""
    rho0, sigma, nu, T = config_like.rho0, config_like.sigma, config_like.nu, config_like.T
    lo, hi = rho0.support()
    margin = 6.0 * np.sqrt(T * (sigma.sup_sigma_sq() + nu**2))
    kernel_reach = config_like.R + 2.0 * config_like.tau if config_like.kernel_mode != "none" else 0.0
    half = max(abs(lo), abs(hi)) + margin + kernel_reach + pad
    return (-half, half)


@dataclass
class DriftRecord:
    """Convolution field (k*rho) per time step, for mean-field coupling.

    conv[n] is the field at the start of step n on the moving grid;
    offsets[n] = nu*W_{t_n} maps grid to lab coordinates.
    """

    x0: float
    dx: float
    dt: float
    conv: np.ndarray  # (n_steps + 1, n_grid)
    offsets: np.ndarray  # (n_steps + 1,)

    def drift_at(self, step: int, x_lab: np.ndarray) -> np.ndarray:
        """Drift -(k*rho)(x) at lab positions, frozen over step n."""
        grid_lab = self.x0 + self.offsets[step]
        y = np.asarray(x_lab, dtype=float) - self.offsets[step]
        n = self.conv.shape[1]
        if np.any(y < self.x0 - self.dx) or np.any(y > self.x0 + (n - 1) * self.dx + self.dx):
            raise NumericalBlowup(
                f"mean-field trajectory exited the drift grid at step {step}"
            )
        grid = self.x0 + self.dx * np.arange(n)
        return -np.interp(y, grid, self.conv[step])


@dataclass
class SpdeSolution:
    checkpoints: dict[float, GridDensity]
    max_mass_drift: float
    total_clip_adjustment: float
    l2_initial: float
    l2_max: float
    l2_exceeded_monitor: bool
    drift_record: DriftRecord | None = None

    def at(self, t: float) -> GridDensity:
        return self.checkpoints[t]


def _initial_values(config: SpdeConfig) -> np.ndarray:
    y = config.grid
    rho = np.clip(config.rho0.density(y), 0.0, None)
    m = np.trapezoid(rho, dx=config.dx)
    if m <= 0:
        raise ValueError("initial density has no mass on the grid")
    return rho / m


def _cn_banded(a_vals: np.ndarray, c: float) -> np.ndarray:
    """Banded form of I - c*D2*diag(a) with Dirichlet edge rows."""
    n = a_vals.size
    ab = np.zeros((3, n))
    ab[0, 2:] = -c * a_vals[2:]  # superdiagonal entries (row i, col i+1)
    ab[1, :] = 1.0 + 2.0 * c * a_vals
    ab[1, 0] = ab[1, -1] = 1.0
    ab[2, :-2] = -c * a_vals[:-2]  # subdiagonal (row i, col i-1)
    ab[0, 1] = 0.0
    ab[2, -2] = 0.0
    return ab


def _explicit_half(rho: np.ndarray, a_vals: np.ndarray, c: float) -> np.ndarray:
    """(I + c*D2*diag(a)) rho with zero Dirichlet edges."""
    g = a_vals * rho
    out = rho.copy()
    out[1:-1] = rho[1:-1] + c * (g[2:] - 2.0 * g[1:-1] + g[:-2])
    out[0] = out[-1] = 0.0
    return out


def _drift_step(rho: np.ndarray, kern, dx: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Explicit conservative update for d/dy[(k*rho) rho]."""
    u = convolve_samples(kern, dx, rho)
    cfl = np.max(np.abs(u)) * dt / dx
    if cfl > 1.0:
        raise NumericalBlowup(f"drift CFL violated: |k*rho| dt/dx = {cfl:.3f} > 1")
    g = u * rho
    out = rho.copy()
    out[1:-1] = rho[1:-1] + dt * (g[2:] - g[:-2]) / (2.0 * dx)
    return out, u


def solve_moving_frame(
    config: SpdeConfig,
    w_increments: np.ndarray,
    record_drift: bool = False,
) -> SpdeSolution:
    """Crank-Nicolson / explicit-drift splitting in the frame y = x - nu*W_t."""
    w_increments = np.asarray(w_increments, dtype=float)
    if w_increments.size < config.n_steps:
        raise ValueError("W path shorter than the number of steps")
    y = config.grid
    dx, dt, nu = config.dx, config.dt, config.nu
    kern = config.build_kernel()
    if kern is not None and kern.support_radius / dx < 4:
        raise ValueError("grid too coarse for the kernel support")

    rho = _initial_values(config)
    times = set(config.checkpoint_times) | {config.T}
    checkpoint_steps = {config.step_of(t): t for t in times}

    w = 0.0
    l2_init = float(np.sqrt(np.trapezoid(rho**2, dx=dx)))
    l2_max = l2_init
    max_drift = abs(np.trapezoid(rho, dx=dx) - 1.0)
    total_clip = 0.0
    n_grid = y.size
    conv_rec = np.zeros((config.n_steps + 1, n_grid)) if record_drift else None
    offsets = np.zeros(config.n_steps + 1) if record_drift else None

    out: dict[float, GridDensity] = {}
    if 0 in checkpoint_steps:
        out[checkpoint_steps[0]] = GridDensity(config.x0, dx, rho.copy(), 0.0, 0.0)

    c = 0.5 * dt / dx**2
    sigma_const = config.sigma.family == "constant"
    if sigma_const:
        a_vals = np.full(n_grid, 0.5 * config.sigma.a**2)
        ab = _cn_banded(a_vals, c)

    for n in range(config.n_steps):
        w_next = w + w_increments[n]
        if kern is not None:
            rho, u = _drift_step(rho, kern, dx, dt)
            if record_drift:
                conv_rec[n] = u
                offsets[n] = nu * w
        elif record_drift:
            offsets[n] = nu * w
        if sigma_const:
            rhs = _explicit_half(rho, a_vals, c)
            rho = solve_banded((1, 1), ab, rhs)
        else:
            a_now = 0.5 * config.sigma.value(y + nu * w) ** 2
            a_next = 0.5 * config.sigma.value(y + nu * w_next) ** 2
            rhs = _explicit_half(rho, a_now, c)
            rho = solve_banded((1, 1), _cn_banded(a_next, c), rhs)
        w = w_next

        # non-negativity handling: clip tiny undershoots, restore their mass
        neg = rho < 0.0
        if np.any(neg):
            worst = float(rho[neg].min())
            if worst < -config.clip_tol:
                raise NumericalBlowup(
                    f"density undershoot {worst:.3e} below tolerance at step {n + 1}"
                )
            clipped = -float(np.trapezoid(np.where(neg, rho, 0.0), dx=dx))
            total_clip += clipped
            if total_clip > config.max_clip_adjustment:
                raise NumericalBlowup(
                    f"cumulative clip adjustment {total_clip:.3e} exceeds bound"
                )
            rho = np.clip(rho, 0.0, None)
            m = float(np.trapezoid(rho, dx=dx))
            rho *= (m - clipped) / m

        if n + 1 in checkpoint_steps:
            m = float(np.trapezoid(rho, dx=dx))
            max_drift = max(max_drift, abs(m - 1.0))
            if abs(m - 1.0) > config.mass_tol:
                raise NumericalBlowup(
                    f"mass leak |{m} - 1| exceeds tolerance at t={checkpoint_steps[n + 1]}"
                )
            l2 = float(np.sqrt(np.trapezoid(rho**2, dx=dx)))
            l2_max = max(l2_max, l2)
            out[checkpoint_steps[n + 1]] = GridDensity(
                config.x0, dx, rho.copy(), checkpoint_steps[n + 1], nu * w
            )

    if record_drift:
        if kern is not None:
            conv_rec[config.n_steps] = convolve_samples(kern, dx, rho)
        offsets[config.n_steps] = nu * w
        record = DriftRecord(config.x0, dx, dt, conv_rec, offsets)
    else:
        record = None

    return SpdeSolution(
        checkpoints=out,
        max_mass_drift=max_drift,
        total_clip_adjustment=total_clip,
        l2_initial=l2_init,
        l2_max=l2_max,
        l2_exceeded_monitor=l2_max > 10.0 * l2_init,
        drift_record=record,
    )


def solve_direct_em(config: SpdeConfig, w_increments: np.ndarray) -> SpdeSolution:
    """Explicit lab-grid discretization of the original transport-noise equation.

    Includes the second-order (dW^2 - dt) correction for the transport
    term.  Retained as an independent cross-check of the moving-frame
    scheme; demands dt <= 0.25*dx^2/(sup sigma^2 + nu^2).
    """
    w_increments = np.asarray(w_increments, dtype=float)
    if w_increments.size < config.n_steps:
        raise ValueError("W path shorter than the number of steps")
    x = config.grid
    dx, dt, nu = config.dx, config.dt, config.nu
    stiff = config.sigma.sup_sigma_sq() + nu**2
    if dt > 0.25 * dx**2 / stiff:
        raise ValueError(
            f"dt={dt} violates the stability guard 0.25*dx^2/(sup sigma^2 + nu^2) = "
            f"{0.25 * dx**2 / stiff:.3e}"
        )
    kern = config.build_kernel()
    rho = _initial_values(config)
    times = set(config.checkpoint_times) | {config.T}
    checkpoint_steps = {config.step_of(t): t for t in times}
    l2_init = float(np.sqrt(np.trapezoid(rho**2, dx=dx)))
    l2_max = l2_init
    max_drift = 0.0

    half_coef = 0.5 * (config.sigma.value(x) ** 2 + nu**2)

    out: dict[float, GridDensity] = {}
    if 0 in checkpoint_steps:
        out[checkpoint_steps[0]] = GridDensity(config.x0, dx, rho.copy(), 0.0, 0.0)

    for n in range(config.n_steps):
        dw = w_increments[n]
        g = half_coef * rho
        lap_g = np.zeros_like(rho)
        lap_g[1:-1] = (g[2:] - 2.0 * g[1:-1] + g[:-2]) / dx**2
        drho = lap_g * dt
        if kern is not None:
            u = convolve_samples(kern, dx, rho)
            f = u * rho
            div = np.zeros_like(rho)
            div[1:-1] = (f[2:] - f[:-2]) / (2.0 * dx)
            drho += div * dt
        grad = np.zeros_like(rho)
        grad[1:-1] = (rho[2:] - rho[:-2]) / (2.0 * dx)
        lap = np.zeros_like(rho)
        lap[1:-1] = (rho[2:] - 2.0 * rho[1:-1] + rho[:-2]) / dx**2
        drho += -nu * grad * dw + 0.5 * nu**2 * lap * (dw * dw - dt)
        rho = rho + drho
        rho[0] = rho[-1] = 0.0

        l2 = float(np.sqrt(np.trapezoid(rho**2, dx=dx)))
        if l2 > 10.0 * l2_init:
            raise NumericalBlowup(
                f"direct scheme L2 blow-up at step {n + 1}: {l2:.3e} vs initial {l2_init:.3e}"
            )
        l2_max = max(l2_max, l2)
        if n + 1 in checkpoint_steps:
            m = float(np.trapezoid(rho, dx=dx))
            max_drift = max(max_drift, abs(m - 1.0))
            out[checkpoint_steps[n + 1]] = GridDensity(
                config.x0, dx, rho.copy(), checkpoint_steps[n + 1], 0.0
            )

    return SpdeSolution(
        checkpoints=out,
        max_mass_drift=max_drift,
        total_clip_adjustment=0.0,
        l2_initial=l2_init,
        l2_max=l2_max,
        l2_exceeded_monitor=False,
    )
