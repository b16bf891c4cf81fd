"""Bounded-confidence interaction force and its mollified approximations.

The sharp force is k_hk(x) = x on [-R, R] and 0 outside.  The smoothed
family is k_tau(x) = x * psi_tau(x), where psi_tau is the indicator of
[-R-tau, R+tau] convolved with the standard compactly supported mollifier
scaled to [-tau, tau].  This makes k_tau agree with k_hk on [-R, R]
exactly, vanish identically outside [-R-2*tau, R+2*tau], and keeps the
derivative O(1/tau) in the two transition layers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Nodes/weights shared by all cutoff-profile evaluations.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def _mollifier_unnormalized(u):
    """exp(-1/(1-u^2)) on (-1, 1), zero outside."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ui * ui))
    return out


def _mollifier_norm() -> float:
    x = _GL_NODES  # integrate over (-1, 1)
    return float(np.sum(_GL_WEIGHTS * _mollifier_unnormalized(x)))


_MOLLIFIER_NORM = _mollifier_norm()
_MOLLIFIER_PEAK = np.exp(-1.0) / _MOLLIFIER_NORM


def mollifier(u):
    """Standard bump with unit mass on [-1, 1]."""
    return _mollifier_unnormalized(u) / _MOLLIFIER_NORM


def mollifier_cdf(s):
    """Integral of the unit-mass bump from -1 to s, vectorized in s."""
    s = np.asarray(s, dtype=float)
    s_clip = np.clip(s, -1.0, 1.0)
    # Map 64 Gauss-Legendre nodes onto each interval [-1, s].
    half = (s_clip + 1.0) / 2.0
    x = -1.0 + half[..., None] * (_GL_NODES + 1.0)
    vals = np.sum(_GL_WEIGHTS * mollifier(x), axis=-1) * half
    return vals if vals.ndim else float(vals)


@dataclass(frozen=True)
class KernelSpec:
    """The sharp interaction force with confidence radius R."""

    R: float

    def __post_init__(self):
        if self.R <= 0:
            raise ValueError(f"confidence radius must be positive, got {self.R}")

    def eval(self, x):
        return eval_k_hk(x, self)

    @property
    def support_radius(self) -> float:
        return self.R

    def l1_norm(self) -> float:
        # int_{-R}^{R} |x| dx
        return self.R**2

    def l2_norm(self) -> float:
        # sqrt(int_{-R}^{R} x^2 dx)
        return float(np.sqrt(2.0 * self.R**3 / 3.0))


def eval_k_hk(x, spec: KernelSpec):
    """x restricted to the closed confidence window [-R, R]."""
    x = np.asarray(x, dtype=float)
    out = np.where(np.abs(x) <= spec.R, x, 0.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class RegularizedKernel:
    """Smoothed interaction force with transition width tau.

    Carries tabulated samples on a uniform grid aligned with x = R (the
    sharp support edge), the realized derivative-bound constant, and the
    norms used by the convergence estimates.
    """

    R: float
    tau: float
    grid_step: float
    grid_x: np.ndarray = field(repr=False)
    grid_k: np.ndarray = field(repr=False)
    grid_dk: np.ndarray = field(repr=False)
    derivative_constant: float  # realized C in |dk/dx| <= C/tau
    l1: float
    l2: float
    linf: float
    diff_l2: float  # ||k_tau - k_hk||_{L^2}
    # uniform samples over the whole support (zero-padded by two cells on
    # each side) enabling branch-free indexed interpolation
    table_x0: float = 0.0
    table_step: float = 0.0
    table_k: np.ndarray = field(repr=False, default=None)

    @property
    def support_radius(self) -> float:
        return self.R + 2.0 * self.tau

    def cutoff(self, x):
        """The smooth even profile psi_tau, equal to 1 on [-R, R]."""
        ax = np.abs(np.asarray(x, dtype=float))
        # Right transition layer lives on [R, R + 2*tau]; the profile there
        # is 1 - CDF((|x| - R - tau)/tau).
        s = (ax - self.R - self.tau) / self.tau
        vals = 1.0 - mollifier_cdf(s)
        vals = np.where(ax <= self.R, 1.0, vals)
        vals = np.where(ax >= self.R + 2.0 * self.tau, 0.0, vals)
        return vals if vals.ndim else float(vals)

    def cutoff_derivative(self, x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        s = (ax - self.R - self.tau) / self.tau
        vals = -mollifier(s) / self.tau
        vals = np.where((ax <= self.R) | (ax >= self.R + 2.0 * self.tau), 0.0, vals)
        vals = vals * np.sign(x)
        return vals if vals.ndim else float(vals)

    def eval(self, x):
        """k_tau(x) = x * psi_tau(x); exactly x on [-R, R], exactly 0 outside support."""
        x_in = np.asarray(x, dtype=float)
        x1 = np.atleast_1d(x_in)
        ax = np.abs(x1)
        out = np.where(ax <= self.R, x1, 0.0)
        layer = (ax > self.R) & (ax < self.R + 2.0 * self.tau)
        if np.any(layer):
            xl = x1[layer]
            out[layer] = xl * self.cutoff(xl)
        return out.reshape(x_in.shape) if x_in.ndim else float(out[0])

    def eval_tabulated(self, x):
        """Fast evaluation via the uniform layer table.

        Exact on [-R, R] (the force is x there) and outside the support;
        linear interpolation of the cutoff profile with direct index
        arithmetic in the transition layers, error O(grid_step^2 / tau).
        Used on hot paths where per-pair quadrature of the mollifier
        profile would dominate the run time.
        """
        x = np.asarray(x, dtype=float)
        pos = (x - self.table_x0) / self.table_step
        # clipping lands out-of-support arguments in the zero padding
        pos = np.clip(pos, 0.0, self.table_k.size - 2.0)
        idx = pos.astype(np.intp)
        frac = pos - idx
        return self.table_k[idx] * (1.0 - frac) + self.table_k[idx + 1] * frac

    def eval_derivative(self, x):
        x = np.asarray(x, dtype=float)
        vals = self.cutoff(x) + x * self.cutoff_derivative(x)
        vals = np.where(np.abs(x) >= self.R + 2.0 * self.tau, 0.0, vals)
        return vals if vals.ndim else float(vals)


def _aligned_grid(R: float, tau: float, step: float) -> np.ndarray:
    """Symmetric grid hitting x = R and x = R + 2*tau exactly.

    Extends past the support edge so the support check in the property
    report is a real measurement, not a tautology.
    """
    n_inner = int(np.ceil(R / step))
    step_inner = R / n_inner
    n_layer = int(np.ceil(2.0 * tau / step))
    step_layer = 2.0 * tau / n_layer
    n_outer = 2 * n_layer  # margin of 4*tau beyond the support edge
    right = np.concatenate(
        [
            np.arange(n_inner + 1) * step_inner,
            R + np.arange(1, n_layer + n_outer + 1) * step_layer,
        ]
    )
    return np.concatenate([-right[:0:-1], right])


def build_regularized_kernel(R: float, tau: float, grid_step: float | None = None) -> RegularizedKernel:
    """Construct the smoothed kernel and certify its cached quantities.

    grid_step defaults to tau/64 and must be at most tau/8 so the
    transition layer is resolved.
    """
    if tau <= 0:
        raise ValueError(f"regularization width must be positive, got {tau}")
    if R <= 0:
        raise ValueError(f"confidence radius must be positive, got {R}")
    if grid_step is None:
        grid_step = tau / 64.0
    if grid_step > tau / 8.0:
        raise ValueError(
            f"grid_step {grid_step} too coarse to resolve the transition layer; need <= tau/8 = {tau / 8.0}"
        )

    # Provisional object for evaluation; norms filled in below.
    kern = RegularizedKernel(
        R=R,
        tau=tau,
        grid_step=grid_step,
        grid_x=np.empty(0),
        grid_k=np.empty(0),
        grid_dk=np.empty(0),
        derivative_constant=0.0,
        l1=0.0,
        l2=0.0,
        linf=0.0,
        diff_l2=0.0,
    )

    x = _aligned_grid(R, tau, grid_step)
    k = kern.eval(x)
    dk = kern.eval_derivative(x)

    l1 = float(np.trapezoid(np.abs(k), x))
    l2 = float(np.sqrt(np.trapezoid(k * k, x)))
    linf = float(np.max(np.abs(k)))
    deriv_const = float(tau * np.max(np.abs(dk)))

    # k_tau - k_hk vanishes identically on [-R, R]; integrate the smooth
    # remainder x * psi_tau(x) over the right layer only (grid aligned at R).
    n_layer = int(np.ceil(2.0 * tau / grid_step))
    step_layer = 2.0 * tau / n_layer
    xl = R + np.arange(n_layer + 1) * step_layer
    diff = xl * np.asarray(kern.cutoff(xl))
    diff_l2 = float(np.sqrt(2.0 * np.trapezoid(diff * diff, xl)))

    # uniform fast-path table: two zero cells of padding past each edge
    n_half = int(np.ceil((R + 2.0 * tau) / grid_step)) + 2
    table_x = (np.arange(2 * n_half + 1) - n_half) * grid_step
    table_k = np.asarray(kern.eval(table_x))

    return RegularizedKernel(
        R=R,
        tau=tau,
        grid_step=grid_step,
        grid_x=x,
        grid_k=k,
        grid_dk=dk,
        derivative_constant=deriv_const,
        l1=l1,
        l2=l2,
        linf=linf,
        diff_l2=diff_l2,
        table_x0=float(table_x[0]),
        table_step=grid_step,
        table_k=table_k,
    )


def l2_distance(kern: RegularizedKernel) -> float:
    """||k_tau - k_hk||_{L^2}; strictly decreasing along the family in tau."""
    return kern.diff_l2


def kernel_property_report(kern: RegularizedKernel) -> dict:
    """Check the four structural properties of the smoothed family.

    Failures are report entries, not exceptions.  The fourth check uses the
    reading sup|k_tau| <= ||k_hk||_{L^2} / tau and reports where it binds;
    the displayed inequality in the source material omits the tau
    superscript on the left, which we document rather than resolve.
    """
    R, tau = kern.R, kern.tau
    x, k, dk = kern.grid_x, kern.grid_k, kern.grid_dk
    spec = KernelSpec(R=R)

    nonzero = np.abs(k) > 0.0
    support_edge = float(np.max(np.abs(x[nonzero]))) if np.any(nonzero) else 0.0
    support_ok = support_edge <= R + 2.0 * tau + 1e-12

    # Derivative of the cutoff profile must vanish outside the two layers.
    dpsi = kern.cutoff_derivative(x)
    outside_layers = (np.abs(x) < R - 2.0 * tau) | (np.abs(x) > R + 2.0 * tau)
    dpsi_leak = float(np.max(np.abs(dpsi[outside_layers]))) if np.any(outside_layers) else 0.0
    dpsi_support_ok = dpsi_leak == 0.0

    # |dk/dx| <= C/tau with the construction's explicit constant.
    realized_c = float(tau * np.max(np.abs(dk)))
    stated_c = float(tau + (R + 2.0 * tau) * _MOLLIFIER_PEAK)
    derivative_ok = realized_c <= stated_c * (1.0 + 1e-9)

    linf_bound = spec.l2_norm() / tau
    measured_linf = float(np.max(np.abs(k)))
    linf_ok = measured_linf <= linf_bound
    # The bound binds once tau exceeds ||k_hk||_{L^2} / sup|k_tau|.
    binding_tau = spec.l2_norm() / measured_linf if measured_linf > 0 else np.inf

    checks = {
        "support": {
            "passed": bool(support_ok),
            "measured_edge": support_edge,
            "bound": R + 2.0 * tau,
        },
        "cutoff_derivative_support": {
            "passed": bool(dpsi_support_ok),
            "leak_outside_layers": dpsi_leak,
        },
        "derivative_bound": {
            "passed": bool(derivative_ok),
            "realized_constant": realized_c,
            "stated_constant": stated_c,
        },
        "sup_norm_vs_l2": {
            "passed": bool(linf_ok),
            "measured_sup": measured_linf,
            "bound": linf_bound,
            "binds_for_tau_above": float(binding_tau),
            "note": "left side read as sup|k_tau|; source text omits the tau superscript",
        },
    }
    return {
        "R": R,
        "tau": tau,
        "all_passed": all(c["passed"] for c in checks.values()),
        "checks": checks,
        "norms": {
            "l1": kern.l1,
            "l2": kern.l2,
            "linf": kern.linf,
            "diff_l2": kern.diff_l2,
        },
    }


def convolve_samples(kern, dx: float, values: np.ndarray) -> np.ndarray:
    """(k * rho) for density samples on a uniform grid of spacing dx.

    Banded direct quadrature over the kernel's compact support; the kernel
    vanishes at its support edges so the uniform-weight sum is the
    trapezoid rule.  Cost O(n_grid * n_kernel).
    """
    values = np.asarray(values, dtype=float)
    support = kern.support_radius
    m = int(np.ceil(support / dx))
    if 2 * m < 8:
        raise ValueError(
            f"grid step {dx} too coarse: kernel support {support} resolved by fewer than 8 cells"
        )
    offsets = np.arange(-m, m + 1) * dx
    k_samples = kern.eval(offsets)
    full = np.convolve(values, k_samples, mode="full")
    return full[m : m + values.size] * dx


def convolve_density(kern, rho):
    """(k * rho)(x) on rho's grid for any object with .dx and .values."""
    return convolve_samples(kern, rho.dx, rho.values)
