"""Reproducible Brownian driving noise.

One shared environmental path W, N idiosyncratic paths B^i and i.i.d.
initial opinions, all derived from a single 64-bit seed via counter-based
(Philox) streams.  Sub-seed derivation is injective in (stream kind,
index), so changing N leaves W and the first N-1 idiosyncratic streams
untouched, and extending n_steps preserves every stream's prefix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Stream kinds for sub-seed derivation; pinned by tests.
_STREAM_W = 0
_STREAM_B = 1
_STREAM_INITIAL = 2
_STREAM_REPLICA = 3


def _stream_generator(seed: int, kind: int, index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(kind, index))
    return np.random.Generator(np.random.Philox(ss))


def replica_seed(seed: int, replica: int) -> int:
    """Derived scalar seed for one Monte Carlo replica."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(_STREAM_REPLICA, replica))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class Rho0Spec:
    """Built-in initial density families.

    gaussian:    truncated Gaussian (mu, std), cut at mu +- trunc*std
    two_cluster: mixture w*N(c1, std^2) + (1-w)*N(c2, std^2)
    bump:        c*(1 - (x/a)^2)^4 on [-a, a]
    """

    family: str = "gaussian"
    mu: float = 0.0
    std: float = 0.5
    trunc: float = 8.0
    centers: tuple[float, float] = (-1.0, 1.0)
    cluster_std: float = 0.1
    weight: float = 0.5
    a: float = 1.0

    def __post_init__(self):
        if self.family not in ("gaussian", "two_cluster", "bump"):
            raise ValueError(f"unknown initial density family: {self.family!r}")

    def density(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "gaussian":
            lo, hi = self.mu - self.trunc * self.std, self.mu + self.trunc * self.std
            from scipy.stats import norm

            z = norm.cdf(self.trunc) - norm.cdf(-self.trunc)
            vals = norm.pdf(x, self.mu, self.std) / z
            return np.where((x >= lo) & (x <= hi), vals, 0.0)
        if self.family == "two_cluster":
            from scipy.stats import norm

            return self.weight * norm.pdf(x, self.centers[0], self.cluster_std) + (
                1.0 - self.weight
            ) * norm.pdf(x, self.centers[1], self.cluster_std)
        # bump: c*(1-(x/a)^2)^4, c = 315/(256*a)
        c = 315.0 / (256.0 * self.a)
        u = x / self.a
        vals = c * np.clip(1.0 - u * u, 0.0, None) ** 4
        return np.where(np.abs(x) <= self.a, vals, 0.0)

    def support(self) -> tuple[float, float]:
        if self.family == "gaussian":
            return (self.mu - self.trunc * self.std, self.mu + self.trunc * self.std)
        if self.family == "two_cluster":
            pad = 8.0 * self.cluster_std
            return (min(self.centers) - pad, max(self.centers) + pad)
        return (-self.a, self.a)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if n == 0:
            return np.empty(0)
        if self.family == "gaussian":
            out = np.empty(0)
            while out.size < n:
                draw = rng.standard_normal(2 * (n - out.size) + 16)
                draw = draw[np.abs(draw) <= self.trunc]
                out = np.concatenate([out, draw])
            return self.mu + self.std * out[:n]
        if self.family == "two_cluster":
            # component choice first, then component sampling
            pick = rng.random(n) < self.weight
            z = rng.standard_normal(n)
            centers = np.where(pick, self.centers[0], self.centers[1])
            return centers + self.cluster_std * z
        # bump via rejection from uniform on [-a, a] x [0, c]
        out = np.empty(0)
        c = 315.0 / (256.0 * self.a)
        while out.size < n:
            m = 2 * (n - out.size) + 16
            x = rng.uniform(-self.a, self.a, m)
            y = rng.uniform(0.0, c, m)
            out = np.concatenate([out, x[y <= self.density(x)]])
        return out[:n]


@dataclass(frozen=True)
class NoiseBundle:
    seed: int
    dt: float
    n_steps: int
    N: int
    W_increments: np.ndarray  # (n_steps,)
    B_increments: np.ndarray  # (N, n_steps)
    initial_opinions: np.ndarray  # (N,)

    @property
    def W_path(self) -> np.ndarray:
        """W at step boundaries, length n_steps + 1, W_0 = 0."""
        return np.concatenate([[0.0], np.cumsum(self.W_increments)])

    def subset(self, N: int) -> "NoiseBundle":
        """The bundle restricted to the first N particles, same W path."""
        if N > self.N:
            raise ValueError(f"cannot take {N} particles from a bundle of {self.N}")
        return NoiseBundle(
            seed=self.seed,
            dt=self.dt,
            n_steps=self.n_steps,
            N=N,
            W_increments=self.W_increments,
            B_increments=self.B_increments[:N],
            initial_opinions=self.initial_opinions[:N],
        )

    def coarsen(self, factor: int) -> "NoiseBundle":
        """Sum fine increments into coarser steps on the same underlying path."""
        if self.n_steps % factor != 0:
            raise ValueError(f"n_steps {self.n_steps} not divisible by factor {factor}")
        n = self.n_steps // factor
        return NoiseBundle(
            seed=self.seed,
            dt=self.dt * factor,
            n_steps=n,
            N=self.N,
            W_increments=self.W_increments.reshape(n, factor).sum(axis=1),
            B_increments=self.B_increments.reshape(self.N, n, factor).sum(axis=2),
            initial_opinions=self.initial_opinions,
        )


def sample_initial(rho0: Rho0Spec, N: int, seed: int) -> np.ndarray:
    """N i.i.d. draws from the initial density, from the dedicated sub-stream."""
    if N < 0:
        raise ValueError("N must be non-negative")
    rng = _stream_generator(seed, _STREAM_INITIAL)
    return rho0.sample(N, rng)


def generate(seed: int, N: int, n_steps: int, dt: float, rho0: Rho0Spec) -> NoiseBundle:
    """Deterministic noise bundle: pure function of its arguments."""
    if N < 0:
        raise ValueError(f"N must be non-negative, got {N}")
    if n_steps < 1:
        raise ValueError(f"n_steps must be at least 1, got {n_steps}")
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    sqdt = np.sqrt(dt)
    w = sqdt * _stream_generator(seed, _STREAM_W).standard_normal(n_steps)
    b = np.empty((N, n_steps))
    for i in range(N):
        b[i] = sqdt * _stream_generator(seed, _STREAM_B, i).standard_normal(n_steps)
    zeta = sample_initial(rho0, N, seed)
    return NoiseBundle(
        seed=seed,
        dt=dt,
        n_steps=n_steps,
        N=N,
        W_increments=w,
        B_increments=b,
        initial_opinions=zeta,
    )
