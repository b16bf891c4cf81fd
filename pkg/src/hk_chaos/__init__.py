"""Numerical laboratory for noisy bounded-confidence opinion dynamics.

Simulates the N-particle system with idiosyncratic and environmental
noise, solves the conditional-density stochastic Fokker-Planck equation
per environmental path, couples mean-field trajectories to that density,
and measures propagation-of-chaos convergence rates.
"""

__version__ = "0.1.0"
