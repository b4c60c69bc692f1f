"""Shared helpers for the test suite."""

import numpy as np

from kamtori._kernels import lattice_shell
from kamtori.trigpoly import TrigPoly

GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0


def random_real_poly(rng, n, deg, shape=(1, 1), n_modes=12):
    """Random real-flagged poly with support |k|_2 <= deg."""
    coeffs = {}
    kvecs = lattice_shell(n, 0.0, deg, "l2")
    take = rng.choice(len(kvecs), size=min(n_modes, len(kvecs)), replace=False)
    for i in take:
        k = tuple(int(x) for x in kvecs[i])
        c = rng.normal(size=shape) + 1j * rng.normal(size=shape)
        nk = tuple(-x for x in k)
        coeffs[k] = coeffs.get(k, 0) + c
        coeffs[nk] = coeffs.get(nk, 0) + np.conj(c)
    coeffs[(0,) * n] = rng.normal(size=shape) * (1.0 + 0j)
    return TrigPoly(n, shape, coeffs, real=True)


def diophantine_omega(n, rng):
    """Strongly nonresonant frequency vectors built on quadratic irrationals."""
    base = rng.uniform(0.8, 1.3)
    if n == 1:
        return np.array([base])
    if n == 2:
        return base * np.array([1.0, GOLDEN + rng.uniform(-0.02, 0.02)])
    irr = [1.0, GOLDEN, np.sqrt(2.0), np.sqrt(3.0), np.sqrt(7.0)]
    return base * np.array(irr[:n]) * rng.uniform(0.95, 1.05, size=n)
