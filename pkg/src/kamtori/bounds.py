"""Executable quantitative bounds: truncation tails and small-divisor sums.

Each bound comes in two halves that are kept strictly separate: a
brute-force evaluation (the oracle side) and the closed-form constant
(the bound side).  Tests assert oracle <= bound; the two sides never
share code paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import divisor_sum_reduce, lattice_shell, norms

__all__ = [
    "BoundInapplicable",
    "DivisorHypothesisViolation",
    "TailBoundInput",
    "DivisorSumInput",
    "tail_constant",
    "truncation_tail_bound",
    "smalldivisor_sum",
    "smalldivisor_scan",
    "smalldivisor_constant",
    "smalldivisor_bound",
    "cutoff_tail_bound",
]

_DIVISOR_FLOOR = 1e-14


class BoundInapplicable(ValueError):
    """Raised when a bound's hypotheses are not met."""


class DivisorHypothesisViolation(ValueError):
    """A scanned divisor fell below the resolvable floor."""


@dataclass(frozen=True)
class TailBoundInput:
    """Inputs of the truncation tail estimate.

    n is the torus dimension, f_norm_r a bound for sup |f| on the strip
    of radius r, rho the strip loss with 0 < 2 rho <= r, K the
    truncation radius with K > 1/(2 rho).
    """

    n: int
    f_norm_r: float
    rho: float
    K: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.rho <= 0:
            raise ValueError("rho must be > 0")
        if self.f_norm_r < 0:
            raise ValueError("f_norm_r must be >= 0")


def tail_constant(n: int) -> float:
    """The dimension constant 6 n! n^n e^{-n} of the tail estimate."""
    return 6.0 * math.factorial(n) * float(n) ** n * math.exp(-n)


def truncation_tail_bound(inp: TailBoundInput) -> float:
    """Upper bound C(n) |f|_r rho^{-n} e^{-rho K} for the discarded tail.

    Dominates sup of (Id - Gamma_K) f on the strip of radius r - 2 rho.
    Requires K > (2 rho)^{-1}.
    """
    if inp.K <= 1.0 / (2.0 * inp.rho):
        raise BoundInapplicable(f"need K > 1/(2 rho) = {1.0 / (2 * inp.rho):g}, got K = {inp.K:g}")
    return tail_constant(inp.n) * inp.f_norm_r * inp.rho ** (-inp.n) * math.exp(-inp.rho * inp.K)


@dataclass(frozen=True)
class DivisorSumInput:
    """Inputs of the small-divisor sum estimate.

    The Diophantine hypothesis |<k, omega>| >= gamma |k|^-tau and
    |<k, omega> + lam| >= gamma |k|^-tau is scanned over 0 < |k|_2 <= K;
    dioph_norm selects |k|_2 or |k|_1 in the hypothesis (both admissible).
    gamma=None means: use the empirical constant realized by the scan.
    """

    omega: tuple
    lam: float
    tau: float
    b: float
    v: float
    sigma: float
    K: float
    gamma: float | None = None
    dioph_norm: str = "l2"

    def __post_init__(self):
        n = len(self.omega)
        if self.tau <= n - 1:
            raise ValueError(f"need tau > n - 1 = {n - 1}")
        if self.b < 1:
            raise ValueError("need b >= 1")
        if self.v < 0:
            raise ValueError("need v >= 0")
        if not 0 < self.sigma < 1:
            raise ValueError("need sigma in (0, 1)")
        if self.dioph_norm not in ("l2", "l1"):
            raise ValueError("dioph_norm must be 'l2' or 'l1'")

    @property
    def n(self) -> int:
        return len(self.omega)


def _scan(inp: DivisorSumInput):
    kvecs = lattice_shell(inp.n, 0.0, inp.K, "l2")
    k2, k1 = norms(kvecs)
    kdotw = kvecs.astype(float) @ np.asarray(inp.omega, float)
    weights = k1 ** inp.v * np.exp(-inp.sigma * k1)
    hyp = (k2 if inp.dioph_norm == "l2" else k1) ** inp.tau
    return divisor_sum_reduce(
        np.ascontiguousarray(kdotw), np.ascontiguousarray(weights),
        np.ascontiguousarray(hyp), float(inp.lam), float(inp.b))


def smalldivisor_scan(inp: DivisorSumInput):
    """(sum, empirical gamma, smallest divisor) over the lattice 0 < |k|_2 <= K.

    The empirical gamma is min over scanned k of
    min(|<k,omega>|, |<k,omega>+lam|) * |k|^tau in the chosen norm, so
    the hypothesis holds with it by construction.
    """
    total, gamma_emp, min_abs = _scan(inp)
    if min_abs < _DIVISOR_FLOOR:
        raise DivisorHypothesisViolation(
            f"divisor magnitude {min_abs:.3e} below floor {_DIVISOR_FLOOR:g}")
    return total, gamma_emp, min_abs


def smalldivisor_sum(inp: DivisorSumInput) -> float:
    """Brute-force sum over 0 < |k|_2 <= K of |k|_1^v |<k,omega>+lam|^{-b} e^{-sigma |k|_1}."""
    total, _, _ = smalldivisor_scan(inp)
    return total


def smalldivisor_constant(n: int, tau: float, b: float, v: float) -> float:
    """The explicit constant of the small-divisor sum estimate."""
    tb = tau * b + v
    return (15.0 * tau * math.sqrt(tb) * 2.0 ** (2 * (n + b) - 3)
            * float(n) ** (tb + 1.0) / (tau * b - n + 1.0) * (tb / math.e) ** tb)


def smalldivisor_bound(inp: DivisorSumInput) -> float:
    """Closed-form bound C gamma^{-b} sigma^{-(tau b + v + 1)}.

    With gamma=None the empirical Diophantine constant from the scan is
    used, making the comparison self-contained.
    """
    gamma = inp.gamma
    if gamma is None:
        _, gamma, _ = smalldivisor_scan(inp)
    if gamma <= 0:
        raise BoundInapplicable("nonpositive Diophantine constant")
    C = smalldivisor_constant(inp.n, inp.tau, inp.b, inp.v)
    return C * gamma ** (-inp.b) * inp.sigma ** (-(inp.tau * inp.b + inp.v + 1.0))


def cutoff_tail_bound(inp: DivisorSumInput, gamma: float | None = None) -> float:
    """Certified bound on the part of the sum discarded by the finite cutoff.

    Assumes the scanned Diophantine constant persists beyond K; then each
    max-norm shell |k| = m holds (2m+1)^n - (2m-1)^n points, each
    contributing at most (nm)^{v} gamma^{-b} (nm)^{tau b} e^{-sigma m}.
    The exponential weight makes the result a quantifiable certificate
    for treating K as an infinity surrogate.
    """
    if gamma is None:
        _, gamma, _ = smalldivisor_scan(inp)
    n, tb = inp.n, inp.tau * inp.b + inp.v
    m0 = max(1, int(math.floor(inp.K / n)))  # every discarded k has |k|_max > K/sqrt(n) >= K/n
    total = 0.0
    m = m0 + 1
    while True:
        count = (2 * m + 1) ** n - (2 * m - 1) ** n
        term = (count * (n * m) ** tb * gamma ** (-inp.b) * math.exp(-inp.sigma * m))
        total += term
        if term < 1e-300 or (m > 2 * tb / inp.sigma and term < 1e-16 * total):
            break
        m += 1
    return total
