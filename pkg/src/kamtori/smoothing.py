"""Analytic smoothing of periodic functions and approximation sequences.

For periodic input the smoothing convolution acts diagonally on Fourier
modes: mode k is damped by u0(r^2 |k|_2^2), where u0 is an even bump,
identically 1 on [-1/4, 1/4] and 0 outside [-1, 1].  Finitely
differentiable regularity is modelled by prescribed coefficient decay,
which gives a computable ground truth for convergence-rate checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import trigpoly as tp
from .trigpoly import TrigPoly

__all__ = [
    "BumpKernel",
    "ApproxSequence",
    "RateReport",
    "default_kernel",
    "multiplier",
    "smooth_periodic",
    "build_sequence",
    "rate_report",
    "decay_test_function",
]

SLOPE_TOLERANCE = 0.3


def _psi(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def _default_u0(t):
    t = np.abs(np.asarray(t, dtype=float))
    a = _psi(1.0 - t)
    b = _psi(t - 0.25)
    with np.errstate(invalid="ignore"):
        out = np.where(a + b > 0, a / np.where(a + b > 0, a + b, 1.0), 0.0)
    return out


@dataclass(frozen=True)
class BumpKernel:
    """Even bump u0: identically 1 on [-1/4, 1/4], 0 outside [-1, 1], smooth.

    The default is the standard partition-of-unity ratio
    u0(t) = psi(1-|t|) / (psi(1-|t|) + psi(|t|-1/4)) with
    psi(s) = exp(-1/s) for s > 0 and 0 otherwise.
    """

    u0: callable = _default_u0
    tol: float = 1e-12

    def __call__(self, t):
        return self.u0(t)


default_kernel = BumpKernel()


def multiplier(kernel: BumpKernel, r: float, k) -> float:
    """Fourier damping factor u0(r^2 |k|_2^2) in [0, 1]."""
    if not 0 < r <= 1:
        raise ValueError("need r in (0, 1]")
    k = np.atleast_1d(np.asarray(k, dtype=float))
    return float(kernel(r * r * float(np.dot(k, k))))


def smooth_periodic(f: TrigPoly, r: float, kernel: BumpKernel = default_kernel) -> TrigPoly:
    """Damp each mode by multiplier(r, k); the result is entire.

    Linear, commutes with directional derivatives, reproduces f exactly
    when r^2 K^2 <= 1/4 for the support radius K, and preserves the real
    flag (the multiplier is real and even in k).
    """
    if not 0 < r <= 1:
        raise ValueError("need r in (0, 1]")
    out = {}
    for k, c in f.coeffs.items():
        m = multiplier(kernel, r, k)
        if m != 0.0:
            out[k] = c * m
    return TrigPoly(f.n_angles, f.shape, out, f.declared_degree, real=f.real)


@dataclass
class ApproxSequence:
    """Smoothed approximants f_j at radii r_j = r_tilde 3^{-j}, f_0 = 0.

    increments[j] is the grid-measured sup of f_j - f_{j-1} on the strip
    of radius r_j; errors[j] the sup of f_j - f on the real torus.
    """

    r_tilde: float
    source: TrigPoly
    radii: list = field(default_factory=list)
    members: list = field(default_factory=list)
    increments: list = field(default_factory=list)
    errors: list = field(default_factory=list)


def build_sequence(f: TrigPoly, r_tilde: float, J: int,
                   kernel: BumpKernel = default_kernel) -> ApproxSequence:
    """Approximation ladder f_j = S_{r_j} f for j = 1..J, starting with f_0 = 0."""
    if not 0 < r_tilde <= 1:
        raise ValueError("need r_tilde in (0, 1]")
    if J < 1:
        raise ValueError("need J >= 1")
    seq = ApproxSequence(r_tilde=r_tilde, source=f)
    prev = TrigPoly.zero(f.n_angles, f.shape, real=True)
    seq.radii.append(r_tilde)
    seq.members.append(prev)
    seq.increments.append(0.0)
    seq.errors.append(tp.strip_sup_grid(f, 0.0))
    for j in range(1, J + 1):
        rj = r_tilde * 3.0 ** (-j)
        fj = smooth_periodic(f, rj, kernel)
        seq.radii.append(rj)
        seq.members.append(fj)
        seq.increments.append(tp.strip_sup_grid(fj - prev, rj))
        seq.errors.append(tp.strip_sup_grid(fj - f, 0.0))
        prev = fj
    return seq


@dataclass(frozen=True)
class RateReport:
    slope: float
    constant: float
    target: float
    passed: bool
    exact: bool


def rate_report(seq: ApproxSequence, l: float) -> RateReport:
    """Least-squares slope of log(error) vs log(r_j) over members j >= 1.

    PASS if the slope is within +-0.3 of l.  All-zero errors mean the
    source is reproduced exactly (trig polynomial inside the plateau)
    and count as PASS.
    """
    if len(seq.members) < 4:
        raise ValueError("need at least 3 smoothed members")
    r = np.asarray(seq.radii[1:], dtype=float)
    e = np.asarray(seq.errors[1:], dtype=float)
    scale = tp.strip_sup_grid(seq.source, 0.0)
    live = e > 1e-14 * max(scale, 1e-300)
    if not np.any(live):
        return RateReport(slope=float(l), constant=0.0, target=float(l), passed=True, exact=True)
    slope, logc = np.polyfit(np.log(r[live]), np.log(e[live]), 1)
    passed = bool(abs(slope - l) <= SLOPE_TOLERANCE)
    return RateReport(slope=float(slope), constant=float(np.exp(logc)),
                      target=float(l), passed=passed, exact=False)


def decay_test_function(n_angles: int, l: float, K_max: int) -> TrigPoly:
    """Real cosine series with coefficient decay |c_k| = |k|_2^{-l-1}.

    The prescribed decay is the computable stand-in for Hoelder-l
    regularity: smoothing at radius r then misses exactly the modes
    beyond ~1/(2r), an error of order r^l.
    """
    if n_angles == 1:
        coeffs = {}
        for k in range(1, K_max + 1):
            c = 0.5 * k ** (-(l + 1.0))
            coeffs[(k,)] = np.array([[c]], complex)
            coeffs[(-k,)] = np.array([[c]], complex)
        return TrigPoly(1, (1, 1), coeffs, float(K_max), real=True)
    from ._kernels import lattice_shell
    kvecs = lattice_shell(n_angles, 0.0, float(K_max), "l2")
    coeffs = {}
    for k in kvecs:
        key = tuple(int(x) for x in k)
        r2 = float(np.sqrt(sum(x * x for x in key)))
        coeffs[key] = np.array([[0.5 * r2 ** (-(l + 1.0))]], complex)
    return TrigPoly(n_angles, (1, 1), coeffs, float(K_max), real=True)
