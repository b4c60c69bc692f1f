"""Exact Fourier-mode solves of the three homological equations.

With A = B diag(Lambda) B^-1 block-diagonal and omega the scaled
frequency vector, the equations and their mode-wise solutions are

    d v0 . omega - A v0 = P1 Gamma_K u0
        v0_hat(k) = P1 B (i<k,omega> - Lambda)^-1 B^-1 u0_hat(k)

    d v1 . omega + v1 A - A v1 = P1 (Gamma_K u1 - B diag(B^-1 u1_hat(0) B) B^-1)
        V1(k)_ij = (i<k,omega> + lambda_j - lambda_i)^-1 U1_hat(k)_ij,
        diag V1(0) = 0, with U1 = B^-1 u1 B and v1 = P1 B V1 B^-1

    d Phi . omega = P2 (Gamma_K w - w_hat(0))
        Phi_hat(k) = P2 (i<k,omega>)^-1 w_hat(k),  Phi_hat(0) = 0.

The scaled eigenvalues already carry their epsilon powers, so the v1
divisors are exactly i<k,omega> + <m, Lambda> with m = e_j - e_i.
Nonresonance at margin 1/4 guarantees a divisor floor of
(gamma/4) eps^q5 K^-iota for every mode used.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import trigpoly as tp
from ._kernels import lattice_shell, min_divisor_ratio_batch, norms
from .resonance import m_set
from .trigpoly import TrigPoly

__all__ = [
    "Resonant",
    "StageData",
    "NonresonanceReport",
    "small_divisor",
    "check_nonresonance",
    "solve_v0",
    "solve_v1",
    "solve_phi",
]

DIVISOR_FLOOR = 1e-14
_REAL_TOL = 1e-12


class Resonant(Exception):
    """A divisor underflowed the resolvable floor: true resonance, not noise."""

    def __init__(self, k, m, divisor):
        self.k = tuple(int(x) for x in np.atleast_1d(k))
        self.m = tuple(int(x) for x in np.atleast_1d(m))
        self.divisor = complex(divisor)
        super().__init__(f"resonant divisor at k={self.k}, m={self.m}: |d| = {abs(divisor):.3e}")


@dataclass(frozen=True)
class StageData:
    """Stage-nu frequency state: scaled omega, Lambda, similarity B, schedule."""

    nu: int
    omega: np.ndarray             # (n2,) real, col(eps^q5 omega1, omega2)
    Lambda: np.ndarray            # (n1,) complex, diag(eps^q1 L1, eps^q3 L2)
    B: np.ndarray                 # (n1, n1) complex block-diagonal
    schedule: object = None

    def __post_init__(self):
        object.__setattr__(self, "omega", np.asarray(self.omega, float).reshape(-1))
        object.__setattr__(self, "Lambda", np.asarray(self.Lambda, complex).reshape(-1))
        object.__setattr__(self, "B", np.asarray(self.B, complex))

    @property
    def n1(self) -> int:
        return self.Lambda.size

    @property
    def n2(self) -> int:
        return self.omega.size


def small_divisor(k, m, stage: StageData) -> complex:
    """i <k, omega> + <m, Lambda> for integer vectors k, m."""
    k = np.asarray(k, float).reshape(stage.n2)
    m = np.asarray(m, float).reshape(stage.n1)
    return 1j * float(k @ stage.omega) + complex(m @ stage.Lambda)


@dataclass(frozen=True)
class NonresonanceReport:
    ok: bool
    worst_k: tuple
    worst_m: tuple
    worst_ratio: float            # min |divisor| |k|_2^iota
    threshold: float              # margin * gamma * eps^q5
    margin: float


def check_nonresonance(stage: StageData, gamma: float, iota: float, eps: float,
                       q5: float, K_lo: float, K_hi: float,
                       margin: float = 0.25) -> NonresonanceReport:
    """Verify |divisor| >= margin gamma eps^q5 |k|_2^-iota over a mode range.

    margin 1 tests only the fresh shell K_lo < |k|_2 <= K_hi (the
    survivor-set construction); margins 1/2 and 1/4 test the full range
    0 < |k|_2 <= K_hi (the drift-absorbing guarantee used by solves).
    Reports the minimizing (k, m) either way.
    """
    if K_hi <= K_lo and margin == 1.0:
        raise ValueError("need K_lo < K_hi")
    lo = K_lo if margin == 1.0 else 0.0
    kvecs = lattice_shell(stage.n2, lo, K_hi, "l2")
    if len(kvecs) == 0:
        return NonresonanceReport(True, (0,) * stage.n2, (0,) * stage.n1,
                                  np.inf, margin * gamma * eps ** q5, margin)
    k2, _ = norms(kvecs)
    kpow = np.ascontiguousarray(k2 ** iota)
    mm = m_set(stage.n1)
    mdots = np.asarray(mm, float) @ stage.Lambda
    ratio, arg_k, arg_m = min_divisor_ratio_batch(
        np.ascontiguousarray(kvecs.astype(float)), kpow,
        np.ascontiguousarray(stage.omega[None, :]),
        np.ascontiguousarray(mdots.real[None, :]),
        np.ascontiguousarray(mdots.imag[None, :]))
    thr = margin * gamma * eps ** q5
    return NonresonanceReport(bool(ratio[0] >= thr),
                              tuple(int(x) for x in kvecs[arg_k[0]]),
                              mm[arg_m[0]], float(ratio[0]), thr, margin)


def _floor(komega: float) -> float:
    return DIVISOR_FLOOR * max(1.0, abs(komega))


def _finish(poly_coeffs, template: TrigPoly, K_plus: float, shape=None) -> TrigPoly:
    shape = template.shape if shape is None else shape
    out = TrigPoly(template.n_angles, shape, poly_coeffs, float(K_plus), real=False)
    scale = tp.strip_norm_bound(out, 0.0).value
    if template.real and out.hermitian_defect() <= _REAL_TOL * max(scale, 1e-300):
        sym = out.symmetrized(real=True)
        out = TrigPoly(template.n_angles, shape, sym.coeffs, float(K_plus), real=True)
    return out


def solve_v0(u0: TrigPoly, stage: StageData, P1: np.ndarray, K_plus: float) -> TrigPoly:
    """Solve the action-offset equation at truncation K_plus.

    Requires nonresonance at margin 1/4 over the truncated range; a
    divisor below the floor raises Resonant with the offending
    (k, -e_i) pattern.
    """
    if u0.shape != (stage.n1, 1):
        raise ValueError(f"u0 must have shape ({stage.n1}, 1)")
    P1 = np.asarray(P1, float).reshape(stage.n1)
    Binv = np.linalg.inv(stage.B)
    out = {}
    for k, c in tp.truncate(u0, K_plus).coeffs.items():
        komega = float(np.asarray(k, float) @ stage.omega)
        d = 1j * komega - stage.Lambda
        bad = np.abs(d) < _floor(komega)
        if np.any(bad):
            i = int(np.argmax(bad))
            m = np.zeros(stage.n1, int)
            m[i] = -1
            raise Resonant(k, m, d[i])
        out[k] = P1[:, None] * (stage.B @ ((Binv @ c) / d[:, None]))
    return _finish(out, u0, K_plus)


def solve_v1(u1: TrigPoly, stage: StageData, P1: np.ndarray, K_plus: float):
    """Solve the linearization equation; returns (v1, Lambda_update).

    Lambda_update = diag(B^-1 u1_hat(0) B) is the removable diagonal
    part; the (i, i) entries of the mean of the B-conjugated solution
    are zero.
    """
    if u1.shape != (stage.n1, stage.n1):
        raise ValueError(f"u1 must have shape ({stage.n1}, {stage.n1})")
    P1 = np.asarray(P1, float).reshape(stage.n1)
    Binv = np.linalg.inv(stage.B)
    lam = stage.Lambda
    gaps = lam[None, :] - lam[:, None]          # gaps[i, j] = lambda_j - lambda_i
    zero = (0,) * stage.n2
    out = {}
    lam_update = np.zeros(stage.n1, complex)
    for k, c in tp.truncate(u1, K_plus).coeffs.items():
        komega = float(np.asarray(k, float) @ stage.omega)
        U1k = Binv @ c @ stage.B
        D = 1j * komega + gaps
        if k == zero:
            lam_update = np.diag(U1k).copy()
            V1k = np.zeros_like(U1k)
            idx = ~np.eye(stage.n1, dtype=bool)
        else:
            V1k = np.empty_like(U1k)
            idx = np.ones((stage.n1, stage.n1), dtype=bool)
        bad = idx & (np.abs(D) < _floor(komega))
        if np.any(bad):
            i, j = np.argwhere(bad)[0]
            m = np.zeros(stage.n1, int)
            m[j] += 1
            m[i] -= 1
            raise Resonant(k, m, D[i, j])
        V1k[idx] = U1k[idx] / D[idx]
        out[k] = P1[:, None] * (stage.B @ V1k @ Binv)
    v1 = _finish(out, u1, K_plus)
    return v1, lam_update


def solve_phi(w: TrigPoly, stage: StageData, P2: np.ndarray, K_plus: float):
    """Solve the angle-shift equation; returns (Phi, omega_update).

    Phi has zero mean; omega_update is the removed mean w_hat(0),
    required real for a real-flagged input.
    """
    if w.shape != (stage.n2, 1):
        raise ValueError(f"w must have shape ({stage.n2}, 1)")
    P2 = np.asarray(P2, float).reshape(stage.n2)
    zero = (0,) * stage.n2
    out = {}
    omega_update = np.zeros(stage.n2)
    for k, c in tp.truncate(w, K_plus).coeffs.items():
        if k == zero:
            if np.max(np.abs(c.imag)) > _REAL_TOL * max(1.0, np.max(np.abs(c))):
                raise ValueError("mean of w has a non-negligible imaginary part")
            omega_update = c.real.reshape(stage.n2).copy()
            continue
        komega = float(np.asarray(k, float) @ stage.omega)
        d = 1j * komega
        if abs(d) < _floor(komega):
            raise Resonant(k, np.zeros(stage.n1, int), d)
        out[k] = P2[:, None] * (c / d)
    return _finish(out, w, K_plus), omega_update
