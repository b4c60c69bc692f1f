"""System representation: dimensions, exponents, maps, perturbations, scaling.

The system has two action blocks I1 (n11), I2 (n12), two angle blocks
phi1 (n21), phi2 (n22), and a parameter xi in a box of dimension n3:

    dI1/dt   = eps^q1 [A1(xi, eps) I1 + eps^q2 g1(I, phi; xi, eps)]
    dI2/dt   = eps^q3 [A2(xi, eps) I2 + eps^q4 g2(I, phi; xi, eps)]
    dphi1/dt = eps^q5 [omega1(xi, eps) + eps^q6 g3(I, phi; xi, eps)]
    dphi2/dt = omega2(xi, eps) + eps^q7 g4(I, phi; xi, eps)

Empty blocks (n11, n21 or n22 = 0) are first class; all block algebra
degenerates gracefully.  User-supplied callables must be pure,
thread-safe and vectorized over a leading batch of phi points:
g_j(I, phi, xi, eps) receives I of shape (n1,), phi of shape (..., n2)
and returns shape (..., block length).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SystemSpec",
    "ScalingMatrices",
    "ValidationReport",
    "scaling",
    "validate",
    "sample_G",
    "sample_G_jacobian",
    "omega_scaled",
    "lambda_scaled",
    "similarity",
]

SPECTRAL_GAP_WARN = 1e-6
_JAC_STEP = 1e-6


@dataclass(frozen=True)
class SystemSpec:
    n11: int
    n12: int
    n21: int
    n22: int
    n3: int
    q: tuple                      # (q1, .., q7)
    epsilon: float
    l: float
    alpha: int
    iota: float
    omega1: callable              # (xi, eps) -> (n21,)
    omega2: callable              # (xi, eps) -> (n22,)
    Lambda1: callable             # (xi, eps) -> complex (n11,)
    Lambda2: callable             # (xi, eps) -> complex (n12,)
    B1: callable                  # (xi, eps) -> (n11, n11)
    B2: callable                  # (xi, eps) -> (n12, n12)
    g1: callable
    g2: callable
    g3: callable
    g4: callable
    analytic: bool
    param_box: np.ndarray         # (n3, 2)
    dG1_dI: callable | None = None  # optional exact (phi, xi, eps) -> (..., n1, n1)
    name: str = ""

    @property
    def n1(self) -> int:
        return self.n11 + self.n12

    @property
    def n2(self) -> int:
        return self.n21 + self.n22

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1 or self.n3 < 1:
            raise ValueError("need n1 >= 1, n2 >= 1, n3 >= 1")
        if len(self.q) != 7:
            raise ValueError("q must hold q1..q7")
        box = np.asarray(self.param_box, dtype=float)
        if box.shape != (self.n3, 2):
            raise ValueError(f"param_box must have shape ({self.n3}, 2)")
        object.__setattr__(self, "param_box", box)


@dataclass(frozen=True)
class ScalingMatrices:
    """Diagonals of the scaling P = diag(P1, P2) and the size unit eps0 = eps^q2."""

    p1: np.ndarray                # (n1,)
    p2: np.ndarray                # (n2,)
    eps0: float

    @property
    def p(self) -> np.ndarray:
        return np.concatenate([self.p1, self.p2])


def scaling(spec: SystemSpec, eps: float | None = None) -> ScalingMatrices:
    """P1 = diag(eps^q1 Id, eps^{q3+q4-q2} Id), P2 = diag(eps^{q5+q6-q2} Id, eps^{q7-q2} Id)."""
    e = spec.epsilon if eps is None else eps
    q1, q2, q3, q4, q5, q6, q7 = spec.q
    p1 = np.concatenate([np.full(spec.n11, e ** q1), np.full(spec.n12, e ** (q3 + q4 - q2))])
    p2 = np.concatenate([np.full(spec.n21, e ** (q5 + q6 - q2)), np.full(spec.n22, e ** (q7 - q2))])
    if np.any(p1 <= 0) or np.any(p2 <= 0):
        raise ValueError("scaling diagonals must be positive")
    return ScalingMatrices(p1=p1, p2=p2, eps0=e ** q2)


def omega_scaled(spec: SystemSpec, xi, eps: float | None = None) -> np.ndarray:
    """Frequency vector col(eps^q5 omega1, omega2), shape (n2,)."""
    e = spec.epsilon if eps is None else eps
    q5 = spec.q[4]
    w1 = np.asarray(spec.omega1(xi, e), float).reshape(spec.n21) if spec.n21 else np.zeros(0)
    w2 = np.asarray(spec.omega2(xi, e), float).reshape(spec.n22) if spec.n22 else np.zeros(0)
    return np.concatenate([e ** q5 * w1, w2])


def lambda_scaled(spec: SystemSpec, xi, eps: float | None = None) -> np.ndarray:
    """Eigenvalue vector diag(eps^q1 Lambda1, eps^q3 Lambda2), shape (n1,), complex."""
    e = spec.epsilon if eps is None else eps
    q1, q3 = spec.q[0], spec.q[2]
    l1 = np.asarray(spec.Lambda1(xi, e), complex).reshape(spec.n11) if spec.n11 else np.zeros(0, complex)
    l2 = np.asarray(spec.Lambda2(xi, e), complex).reshape(spec.n12) if spec.n12 else np.zeros(0, complex)
    return np.concatenate([e ** q1 * l1, e ** q3 * l2])


def similarity(spec: SystemSpec, xi, eps: float | None = None) -> np.ndarray:
    """Block-diagonal similarity B = diag(B1, B2), shape (n1, n1), complex."""
    e = spec.epsilon if eps is None else eps
    out = np.zeros((spec.n1, spec.n1), complex)
    if spec.n11:
        out[:spec.n11, :spec.n11] = np.asarray(spec.B1(xi, e), complex).reshape(spec.n11, spec.n11)
    if spec.n12:
        out[spec.n11:, spec.n11:] = np.asarray(spec.B2(xi, e), complex).reshape(spec.n12, spec.n12)
    return out


@dataclass
class ValidationReport:
    c0: float
    c1: float
    violations: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _param_grid(box: np.ndarray, density: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, density) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def validate(spec: SystemSpec, grid_density: int = 5) -> ValidationReport:
    """Check the exponent inequalities and measure c0, c1 on a parameter grid.

    c0 is the empirical infimum of |lambda_j| and of the within-block
    spectral gaps; c1 the supremum of the map norms.  Exponent or
    regularity violations make the spec unusable for the driver.
    """
    if grid_density < 2:
        raise ValueError("grid_density must be >= 2")
    q1, q2, q3, q4, q5, q6, q7 = spec.q
    violations = []
    warnings = []
    if not q1 > q3:
        violations.append("(H1): q1 > q3 fails")
    if not q3 >= q5:
        violations.append("(H1): q3 >= q5 fails")
    if not q7 >= q2 + q5:
        violations.append("(H1): q7 >= q2 + q5 fails")
    if not 0 < q2:
        violations.append("(H1): q2 > 0 fails")
    if not q2 <= min(q4, q6):
        violations.append("(H1): q2 <= min(q4, q6) fails")
    if not spec.l > 2 * (spec.alpha + 1) * (spec.iota + 2) + spec.alpha * spec.iota:
        violations.append("(H3): l > 2(alpha+1)(iota+2) + alpha*iota fails")
    if not spec.iota > spec.alpha * spec.n2 - 1:
        violations.append("(H3): iota > alpha*n2 - 1 fails")
    if not spec.epsilon > 0:
        violations.append("epsilon must be positive")

    c0 = np.inf
    c1 = 0.0
    for xi in _param_grid(spec.param_box, grid_density):
        lam = lambda_scaled(spec, xi)
        # the unscaled eigenvalues carry the spectral hypothesis
        lam1 = np.asarray(spec.Lambda1(xi, spec.epsilon), complex).reshape(spec.n11) if spec.n11 else np.zeros(0, complex)
        lam2 = np.asarray(spec.Lambda2(xi, spec.epsilon), complex).reshape(spec.n12) if spec.n12 else np.zeros(0, complex)
        for blk in (lam1, lam2):
            if blk.size:
                c0 = min(c0, float(np.min(np.abs(blk))))
            for i in range(blk.size):
                for j in range(i + 1, blk.size):
                    c0 = min(c0, float(abs(blk[j] - blk[i])))
        B = similarity(spec, xi)
        if spec.n1:
            c1 = max(c1, float(np.max(np.abs(B))))
            c1 = max(c1, float(np.max(np.abs(np.linalg.inv(B)))))
            c1 = max(c1, float(np.max(np.abs(np.concatenate([lam1, lam2])))))
        if spec.n21:
            c1 = max(c1, float(np.max(np.abs(np.asarray(spec.omega1(xi, spec.epsilon), float)))))
        if spec.n22:
            c1 = max(c1, float(np.max(np.abs(np.asarray(spec.omega2(xi, spec.epsilon), float)))))
        del lam
    if not np.isfinite(c0):
        c0 = np.inf  # no eigenvalue constraints active (empty blocks)
    if c0 < SPECTRAL_GAP_WARN:
        warnings.append(f"(H2): spectral constant c0 = {c0:.3e} below {SPECTRAL_GAP_WARN:g}")
    return ValidationReport(c0=float(c0), c1=float(c1), violations=violations, warnings=warnings)


def _eval_block(g, I, phi, xi, eps, length, label):
    if length == 0:
        return np.zeros(phi.shape[:-1] + (0,))
    vals = np.asarray(g(I, phi, xi, eps), dtype=float)
    want = phi.shape[:-1] + (length,)
    if vals.shape != want:
        vals = np.broadcast_to(vals, want).copy()
    if not np.all(np.isfinite(vals)):
        bad = np.argwhere(~np.isfinite(vals))[0]
        raise ValueError(f"non-finite value from {label} at grid index {tuple(bad[:-1])}"
                         f" (phi = {phi[tuple(bad[:-1])]})")
    return vals


def sample_G(spec: SystemSpec, xi, eps: float, phi_grid: np.ndarray, I=None):
    """Scaled perturbation samples G1 = eps^q2 col(g1, g2), G2 = eps^q2 col(g3, g4).

    phi_grid has shape (..., n2); returns (G1, G2) of shapes
    (..., n1) and (..., n2).
    """
    phi = np.asarray(phi_grid, dtype=float)
    if phi.shape[-1] != spec.n2:
        raise ValueError("phi_grid last axis must have length n2")
    I = np.zeros(spec.n1) if I is None else np.asarray(I, dtype=float).reshape(spec.n1)
    e0 = eps ** spec.q[1]
    parts1 = [_eval_block(spec.g1, I, phi, xi, eps, spec.n11, "g1"),
              _eval_block(spec.g2, I, phi, xi, eps, spec.n12, "g2")]
    parts2 = [_eval_block(spec.g3, I, phi, xi, eps, spec.n21, "g3"),
              _eval_block(spec.g4, I, phi, xi, eps, spec.n22, "g4")]
    G1 = e0 * np.concatenate(parts1, axis=-1)
    G2 = e0 * np.concatenate(parts2, axis=-1)
    return G1, G2


def sample_G_jacobian(spec: SystemSpec, xi, eps: float, phi_grid: np.ndarray,
                      I=None) -> np.ndarray:
    """d G1 / d I at the given I (default 0) per grid point, shape (..., n1, n1).

    Central finite differences with step 1e-6 * max(1, |I|) unless the
    spec supplies an exact derivative callable.
    """
    phi = np.asarray(phi_grid, dtype=float)
    I = np.zeros(spec.n1) if I is None else np.asarray(I, dtype=float).reshape(spec.n1)
    e0 = eps ** spec.q[1]
    if spec.dG1_dI is not None:
        jac = np.asarray(spec.dG1_dI(phi, xi, eps), dtype=float)
        want = phi.shape[:-1] + (spec.n1, spec.n1)
        if jac.shape != want:
            jac = np.broadcast_to(jac, want).copy()
        return e0 * jac
    h = _JAC_STEP * max(1.0, float(np.max(np.abs(I))))
    cols = []
    for i in range(spec.n1):
        dI = np.zeros(spec.n1)
        dI[i] = h
        Gp, _ = sample_G(spec, xi, eps, phi, I + dI)
        Gm, _ = sample_G(spec, xi, eps, phi, I - dI)
        cols.append((Gp - Gm) / (2.0 * h))
    return np.stack(cols, axis=-1)
