"""The KAM iteration: schedules, coordinate changes, conjugation, torus output.

Each step solves the three homological equations at the scheduled
truncation, applies the coordinate change

    I = rho + v0(phi) + v1(phi) rho,      varphi = phi + Phi(phi),

updates frequencies and eigenvalues by the removed means, and then
re-derives the new lower-degree terms by sampling the transformed field
at rho = 0 (plus its rho-Jacobian) on a fresh grid.  The pullback is
evaluated numerically through the composed transform chain with the
block-triangular inverse Jacobian applied pointwise; no symbolic
remainder bookkeeping.  Closed-form update expressions exist and serve
as step-one cross-check oracles in the tests.

The printed norms are coefficient-sum majorants (strip radius 0) of the
unscaled u0, u1, w; the eps^q2 prefactor is carried separately by the
scaling data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import homological as hm
from . import model
from . import smoothing as sm
from . import trigpoly as tp
from .homological import Resonant, StageData
from .model import SystemSpec
from .trigpoly import TrigPoly

__all__ = [
    "ScheduleParams",
    "StageSchedule",
    "StepTransform",
    "Diagnostics",
    "StepRecord",
    "KamRun",
    "TorusResult",
    "RunOptions",
    "schedule",
    "c_tilde",
    "extract_lower_degree",
    "kam_step",
    "run",
    "invariance_residual",
    "CONVERGED",
    "RESONANT_HALT",
    "DIVERGED",
    "MAX_STEPS",
]

CONVERGED = "converged"
RESONANT_HALT = "resonant_halt"
DIVERGED = "diverged"
MAX_STEPS = "max_steps"

_JAC_STEP = 1e-6
_REAL_TOL = 1e-9


# -- schedule -------------------------------------------------------------


@dataclass(frozen=True)
class ScheduleParams:
    r_tilde: float
    l: float
    alpha: int
    iota: float
    n2: int
    n3: int
    c1: float
    gamma: float


@dataclass(frozen=True)
class StageSchedule:
    nu: int
    r: float
    K: int
    s: float
    chi: float
    delta: tuple      # per derivative order mu = 0..alpha, in units of C0 M eps0


def c_tilde(n2: int) -> float:
    """Dimension constant 24 (n2!) n2^n2 e^{-n2} of the truncation schedule."""
    return 24.0 * math.factorial(n2) * float(n2) ** n2 * math.exp(-n2)


def schedule(nu: int, p: ScheduleParams) -> StageSchedule:
    """Stage-nu ladder values: radii, truncations, parameter margins.

    r_nu = r_tilde 3^-nu; K_0 = 0 and for nu >= 1
    K_nu = [K'_nu] + 1 with
    K'_nu = 3^nu r0^-1 (ln Ctilde + (n2+1)|ln r0| + (l + (n2+1) nu - alpha) ln 3);
    s_0 = gamma and s_nu = gamma (16 c1 n3 sqrt(n2) K_nu^{iota+1})^-1;
    chi_nu = r_nu^{l - 2(alpha+1)(iota+1) - alpha - 3};
    delta_{nu mu} = gamma^{-mu-1} r_nu^{l - (alpha+mu+2)(iota+1) - alpha - 3},
    reported per unit of the (nonconstructive) prefactor C0 M eps0.
    """
    if nu < 0:
        raise ValueError("nu must be >= 0")
    r = p.r_tilde * 3.0 ** (-nu)
    if nu == 0:
        K = 0
        s = p.gamma
    else:
        kp = 3.0 ** nu / p.r_tilde * (
            math.log(c_tilde(p.n2)) + (p.n2 + 1) * abs(math.log(p.r_tilde))
            + (p.l + (p.n2 + 1) * nu - p.alpha) * math.log(3.0))
        K = int(math.floor(kp)) + 1
        s = p.gamma / (16.0 * p.c1 * p.n3 * math.sqrt(p.n2) * K ** (p.iota + 1.0))
    chi = r ** (p.l - 2.0 * (p.alpha + 1) * (p.iota + 1) - p.alpha - 3.0)
    delta = tuple(
        p.gamma ** (-(mu + 1.0)) * r ** (p.l - (p.alpha + mu + 2) * (p.iota + 1) - p.alpha - 3.0)
        for mu in range(p.alpha + 1))
    return StageSchedule(nu=nu, r=r, K=K, s=s, chi=chi, delta=delta)


# -- transforms -----------------------------------------------------------


@dataclass(frozen=True)
class StepTransform:
    """One coordinate change T^{nu+1}: real-flagged v0 (n1,1), v1 (n1,n1), Phi (n2,1)."""

    v0: TrigPoly
    v1: TrigPoly
    Phi: TrigPoly
    nu: int
    strip_radius: float


def _eval_with_grad(poly: TrigPoly, pts: np.ndarray, chunk: int = 8192):
    """Values and phi-gradients at points, shapes (N, r, c) and (N, r, c, n)."""
    n = poly.n_angles
    N = pts.shape[0]
    vals = np.zeros((N,) + poly.shape, complex)
    grads = np.zeros((N,) + poly.shape + (n,), complex)
    if not poly.coeffs:
        return vals, grads
    kmat = np.array(list(poly.coeffs), dtype=float)
    cflat = np.stack([poly.coeffs[tuple(int(x) for x in k)] for k in kmat]).reshape(len(kmat), -1)
    for lo in range(0, N, chunk):
        hi = min(lo + chunk, N)
        E = np.exp(1j * pts[lo:hi] @ kmat.T)
        vals[lo:hi] = (E @ cflat).reshape(hi - lo, *poly.shape)
        for j in range(n):
            gj = E @ (1j * kmat[:, j:j + 1] * cflat)
            grads[lo:hi, ..., j] = gj.reshape(hi - lo, *poly.shape)
    return vals, grads


def _real(vals: np.ndarray, what: str) -> np.ndarray:
    scale = max(1.0, float(np.max(np.abs(vals))) if vals.size else 0.0)
    if float(np.max(np.abs(vals.imag))) > _REAL_TOL * scale:
        raise RuntimeError(f"{what} lost reality: imag part {np.max(np.abs(vals.imag)):.2e}")
    return vals.real


def _apply_transform(T: StepTransform, rho: np.ndarray, phi: np.ndarray):
    """Map (rho, phi) one level up; return new coords and Jacobian blocks."""
    n1 = T.v0.shape[0]
    n2 = T.Phi.shape[0]
    v0, dv0 = _eval_with_grad(T.v0, phi)
    v1, dv1 = _eval_with_grad(T.v1, phi)
    Ph, dPh = _eval_with_grad(T.Phi, phi)
    v0 = _real(v0, "v0")[:, :, 0]
    v1 = _real(v1, "v1")
    Ph = _real(Ph, "Phi")[:, :, 0]
    dv0 = _real(dv0, "dv0")[:, :, 0, :]          # (N, n1, n2)
    dv1 = _real(dv1, "dv1")                       # (N, n1, n1, n2)
    dPh = _real(dPh, "dPhi")[:, :, 0, :]          # (N, n2, n2)
    I = rho + v0 + np.einsum("nij,nj->ni", v1, rho)
    varphi = phi + Ph
    A11 = np.eye(n1)[None] + v1
    A12 = dv0 + np.einsum("nijk,nj->nik", dv1, rho)
    A22 = np.eye(n2)[None] + dPh
    return I, varphi, (A11, A12, A22)


def pullback_field(transforms: list, base_field, rho: np.ndarray, phi: np.ndarray):
    """Evaluate the field of the current coordinates through the chain.

    transforms is ordered oldest first; composition applies the newest
    change first on the way out and unwinds the inverse Jacobians in the
    opposite order coming back.
    """
    blocks = []
    for T in reversed(transforms):
        rho, phi, blk = _apply_transform(T, rho, phi)
        blocks.append(blk)
    FI, Fphi = base_field(rho, phi)
    for (A11, A12, A22) in reversed(blocks):
        y = np.linalg.solve(A22, Fphi[..., None])[..., 0]
        rhs = FI - np.einsum("nij,nj->ni", A12, y)
        x = np.linalg.solve(A11, rhs[..., None])[..., 0]
        FI, Fphi = x, y
    return FI, Fphi


def compose_embedding(transforms: list, phi: np.ndarray, n1: int):
    """Image of the invariant section rho = 0 under the composed transform."""
    rho = np.zeros((phi.shape[0], n1))
    for T in reversed(transforms):
        rho, phi, _ = _apply_transform(T, rho, phi)
    return rho, phi


# -- field sampling -------------------------------------------------------


def base_field(spec: SystemSpec, xi, eps: float):
    """Full right-hand side of the system at parameter xi as a batch callable."""
    scal = model.scaling(spec, eps)
    omega0 = model.omega_scaled(spec, xi, eps)
    lam0 = model.lambda_scaled(spec, xi, eps)
    B = model.similarity(spec, xi, eps)
    A0 = _real_matrix(B @ np.diag(lam0) @ np.linalg.inv(B), "A0") if spec.n1 else np.zeros((0, 0))
    e0 = eps ** spec.q[1]

    def field(I_pts: np.ndarray, phi_pts: np.ndarray):
        batch = phi_pts.shape[:-1]
        parts1 = [_eval_g(spec.g1, spec.n11, I_pts, phi_pts, xi, eps, "g1"),
                  _eval_g(spec.g2, spec.n12, I_pts, phi_pts, xi, eps, "g2")]
        parts2 = [_eval_g(spec.g3, spec.n21, I_pts, phi_pts, xi, eps, "g3"),
                  _eval_g(spec.g4, spec.n22, I_pts, phi_pts, xi, eps, "g4")]
        G1 = e0 * np.concatenate(parts1, axis=-1)
        G2 = e0 * np.concatenate(parts2, axis=-1)
        FI = I_pts @ A0.T + scal.p1 * G1
        Fphi = omega0 + scal.p2 * G2
        return FI, Fphi.reshape(batch + (spec.n2,))

    return field, omega0, lam0, B, scal


def _real_matrix(M: np.ndarray, what: str) -> np.ndarray:
    if np.max(np.abs(M.imag)) > 1e-10 * max(1.0, np.max(np.abs(M))):
        raise ValueError(f"{what} is not a real matrix; conjugate-pair spectrum required")
    return M.real


def _eval_g(g, length, I_pts, phi_pts, xi, eps, label):
    if length == 0:
        return np.zeros(phi_pts.shape[:-1] + (0,))
    vals = np.asarray(g(I_pts, phi_pts, xi, eps), dtype=float)
    want = phi_pts.shape[:-1] + (length,)
    if vals.shape != want:
        vals = np.broadcast_to(vals, want).copy()
    if not np.all(np.isfinite(vals)):
        raise ValueError(f"non-finite value from {label}")
    return vals


def extract_lower_degree(G1_samples: np.ndarray, dG1_samples: np.ndarray,
                         G2_samples: np.ndarray, K: float):
    """Lower-degree jet on a grid: (u0, u1, w) truncated to degree K.

    G1_samples has grid shape + (n1,), dG1_samples grid shape + (n1, n1),
    G2_samples grid shape + (n2,); grid Nyquist must be >= K.
    """
    u0 = tp.truncate(tp.from_grid(np.asarray(G1_samples, complex)[..., None], real=True), K)
    u1 = tp.truncate(tp.from_grid(np.asarray(dG1_samples, complex), real=True), K)
    w = tp.truncate(tp.from_grid(np.asarray(G2_samples, complex)[..., None], real=True), K)
    return u0, u1, w


# -- run records ----------------------------------------------------------


@dataclass(frozen=True)
class Diagnostics:
    norm_u0: float
    norm_u1: float
    norm_w: float
    residual: float            # P-scaled invariance defect of the rho = 0 section
    omega_drift: float
    lambda_drift: float
    contraction: float
    K_used: int
    schedule_truncated: bool


@dataclass(frozen=True)
class StepRecord:
    transform: StepTransform | None
    stage: StageData
    diag: Diagnostics


@dataclass
class KamRun:
    steps: list = field(default_factory=list)
    status: str = MAX_STEPS
    resonant: tuple | None = None         # (k, m, divisor) of the halting mode
    omega0: np.ndarray | None = None
    lambda0: np.ndarray | None = None
    omega_star: np.ndarray | None = None
    lambda_star: np.ndarray | None = None
    schedule_truncated: bool = False
    drift_constant: float = 0.0
    failure: str = ""


@dataclass(frozen=True)
class TorusResult:
    V0: TrigPoly
    AngleShift: TrigPoly
    omega_star: np.ndarray
    lambda_star: np.ndarray
    residual: float


@dataclass(frozen=True)
class RunOptions:
    gamma: float
    tol: float = 1e-9
    max_steps: int = 8
    grid_n: int = 64
    r_tilde: float = 1.0
    check_margin: float = 0.25

    @property
    def K_cap(self) -> int:
        return max(2, (self.grid_n - 1) // 4)


class _State:
    def __init__(self, spec, xi, eps, opts, validation):
        self.spec = spec
        self.xi = np.asarray(xi, float)
        self.eps = eps
        self.opts = opts
        self.field, self.omega, self.Lambda, self.B, self.scal = base_field(spec, xi, eps)
        self.transforms = []
        self.nu = 0
        self.params = ScheduleParams(
            r_tilde=opts.r_tilde, l=spec.l, alpha=spec.alpha, iota=spec.iota,
            n2=spec.n2, n3=spec.n3, c1=max(validation.c1, 1e-12), gamma=opts.gamma)
        self.dims = tp.grid_shape_for_degree(spec.n2, opts.K_cap)
        self.grid = tp.canonical_grid(self.dims).reshape(-1, spec.n2)
        self.u0 = self.u1 = self.w = None

    def current_field(self, rho, phi):
        return pullback_field(self.transforms, self.field, rho, phi)

    def extract(self, K: float):
        """Sample the current field at rho = 0 and its rho-Jacobian, take the jet."""
        npts = self.grid.shape[0]
        n1 = self.spec.n1
        zero = np.zeros((npts, n1))
        FI0, Fphi0 = self.current_field(zero, self.grid)
        jac = np.zeros((npts, n1, n1))
        for i in range(n1):
            dI = np.zeros(n1)
            dI[i] = _JAC_STEP
            FIp, _ = self.current_field(zero + dI, self.grid)
            FIm, _ = self.current_field(zero - dI, self.grid)
            jac[:, :, i] = (FIp - FIm) / (2.0 * _JAC_STEP)
        A = _real_matrix(self.B @ np.diag(self.Lambda) @ np.linalg.inv(self.B), "A") \
            if n1 else np.zeros((0, 0))
        G1 = (FI0 / self.scal.p1).reshape(self.dims + (n1,))
        dG1 = ((jac - A[None]) / self.scal.p1[None, :, None]).reshape(self.dims + (n1, n1))
        G2 = ((Fphi0 - self.omega) / self.scal.p2).reshape(self.dims + (self.spec.n2,))
        return extract_lower_degree(G1, dG1, G2, K)


def _majorant(f: TrigPoly) -> float:
    return tp.strip_norm_bound(f, 0.0).value


def _stage_data(state: _State, sched: StageSchedule) -> StageData:
    return StageData(nu=state.nu, omega=state.omega, Lambda=state.Lambda,
                     B=state.B, schedule=sched)


def kam_step(state: _State, run_rec: KamRun) -> Diagnostics:
    """One iteration: solve, transform, update frequencies, re-extract.

    Raises Resonant when the nonresonance check at margin 1/4 fails or a
    divisor underflows inside a solve.
    """
    spec, opts = state.spec, state.opts
    sched = schedule(state.nu + 1, state.params)
    K_plus = min(sched.K, opts.K_cap)
    truncated = K_plus < sched.K
    gamma, eps, q5 = opts.gamma, state.eps, spec.q[4]

    stage = _stage_data(state, sched)
    rep = hm.check_nonresonance(stage, gamma, spec.iota, eps, q5,
                                K_lo=0.0, K_hi=float(K_plus), margin=opts.check_margin)
    if not rep.ok:
        raise Resonant(rep.worst_k, rep.worst_m,
                       hm.small_divisor(rep.worst_k, rep.worst_m, stage))

    u0, u1, w = state.u0, state.u1, state.w
    if not spec.analytic:
        u0 = sm.smooth_periodic(u0, min(sched.r, 1.0))
        u1 = sm.smooth_periodic(u1, min(sched.r, 1.0))
        w = sm.smooth_periodic(w, min(sched.r, 1.0))

    v0 = hm.solve_v0(u0, stage, state.scal.p1, K_plus)
    v1, lam_update = hm.solve_v1(u1, stage, state.scal.p1, K_plus)
    Phi, omega_update = hm.solve_phi(w, stage, state.scal.p2, K_plus)
    T = StepTransform(v0=v0, v1=v1, Phi=Phi, nu=state.nu, strip_radius=2.0 * sched.r)

    prev_norm = max(_majorant(state.u0), _majorant(state.w))
    state.omega = state.omega + state.scal.p2 * omega_update
    state.Lambda = state.Lambda + state.scal.p1 * lam_update
    state.transforms.append(T)
    state.nu += 1

    u0n, u1n, wn = state.extract(float(K_plus))
    state.u0, state.u1, state.w = u0n, u1n, wn

    new_norm = max(_majorant(u0n), _majorant(wn))
    contraction = new_norm / prev_norm if prev_norm > 0 else 0.0
    resid = max(float(np.max(state.scal.p1)) * _majorant(u0n),
                float(np.max(state.scal.p2)) * _majorant(wn))
    diag = Diagnostics(
        norm_u0=_majorant(u0n), norm_u1=_majorant(u1n), norm_w=_majorant(wn),
        residual=resid,
        omega_drift=float(np.max(np.abs(state.omega - run_rec.omega0))) if spec.n2 else 0.0,
        lambda_drift=float(np.max(np.abs(state.Lambda - run_rec.lambda0))) if spec.n1 else 0.0,
        contraction=contraction, K_used=K_plus, schedule_truncated=truncated)
    run_rec.steps.append(StepRecord(transform=T, stage=_stage_data(state, sched), diag=diag))
    run_rec.schedule_truncated |= truncated
    return diag


def _drift_constant(run_rec: KamRun, spec: SystemSpec, eps: float) -> float:
    """Smallest c with the block drifts below c eps^{pattern exponent}."""
    if run_rec.omega_star is None:
        return 0.0
    q1, q2, q3, q4, q5, q6, q7 = spec.q
    c = 0.0
    dw = np.abs(run_rec.omega_star - run_rec.omega0)
    dl = np.abs(run_rec.lambda_star - run_rec.lambda0)
    if spec.n21:
        c = max(c, float(np.max(dw[:spec.n21])) / eps ** (q5 + q6))
    if spec.n22:
        c = max(c, float(np.max(dw[spec.n21:])) / eps ** q7)
    if spec.n11:
        c = max(c, float(np.max(dl[:spec.n11])) / eps ** (q1 + q2))
    if spec.n12:
        c = max(c, float(np.max(dl[spec.n11:])) / eps ** (q3 + q4))
    return c


def run(spec: SystemSpec, xi, options: RunOptions):
    """Iterate to the invariant torus at one parameter value.

    Returns (KamRun, TorusResult or None).  Convergence is declared when
    the majorant max(|u0|, |w|) drops below options.tol; the composed
    transform then yields the embedding and the drifted frequencies.
    Two consecutive expansion steps report divergence; a resonant
    divisor halts with the offending mode pair.
    """
    report = model.validate(spec)
    if not report.ok:
        raise ValueError("spec rejected: " + "; ".join(report.violations))
    state = _State(spec, xi, spec.epsilon, options, report)
    run_rec = KamRun(omega0=state.omega.copy(), lambda0=state.Lambda.copy())

    state.u0, state.u1, state.w = state.extract(float(options.K_cap))
    expanding = 0
    for _ in range(options.max_steps):
        if max(_majorant(state.u0), _majorant(state.w)) <= options.tol:
            run_rec.status = CONVERGED
            break
        try:
            diag = kam_step(state, run_rec)
        except Resonant as res:
            run_rec.status = RESONANT_HALT
            run_rec.resonant = (res.k, res.m, res.divisor)
            break
        if diag.contraction > 1.0:
            expanding += 1
            if expanding >= 2:
                run_rec.status = DIVERGED
                break
        else:
            expanding = 0
    if run_rec.status == MAX_STEPS and \
            max(_majorant(state.u0), _majorant(state.w)) <= options.tol:
        run_rec.status = CONVERGED

    run_rec.omega_star = state.omega.copy()
    run_rec.lambda_star = state.Lambda.copy()
    run_rec.drift_constant = _drift_constant(run_rec, spec, spec.epsilon)

    torus = None
    if run_rec.status == CONVERGED:
        I_vals, phi_vals = compose_embedding(state.transforms, state.grid, spec.n1)
        shift = phi_vals - state.grid
        V0 = tp.truncate(tp.from_grid(
            I_vals.reshape(state.dims + (spec.n1, 1)).astype(complex), real=True), options.K_cap)
        AngleShift = tp.truncate(tp.from_grid(
            shift.reshape(state.dims + (spec.n2, 1)).astype(complex), real=True), options.K_cap)
        torus = TorusResult(V0=V0, AngleShift=AngleShift,
                            omega_star=state.omega.copy(),
                            lambda_star=state.Lambda.copy(), residual=np.nan)
        resid = invariance_residual(torus, spec, xi, state.dims[0])
        if resid > 10.0 * options.tol:
            # the majorants passed but the torus fails verification: spurious
            # convergence (typically truncation-limited at large eps)
            run_rec.status = DIVERGED
            run_rec.failure = f"invariance residual {resid:.3e} exceeds 10*tol"
            torus = None
        else:
            torus = TorusResult(V0=V0, AngleShift=AngleShift, omega_star=torus.omega_star,
                                lambda_star=torus.lambda_star, residual=resid)
    return run_rec, torus


def invariance_residual(torus: TorusResult, spec: SystemSpec, xi, grid_N: int) -> float:
    """Independent invariance defect of the embedded torus on a fresh grid.

    Compares the phi-derivative of the embedding along the limit
    frequencies against the field at the embedded points; components are
    scaled by the inverse P-blocks.  grid_N must resolve the embedding
    (at least 2 * degree + 1 points per angle).
    """
    deg = max(torus.V0.support_degree(), torus.AngleShift.support_degree())
    if grid_N < 2 * deg + 1:
        raise ValueError(f"grid_N = {grid_N} cannot resolve degree {deg}")
    dims = (int(grid_N),) * spec.n2
    grid = tp.canonical_grid(dims).reshape(-1, spec.n2)
    field, omega0, lam0, B, scal = base_field(spec, xi, spec.epsilon)

    I_emb = _real(tp.sample_grid(torus.V0, dims), "V0").reshape(-1, spec.n1)
    shift = _real(tp.sample_grid(torus.AngleShift, dims), "shift").reshape(-1, spec.n2)
    phi_emb = grid + shift

    dV0 = tp.directional_derivative(torus.V0, torus.omega_star)
    dSh = tp.directional_derivative(torus.AngleShift, torus.omega_star)
    lhs_I = _real(tp.sample_grid(dV0, dims), "dV0").reshape(-1, spec.n1)
    lhs_phi = torus.omega_star + _real(tp.sample_grid(dSh, dims), "dShift").reshape(-1, spec.n2)

    FI, Fphi = field(I_emb, phi_emb)
    rI = (lhs_I - FI) / scal.p1
    rphi = (lhs_phi - Fphi) / scal.p2
    vals = [np.max(np.abs(rI)) if spec.n1 else 0.0, np.max(np.abs(rphi)) if spec.n2 else 0.0]
    return float(max(vals))
