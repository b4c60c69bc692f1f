"""Multivariate trigonometric polynomials on the torus.

A TrigPoly is a finitely supported Fourier series

    f(phi) = sum_k  c_k  exp(i <k, phi>),        k in Z^n_angles,

whose coefficients c_k are complex (rows, cols) matrices.  Vectors are
stored as (n, 1) matrices and scalars as (1, 1).  Values are immutable
after construction; every operation returns a new instance.

Two mode norms are used and never conflated: the euclidean |k|_2 for
truncation radii and small-divisor exponents, and |k|_1 for exponential
strip weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "TrigPoly",
    "StripNorm",
    "truncate",
    "strip_norm_bound",
    "from_grid",
    "evaluate",
    "directional_derivative",
    "compose_angle",
    "grid_shape_for_degree",
]

# relative magnitude below which from_grid discards a harvested mode
_GRID_DROP = 1e-15


def _as_key(k) -> tuple:
    return tuple(int(x) for x in np.atleast_1d(k))


def _k2(k) -> float:
    return float(np.sqrt(sum(x * x for x in k)))


def _k1(k) -> int:
    return int(sum(abs(x) for x in k))


@dataclass(frozen=True)
class StripNorm:
    """Majorant for sup |f| on the complex strip |Im phi| < radius."""

    radius: float
    value: float


class TrigPoly:
    """Finitely supported Fourier series with matrix coefficients.

    Parameters
    ----------
    n_angles : int
        Dimension of the angle variable phi.
    shape : tuple of int
        (rows, cols) of every coefficient matrix.
    coeffs : dict
        Map from integer tuples k to complex (rows, cols) arrays.
        Absent keys mean zero.  Entries are copied and frozen.
    declared_degree : float, optional
        Radius K with |k|_2 <= K for all stored k.  Defaults to the
        support maximum.
    real : bool, optional
        Marks the poly as real-valued on the real torus; requires the
        Hermitian symmetry c_{-k} = conj(c_k).
    """

    __slots__ = ("n_angles", "shape", "coeffs", "declared_degree", "real")

    def __init__(self, n_angles, shape, coeffs, declared_degree=None, real=False):
        n_angles = int(n_angles)
        if n_angles < 1:
            raise ValueError("n_angles must be >= 1")
        shape = (int(shape[0]), int(shape[1]))
        clean = {}
        maxdeg = 0.0
        for k, c in coeffs.items():
            key = _as_key(k)
            if len(key) != n_angles:
                raise ValueError(f"mode {key} has wrong length for n_angles={n_angles}")
            arr = np.asarray(c, dtype=complex)
            if arr.shape != shape:
                raise ValueError(f"coefficient at {key} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr.view(float))):
                raise ValueError(f"non-finite coefficient at mode {key}")
            if np.any(arr != 0):
                arr = arr.copy()
                arr.setflags(write=False)
                clean[key] = arr
                maxdeg = max(maxdeg, _k2(key))
        if declared_degree is None:
            declared_degree = maxdeg
        declared_degree = float(declared_degree)
        if declared_degree + 1e-9 < maxdeg:
            raise ValueError(f"support radius {maxdeg} exceeds declared degree {declared_degree}")
        object.__setattr__(self, "n_angles", n_angles)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "coeffs", clean)
        object.__setattr__(self, "declared_degree", declared_degree)
        object.__setattr__(self, "real", bool(real))

    def __setattr__(self, name, value):
        raise AttributeError("TrigPoly is immutable")

    # -- basic queries -------------------------------------------------

    def coeff(self, k) -> np.ndarray:
        """Coefficient at mode k (zeros if absent)."""
        return self.coeffs.get(_as_key(k), _ZEROS.setdefault(self.shape, np.zeros(self.shape, complex)))

    def mean(self) -> np.ndarray:
        return self.coeff((0,) * self.n_angles)

    @property
    def n_modes(self) -> int:
        return len(self.coeffs)

    def support_degree(self) -> float:
        """Largest |k|_2 actually present (0 for the zero poly)."""
        return max((_k2(k) for k in self.coeffs), default=0.0)

    def __repr__(self):
        return (f"TrigPoly(n_angles={self.n_angles}, shape={self.shape}, "
                f"modes={self.n_modes}, degree={self.declared_degree:g}, real={self.real})")

    # -- constructors ---------------------------------------------------

    @staticmethod
    def zero(n_angles, shape, real=True) -> "TrigPoly":
        return TrigPoly(n_angles, shape, {}, 0.0, real=real)

    @staticmethod
    def constant(n_angles, value, real=None) -> "TrigPoly":
        value = np.atleast_2d(np.asarray(value, dtype=complex))
        if real is None:
            real = bool(np.all(value.imag == 0))
        return TrigPoly(n_angles, value.shape, {(0,) * n_angles: value}, 0.0, real=real)

    # -- arithmetic -----------------------------------------------------

    def __add__(self, other: "TrigPoly") -> "TrigPoly":
        self._compat(other)
        keys = set(self.coeffs) | set(other.coeffs)
        out = {k: self.coeff(k) + other.coeff(k) for k in keys}
        deg = max(self.declared_degree, other.declared_degree)
        return TrigPoly(self.n_angles, self.shape, out, deg, real=self.real and other.real)

    def __sub__(self, other: "TrigPoly") -> "TrigPoly":
        return self + (other * (-1.0))

    def __mul__(self, scalar) -> "TrigPoly":
        s = complex(scalar)
        out = {k: c * s for k, c in self.coeffs.items()}
        return TrigPoly(self.n_angles, self.shape, out, self.declared_degree,
                        real=self.real and s.imag == 0)

    __rmul__ = __mul__

    def left_matmul(self, a) -> "TrigPoly":
        """Mode-wise product a @ c_k with a constant matrix a."""
        a = np.atleast_2d(np.asarray(a, dtype=complex))
        out = {k: a @ c for k, c in self.coeffs.items()}
        return TrigPoly(self.n_angles, (a.shape[0], self.shape[1]), out, self.declared_degree,
                        real=self.real and np.all(a.imag == 0))

    def right_matmul(self, a) -> "TrigPoly":
        """Mode-wise product c_k @ a with a constant matrix a."""
        a = np.atleast_2d(np.asarray(a, dtype=complex))
        out = {k: c @ a for k, c in self.coeffs.items()}
        return TrigPoly(self.n_angles, (self.shape[0], a.shape[1]), out, self.declared_degree,
                        real=self.real and np.all(a.imag == 0))

    def _compat(self, other):
        if self.n_angles != other.n_angles or self.shape != other.shape:
            raise ValueError("incompatible TrigPoly operands")

    # -- symmetry -------------------------------------------------------

    def hermitian_defect(self) -> float:
        """max_k |c_{-k} - conj(c_k)|, the deviation from real-valuedness."""
        d = 0.0
        for k, c in self.coeffs.items():
            nk = tuple(-x for x in k)
            d = max(d, float(np.max(np.abs(self.coeff(nk) - np.conj(c)))))
        return d

    def symmetrized(self, real=True) -> "TrigPoly":
        """Average c_k with conj(c_{-k}) and flag the result real."""
        keys = set(self.coeffs) | {tuple(-x for x in k) for k in self.coeffs}
        out = {k: 0.5 * (self.coeff(k) + np.conj(self.coeff(tuple(-x for x in k)))) for k in keys}
        return TrigPoly(self.n_angles, self.shape, out, self.declared_degree, real=real)


_ZEROS: dict = {}


# -- operations ---------------------------------------------------------


def truncate(f: TrigPoly, K: float) -> TrigPoly:
    """Apply the truncation operator, keeping exactly the modes |k|_2 <= K."""
    K = float(K)
    if K < 0:
        raise ValueError("truncation radius must be >= 0")
    out = {k: c for k, c in f.coeffs.items() if _k2(k) <= K}
    return TrigPoly(f.n_angles, f.shape, out, K, real=f.real)


def strip_norm_bound(f: TrigPoly, r: float) -> StripNorm:
    """Majorant sum_k max|c_k| exp(r |k|_1) for sup |f| on the strip of radius r.

    An upper bound, not the exact strip sup; exact on single modes.
    """
    r = float(r)
    if r < 0:
        raise ValueError("strip radius must be >= 0")
    total = 0.0
    for k, c in f.coeffs.items():
        total += float(np.max(np.abs(c))) * np.exp(r * _k1(k))
    return StripNorm(r, total)


def _fft_int_freqs(n: int) -> np.ndarray:
    return np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)


def _neg_mod(k, dims):
    # negation inside the fftfreq integer range; the even-N edge mode -N/2
    # is its own partner
    return tuple(int((-kj + nj // 2) % nj - nj // 2) for kj, nj in zip(k, dims))


def from_grid(samples: np.ndarray, real: bool = False) -> TrigPoly:
    """Discrete Fourier transform of samples on a uniform product grid.

    Parameters
    ----------
    samples : ndarray
        Shape (N_1, ..., N_n, rows, cols) with N_j >= 2 grid points per
        angle; grid point g has phi_j = 2 pi g_j / N_j.
    real : bool
        Hermitian-symmetrize the coefficients and flag the result real.

    Returns
    -------
    TrigPoly with declared_degree set to the Nyquist radius
    |(N_1//2, ..., N_n//2)|_2.  Content of the sampled function above
    the Nyquist frequency aliases into the result; the caller must
    oversample.
    """
    samples = np.asarray(samples, dtype=complex)
    if samples.ndim < 3:
        raise ValueError("samples must have shape (N_1, .., N_n, rows, cols)")
    if not np.all(np.isfinite(samples.view(float))):
        raise ValueError("non-finite sample values")
    n = samples.ndim - 2
    dims = samples.shape[:n]
    if any(N < 2 for N in dims):
        raise ValueError("need at least 2 grid points per angle")
    shape = samples.shape[n:]
    spec = np.fft.fftn(samples, axes=tuple(range(n))) / np.prod(dims)
    scale = float(np.max(np.abs(spec))) if spec.size else 0.0
    freqs = [_fft_int_freqs(N) for N in dims]
    mags = np.max(np.abs(spec).reshape(dims + (-1,)), axis=-1)
    keep = np.argwhere(mags > _GRID_DROP * scale)
    out = {}
    for idx in keep:
        k = tuple(int(freqs[j][idx[j]]) for j in range(n))
        out[k] = spec[tuple(idx)]
    nyq = _k2([N // 2 for N in dims])
    poly = TrigPoly(n, shape, out, nyq, real=False)
    if real:
        poly = poly.symmetrized(real=True)
        poly = TrigPoly(n, shape, poly.coeffs, nyq, real=True)
    return poly


def evaluate(f: TrigPoly, phi) -> np.ndarray:
    """Evaluate f at a single (real or complex) angle vector."""
    phi = np.asarray(phi, dtype=complex).reshape(-1)
    if phi.size != f.n_angles:
        raise ValueError(f"phi has length {phi.size}, expected {f.n_angles}")
    acc = np.zeros(f.shape, dtype=complex)
    for k, c in f.coeffs.items():
        acc = acc + c * np.exp(1j * np.dot(np.asarray(k, float), phi))
    return acc


def evaluate_points(f: TrigPoly, pts: np.ndarray, chunk: int = 8192) -> np.ndarray:
    """Evaluate f at an array of points, shape (m, n_angles) -> (m, rows, cols)."""
    pts = np.asarray(pts)
    if pts.ndim == 1:
        pts = pts[None, :]
    m = pts.shape[0]
    out = np.zeros((m,) + f.shape, dtype=complex)
    if not f.coeffs:
        return out
    kmat = np.array(list(f.coeffs), dtype=float)            # (M, n)
    cmat = np.stack([f.coeffs[tuple(int(x) for x in k)] for k in kmat])  # (M, r, c)
    cflat = cmat.reshape(len(kmat), -1)
    for lo in range(0, m, chunk):
        hi = min(lo + chunk, m)
        E = np.exp(1j * pts[lo:hi] @ kmat.T)                 # (b, M)
        out[lo:hi] = (E @ cflat).reshape(hi - lo, *f.shape)
    return out


def directional_derivative(f: TrigPoly, omega) -> TrigPoly:
    """Derivative along the flow, sum_j omega_j d f / d phi_j.

    Mode k is multiplied by i <k, omega>; the mean is annihilated.
    """
    omega = np.asarray(omega, dtype=float).reshape(-1)
    if omega.size != f.n_angles:
        raise ValueError("omega has wrong length")
    out = {}
    for k, c in f.coeffs.items():
        fac = 1j * float(np.dot(np.asarray(k, float), omega))
        if fac != 0:
            out[k] = c * fac
    return TrigPoly(f.n_angles, f.shape, out, f.declared_degree, real=f.real)


def grid_shape_for_degree(n_angles: int, K: float) -> tuple:
    """Smallest power-of-two grid with at least 4K+1 points per dimension.

    Oversampling by 4 suppresses aliasing of quadratic nonlinearities at
    the working truncation.
    """
    need = int(np.ceil(4 * float(K) + 1))
    N = 4
    while N < need:
        N *= 2
    return (N,) * n_angles


def canonical_grid(dims) -> np.ndarray:
    """Uniform product grid, shape (N_1, .., N_n, n) with phi_j = 2 pi g_j / N_j."""
    axes = [2.0 * np.pi * np.arange(N) / N for N in dims]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack(mesh, axis=-1)


def sample_grid(f: TrigPoly, dims, im_shift=None) -> np.ndarray:
    """Sample f on the canonical grid by zero-embedded inverse FFT.

    dims must resolve the support (N_j > 2 max|k_j|).  With im_shift a
    real n-vector y, samples f(x + i y) on the real grid x.
    """
    dims = tuple(int(N) for N in dims)
    if len(dims) != f.n_angles:
        raise ValueError("dims has wrong length")
    spec = np.zeros(dims + f.shape, dtype=complex)
    for k, c in f.coeffs.items():
        if any(abs(kj) > (Nj - 1) // 2 and not (2 * abs(kj) == Nj and kj < 0) for kj, Nj in zip(k, dims)):
            raise ValueError(f"grid {dims} cannot resolve mode {k}")
        w = 1.0 if im_shift is None else np.exp(-float(np.dot(np.asarray(k, float), im_shift)))
        spec[tuple(kj % Nj for kj, Nj in zip(k, dims))] = c * w
    vals = np.fft.ifftn(spec, axes=tuple(range(f.n_angles))) * np.prod(dims)
    return vals


def compose_angle(f: TrigPoly, Phi: TrigPoly, K_out: float) -> TrigPoly:
    """Angle substitution f(phi + Phi(phi)), truncated to degree K_out.

    Phi must be a real-valued (n_angles, 1) poly.  The substitution is
    sampled on the oversampled canonical grid and re-expanded; content
    beyond K_out aliases and is accepted.
    """
    if Phi.shape != (f.n_angles, 1):
        raise ValueError(f"Phi must have shape ({f.n_angles}, 1)")
    if not Phi.real:
        raise ValueError("Phi must be real-valued")
    dims = grid_shape_for_degree(f.n_angles, K_out)
    grid = canonical_grid(dims)
    shift = sample_grid(Phi, dims).real[..., 0]               # (N.., n)
    pts = (grid + shift).reshape(-1, f.n_angles)
    vals = evaluate_points(f, pts).reshape(dims + f.shape)
    out = from_grid(vals, real=f.real)
    return truncate(out, K_out)


def strip_sup_grid(f: TrigPoly, rho: float, dims=None) -> float:
    """Grid-measured sup of |f| on the closed strip |Im phi_j| <= rho.

    Scans the real grid shifted to every corner Im phi in {-rho, +rho}^n
    (where the sup of a finite series lives) plus the real torus.  A
    lower bound for the true strip sup, so safe on the oracle side of
    tail-bound comparisons.
    """
    if dims is None:
        deg = max(1, int(np.ceil(f.support_degree())))
        N = 4
        while N < 2 * deg + 2:
            N *= 2
        dims = (N,) * f.n_angles
    best = 0.0
    shifts = [np.zeros(f.n_angles)]
    if rho > 0:
        from itertools import product
        shifts += [rho * np.array(s, float) for s in product((-1.0, 1.0), repeat=f.n_angles)]
    for y in shifts:
        vals = sample_grid(f, dims, im_shift=y)
        best = max(best, float(np.max(np.abs(vals))))
    return best


# -- JSON serialization --------------------------------------------------


def to_json_dict(f: TrigPoly) -> dict:
    """Serialize as {n_angles, shape, entries: [{k, re, im}]}."""
    entries = []
    for k in sorted(f.coeffs):
        c = f.coeffs[k]
        entries.append({"k": list(k), "re": c.real.tolist(), "im": c.imag.tolist()})
    return {"n_angles": f.n_angles, "shape": list(f.shape), "entries": entries}


def from_json_dict(d: dict) -> TrigPoly:
    shape = tuple(d["shape"])
    coeffs = {}
    for e in d["entries"]:
        coeffs[tuple(e["k"])] = np.asarray(e["re"], float) + 1j * np.asarray(e["im"], float)
    poly = TrigPoly(d["n_angles"], shape, coeffs)
    if poly.hermitian_defect() <= 1e-12 * max(1.0, strip_norm_bound(poly, 0.0).value):
        poly = TrigPoly(d["n_angles"], shape, poly.coeffs, poly.declared_degree, real=True)
    return poly
