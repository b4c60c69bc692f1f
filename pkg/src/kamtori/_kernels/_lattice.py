"""Integer lattice enumeration shared by all divisor scans."""

from functools import lru_cache

import numpy as np

_MAX_CANDIDATES = 2 * 10**8


@lru_cache(maxsize=64)
def _cube(n: int, kmax: int):
    if (2 * kmax + 1) ** n > _MAX_CANDIDATES:
        raise ValueError(f"lattice cube (2*{kmax}+1)^{n} too large")
    ax = np.arange(-kmax, kmax + 1, dtype=np.int64)
    mesh = np.meshgrid(*([ax] * n), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def lattice_shell(n: int, k_lo: float, k_hi: float, norm: str = "l2") -> np.ndarray:
    """All k in Z^n with k_lo < |k| <= k_hi, shape (Nk, n).

    norm 'l2' uses |k|_2, 'l1' uses |k|_1.  k_lo >= 0 excludes the
    origin.  Rows are ordered by (|k|, lexicographic), so argmin ties in
    the scan kernels resolve to the most fundamental mode.
    """
    if k_hi < k_lo:
        raise ValueError("empty shell: k_hi < k_lo")
    pts = _cube(int(n), int(np.floor(k_hi)))
    if norm == "l2":
        r = np.sqrt(np.sum(pts.astype(float) ** 2, axis=1))
    elif norm == "l1":
        r = np.sum(np.abs(pts), axis=1).astype(float)
    else:
        raise ValueError(f"unknown norm {norm!r}")
    mask = (r > k_lo) & (r <= k_hi)
    pts, r = pts[mask], r[mask]
    order = np.lexsort(tuple(pts[:, j] for j in range(n - 1, -1, -1)) + (r,))
    return pts[order]


def norms(kvecs: np.ndarray):
    """(|k|_2, |k|_1) column vectors for an (Nk, n) integer array."""
    kf = kvecs.astype(float)
    return np.sqrt(np.sum(kf * kf, axis=1)), np.sum(np.abs(kf), axis=1)
