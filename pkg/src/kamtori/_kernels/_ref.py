"""Pure-numpy reference implementations of the divisor-scan kernels.

Semantics match kamtori._kernels._core exactly; used when the compiled
extension is unavailable or KAMTORI_PURE is set.
"""

import numpy as np

_CHUNK = 512


def min_divisor_ratio_batch(kvecs, kpow, omegas, mre, mim):
    """Per-sample minimum of |i<k,omega> + mdot| * kpow over all (k, m).

    Parameters
    ----------
    kvecs : (Nk, n) float64, lattice points
    kpow : (Nk,) float64, weight per lattice point (e.g. |k|_2**iota)
    omegas : (Ns, n) float64, one frequency vector per sample
    mre, mim : (Ns, Nm) float64, real/imaginary parts of <m, Lambda>
        per sample and m-pattern

    Returns
    -------
    ratio : (Ns,) minimum weighted divisor magnitude
    arg_k : (Ns,) int64 index into kvecs of the minimizer
    arg_m : (Ns,) int64 index of the minimizing m-pattern
    """
    Ns = omegas.shape[0]
    ratio = np.full(Ns, np.inf)
    arg_k = np.zeros(Ns, dtype=np.int64)
    arg_m = np.zeros(Ns, dtype=np.int64)
    for lo in range(0, Ns, _CHUNK):
        hi = min(lo + _CHUNK, Ns)
        t = omegas[lo:hi] @ kvecs.T                       # (b, Nk)
        best = np.full(hi - lo, np.inf)
        bk = np.zeros(hi - lo, dtype=np.int64)
        bm = np.zeros(hi - lo, dtype=np.int64)
        for m in range(mre.shape[1]):
            im = t + mim[lo:hi, m:m + 1]
            mag = np.sqrt(mre[lo:hi, m:m + 1] ** 2 + im * im) * kpow[None, :]
            j = np.argmin(mag, axis=1)
            val = mag[np.arange(hi - lo), j]
            upd = val < best
            best[upd] = val[upd]
            bk[upd] = j[upd]
            bm[upd] = m
        ratio[lo:hi] = best
        arg_k[lo:hi] = bk
        arg_m[lo:hi] = bm
    return ratio, arg_k, arg_m


def divisor_sum_reduce(kdotw, weights, hyp_pow, lam, b):
    """Weighted small-divisor sum plus Diophantine scan over one lattice.

    Returns (total, gamma_emp, min_abs) with
      total     = sum_i weights[i] * |kdotw[i] + lam|**(-b)
      gamma_emp = min_i min(|kdotw[i]|, |kdotw[i]+lam|) * hyp_pow[i]
      min_abs   = min_i min(|kdotw[i]|, |kdotw[i]+lam|)
    """
    a0 = np.abs(kdotw)
    a1 = np.abs(kdotw + lam)
    with np.errstate(divide="ignore"):
        total = float(np.sum(weights * a1 ** (-float(b))))
    both = np.minimum(a0, a1)
    gamma_emp = float(np.min(both * hyp_pow)) if kdotw.size else np.inf
    min_abs = float(np.min(both)) if kdotw.size else np.inf
    return total, gamma_emp, min_abs
