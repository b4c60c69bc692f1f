import math

import numpy as np
import pytest

from kamtori import bounds
from kamtori.bounds import DivisorSumInput, TailBoundInput

GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0


class TestTailConstant:
    def test_dimension_constants(self):
        assert bounds.tail_constant(1) == pytest.approx(6.0 / np.e, rel=1e-12)
        assert bounds.tail_constant(2) == pytest.approx(48.0 * np.exp(-2.0), rel=1e-12)

    def test_inapplicable_below_cutoff(self):
        with pytest.raises(bounds.BoundInapplicable):
            bounds.truncation_tail_bound(TailBoundInput(n=1, f_norm_r=1.0, rho=0.1, K=5.0))

    def test_decaying_series_example(self):
        # f = sum_{|k|<=40} e^{-0.3|k|} e^{i k phi}; tail past K=20 on the
        # narrowed strip, bounded via the majorant at r = 0.3
        from kamtori import trigpoly as tp
        coeffs = {(k,): np.array([[np.exp(-0.3 * abs(k))]], complex) for k in range(-40, 41)}
        f = tp.TrigPoly(1, (1, 1), coeffs, real=True)
        r, rho, K = 0.3, 0.1, 20.0
        tail = f - tp.truncate(f, K)
        measured = tp.strip_sup_grid(tail, r - 2 * rho)
        bound = bounds.truncation_tail_bound(TailBoundInput(
            n=1, f_norm_r=tp.strip_norm_bound(f, r).value, rho=rho, K=K))
        assert measured <= bound


class TestDivisorSum:
    def test_two_term_arithmetic(self):
        inp = DivisorSumInput(omega=(1.0,), lam=0.0, tau=0.5, b=1.0, v=0.0, sigma=0.5, K=1.0)
        total = bounds.smalldivisor_sum(inp)
        assert total == pytest.approx(2.0 * np.exp(-0.5), rel=1e-12)

    def test_dominated_by_large_shift(self):
        # lam far from every <k, omega>: sum close to |lam|^-b * sum e^{-sigma |k|_1}
        lam = 1e6
        inp = DivisorSumInput(omega=(1.0,), lam=lam, tau=0.5, b=1.0, v=0.0, sigma=0.3, K=30.0)
        total = bounds.smalldivisor_sum(inp)
        envelope = sum(np.exp(-0.3 * abs(k)) for k in range(-30, 31) if k != 0)
        assert total == pytest.approx(envelope / lam, rel=1e-3)

    def test_cutoff_stability_golden(self):
        base = dict(omega=(1.0, GOLDEN), lam=0.1, tau=1.5, b=2.0, v=1.0, sigma=0.1)
        s200 = bounds.smalldivisor_sum(DivisorSumInput(K=200.0, **base))
        s300 = bounds.smalldivisor_sum(DivisorSumInput(K=300.0, **base))
        assert np.isfinite(s200)
        cert = bounds.cutoff_tail_bound(DivisorSumInput(K=200.0, **base))
        assert 0 <= s300 - s200 <= cert

    def test_hypothesis_violation_detected(self):
        with pytest.raises(bounds.DivisorHypothesisViolation):
            bounds.smalldivisor_sum(DivisorSumInput(
                omega=(1.0, 1.0), lam=0.0, tau=1.5, b=1.0, v=0.0, sigma=0.2, K=5.0))


class TestDivisorBound:
    def test_constant_assembly_term_by_term(self):
        n, tau, b, v = 2, 1.5, 1.0, 0.0
        tb = tau * b + v
        expected = (15.0 * tau) * math.sqrt(tb) * 2.0 ** (2 * (n + b) - 3) \
            * n ** (tb + 1) * (1.0 / (tau * b - n + 1.0)) * (tb / math.e) ** tb
        assert bounds.smalldivisor_constant(n, tau, b, v) == pytest.approx(expected, rel=1e-13)

    def test_monotone_in_gamma_and_sigma(self):
        def bound(gamma, sigma):
            return bounds.smalldivisor_bound(DivisorSumInput(
                omega=(1.0, GOLDEN), lam=0.0, tau=1.5, b=1.0, v=0.0,
                sigma=sigma, K=50.0, gamma=gamma))
        assert bound(0.1, 0.2) > bound(0.2, 0.2)
        assert bound(0.1, 0.1) > bound(0.1, 0.2)

    def test_golden_mean_sum_below_bound(self):
        inp = DivisorSumInput(omega=(1.0, GOLDEN), lam=0.0, tau=1.5, b=2.0, v=1.0,
                              sigma=0.1, K=200.0)
        total, gamma_emp, _ = bounds.smalldivisor_scan(inp)
        bound = bounds.smalldivisor_bound(DivisorSumInput(
            omega=(1.0, GOLDEN), lam=0.0, tau=1.5, b=2.0, v=1.0,
            sigma=0.1, K=200.0, gamma=gamma_emp))
        assert total <= bound


@pytest.mark.parametrize("norm", ["l2", "l1"])
def test_randomized_inequality_small_batch(norm):
    # 20-case miniature of the acceptance sweep, both hypothesis norms
    rng = np.random.default_rng(2024)
    for _ in range(20):
        n = int(rng.integers(1, 3))
        if n == 1:
            omega = (1.0,)
        else:
            omega = (1.0, GOLDEN + rng.uniform(-0.05, 0.05))
        inp = DivisorSumInput(
            omega=omega, lam=float(rng.uniform(0.05, 2.0)),
            tau=float(rng.uniform(max(0.2, n - 1 + 0.1), 2.5)),
            b=float(rng.integers(1, 3)), v=float(rng.integers(0, 2)),
            sigma=float(rng.uniform(0.05, 0.5)), K=80.0, dioph_norm=norm)
        try:
            total, gamma_emp, _ = bounds.smalldivisor_scan(inp)
        except bounds.DivisorHypothesisViolation:
            continue
        b = bounds.smalldivisor_bound(DivisorSumInput(
            omega=inp.omega, lam=inp.lam, tau=inp.tau, b=inp.b, v=inp.v,
            sigma=inp.sigma, K=inp.K, gamma=gamma_emp, dioph_norm=norm))
        assert total <= b
