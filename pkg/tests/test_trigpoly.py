import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kamtori import bounds
from kamtori import trigpoly as tp
from kamtori.trigpoly import TrigPoly


def cos_poly(k=1, n=1):
    key = tuple([k] + [0] * (n - 1))
    nkey = tuple(-x for x in key)
    return TrigPoly(n, (1, 1), {key: [[0.5]], nkey: [[0.5]]}, real=True)


def sin_poly(k=1, n=1):
    key = tuple([k] + [0] * (n - 1))
    nkey = tuple(-x for x in key)
    return TrigPoly(n, (1, 1), {key: [[-0.5j]], nkey: [[0.5j]]}, real=True)


from tests_support import random_real_poly


class TestTruncate:
    def test_mode_selection(self):
        f = cos_poly(1) + cos_poly(5)
        g = tp.truncate(f, 3)
        assert sorted(g.coeffs) == [(-1,), (1,)]
        np.testing.assert_allclose(g.coeff((1,)), [[0.5]])

    def test_identity_when_degree_covered(self):
        f = cos_poly(1) + cos_poly(5)
        g = tp.truncate(f, 10)
        assert g.coeffs.keys() == f.coeffs.keys()
        assert g.declared_degree == 10

    def test_l2_radius_keeps_boundary_modes(self):
        # |(3,4)|_2 = 5 exactly: both modes survive K = 5
        f = TrigPoly(2, (1, 1), {(3, 4): [[1.0]], (-3, -4): [[1.0]],
                                 (1, 0): [[2.0]], (-1, 0): [[2.0]]}, real=True)
        g = tp.truncate(f, 5)
        assert set(g.coeffs) == {(3, 4), (-3, -4), (1, 0), (-1, 0)}

    def test_idempotent_and_composition(self):
        rng = np.random.default_rng(7)
        f = random_real_poly(rng, 2, 6.0)
        a = tp.truncate(tp.truncate(f, 4), 4)
        b = tp.truncate(f, 4)
        assert a.coeffs.keys() == b.coeffs.keys()
        c = tp.truncate(tp.truncate(f, 5), 3)
        d = tp.truncate(f, 3)
        assert c.coeffs.keys() == d.coeffs.keys()


class TestStripNorm:
    def test_single_mode(self):
        f = TrigPoly(1, (1, 1), {(1,): [[1.0]]})
        sn = tp.strip_norm_bound(f, 0.5)
        assert sn.value == pytest.approx(np.exp(0.5), rel=1e-14)

    def test_zero(self):
        assert tp.strip_norm_bound(TrigPoly.zero(1, (1, 1)), 1.0).value == 0.0

    def test_majorant_dominates_strip_sup(self):
        f = cos_poly()
        sn = tp.strip_norm_bound(f, 1.0)
        assert sn.value == pytest.approx(np.e, rel=1e-14)
        true_sup = np.cosh(1.0)  # cos on the strip boundary
        assert sn.value >= true_sup
        assert tp.strip_sup_grid(f, 1.0) == pytest.approx(true_sup, rel=1e-12)

    def test_majorant_dominates_random_polys(self):
        rng = np.random.default_rng(23)
        for _ in range(10):
            f = random_real_poly(rng, 2, 5.0)
            r = rng.uniform(0.0, 0.6)
            assert tp.strip_norm_bound(f, r).value >= tp.strip_sup_grid(f, r) - 1e-12

    def test_immutability(self):
        f = cos_poly()
        with pytest.raises(AttributeError):
            f.real = False
        f.coeff((1,)).flags.writeable is False


class TestFromGrid:
    def test_cos_exact(self):
        grid = tp.canonical_grid((8,))
        vals = np.cos(grid[..., 0])[:, None, None]
        f = tp.from_grid(vals, real=True)
        assert set(f.coeffs) == {(1,), (-1,)}
        np.testing.assert_allclose(f.coeff((1,)), [[0.5]], atol=1e-15)

    def test_constant(self):
        vals = np.full((8, 1, 1), 2.5, dtype=complex)
        f = tp.from_grid(vals, real=True)
        assert set(f.coeffs) == {(0,)}
        np.testing.assert_allclose(f.mean(), [[2.5]])

    def test_aliasing_documented(self):
        # 5 = -3 mod 8: undersampled cos(5 phi) lands on modes +-3
        grid = tp.canonical_grid((8,))
        vals = np.cos(5 * grid[..., 0])[:, None, None]
        f = tp.from_grid(vals, real=True)
        assert set(f.coeffs) == {(3,), (-3,)}

    def test_rejects_nonfinite(self):
        vals = np.ones((8, 1, 1), dtype=complex)
        vals[3] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            tp.from_grid(vals)


class TestEvaluate:
    def test_cos_at_zero(self):
        assert tp.evaluate(cos_poly(), [0.0])[0, 0] == pytest.approx(1.0)

    def test_cos_at_imaginary(self):
        v = tp.evaluate(cos_poly(), [1j])
        assert v[0, 0] == pytest.approx(np.cosh(1.0), rel=1e-14)

    @pytest.mark.parametrize("n,dims", [(1, (16,)), (2, (16, 16))])
    def test_grid_roundtrip(self, n, dims):
        rng = np.random.default_rng(3 + n)
        f = random_real_poly(rng, n, 5.0, shape=(2, 1))
        vals = tp.sample_grid(f, dims)
        g = tp.from_grid(vals, real=True)
        scale = tp.strip_norm_bound(f, 0.0).value
        for k in f.coeffs:
            np.testing.assert_allclose(g.coeff(k), f.coeff(k), atol=1e-12 * scale)

    def test_reality_invariant(self):
        rng = np.random.default_rng(11)
        f = random_real_poly(rng, 2, 4.0)
        pts = rng.uniform(0, 2 * np.pi, size=(50, 2))
        vals = tp.evaluate_points(f, pts)
        scale = max(1.0, np.max(np.abs(vals)))
        assert np.max(np.abs(vals.imag)) <= 1e-12 * scale


class TestDirectionalDerivative:
    def test_sin_to_cos(self):
        g = tp.directional_derivative(sin_poly(), [1.0])
        np.testing.assert_allclose(g.coeff((1,)), [[0.5]], atol=1e-15)
        np.testing.assert_allclose(g.coeff((-1,)), [[0.5]], atol=1e-15)

    def test_constant_to_zero(self):
        f = TrigPoly.constant(1, [[3.0]])
        assert tp.directional_derivative(f, [2.0]).n_modes == 0

    def test_mixed_mode(self):
        f = TrigPoly(2, (1, 1), {(2, -1): [[1.0]]})
        g = tp.directional_derivative(f, [1.0, 0.5])
        np.testing.assert_allclose(g.coeff((2, -1)), [[1.5j]], rtol=1e-15)

    def test_kills_mean(self):
        rng = np.random.default_rng(5)
        f = random_real_poly(rng, 2, 4.0)
        g = tp.directional_derivative(f, [1.0, np.sqrt(2)])
        assert np.all(g.mean() == 0)


class TestComposeAngle:
    def test_zero_shift_identity(self):
        f = cos_poly() + cos_poly(3)
        Phi = TrigPoly.zero(1, (1, 1))
        g = tp.compose_angle(f, Phi, 8)
        for k in f.coeffs:
            np.testing.assert_allclose(g.coeff(k), f.coeff(k), atol=1e-13)

    def test_constant_phase_shift(self):
        f = TrigPoly(1, (1, 1), {(1,): [[1.0]]})
        c = 0.7
        Phi = TrigPoly.constant(1, [[c]])
        g = tp.compose_angle(f, Phi, 4)
        np.testing.assert_allclose(g.coeff((1,)), [[np.exp(1j * c)]], rtol=1e-12)

    def test_against_pointwise_oracle(self):
        f = cos_poly()
        Phi = sin_poly() * 0.1
        g = tp.compose_angle(f, Phi, 8)
        pts = np.linspace(0, 2 * np.pi, 64, endpoint=False)[:, None]
        exact = np.cos(pts[:, 0] + 0.1 * np.sin(pts[:, 0]))
        got = tp.evaluate_points(g, pts)[:, 0, 0].real
        np.testing.assert_allclose(got, exact, atol=1e-10)


class TestTailBoundProperty:
    @pytest.mark.parametrize("n", [1, 2])
    def test_truncation_tail_dominated(self, n):
        rng = np.random.default_rng(100 + n)
        for _ in range(20):
            deg = 30 if n == 1 else 12
            f = random_real_poly(rng, n, deg)
            r = rng.uniform(0.2, 0.5)
            rho = rng.uniform(0.05, r / 2)
            K = rng.uniform(1.0 / (2 * rho) + 1.0, deg - 1)
            tail = f - tp.truncate(f, K)
            measured = tp.strip_sup_grid(tail, r - 2 * rho)
            bound = bounds.truncation_tail_bound(bounds.TailBoundInput(
                n=n, f_norm_r=tp.strip_norm_bound(f, r).value, rho=rho, K=K))
            assert measured <= bound


@settings(max_examples=30, deadline=None)
@given(ks=st.lists(st.integers(min_value=-6, max_value=6), min_size=1, max_size=5),
       kprime=st.integers(min_value=0, max_value=8),
       k=st.integers(min_value=0, max_value=8))
def test_truncation_composition_property(ks, kprime, k):
    coeffs = {}
    for i, kk in enumerate(ks):
        coeffs[(kk,)] = coeffs.get((kk,), 0) + np.array([[1.0 + 0.1 * i]])
        coeffs[(-kk,)] = coeffs.get((-kk,), 0) + np.array([[1.0 + 0.1 * i]])
    f = TrigPoly(1, (1, 1), coeffs, real=True)
    lhs = tp.truncate(tp.truncate(f, k), kprime)
    rhs = tp.truncate(f, min(k, kprime))
    assert lhs.coeffs.keys() == rhs.coeffs.keys()


def test_json_roundtrip():
    rng = np.random.default_rng(42)
    f = random_real_poly(rng, 2, 4.0, shape=(2, 2))
    d = tp.to_json_dict(f)
    g = tp.from_json_dict(d)
    assert g.real
    assert g.coeffs.keys() == f.coeffs.keys()
    for k in f.coeffs:
        np.testing.assert_allclose(g.coeff(k), f.coeff(k), atol=1e-15)
