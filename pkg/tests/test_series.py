import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hardylift.errors import DimensionError, DomainError, ParameterError
from hardylift.innergen import blaschke_scalar
from hardylift.series import (CirclePoint, MatrixLaurentSeries, certify_inner, evaluate,
                              l2_distance, op_norms, sample_grid, sup_norm_distance)

from oracles import blaschke_value, horner, trapezoid_l2


def random_series(rng, rows=2, cols=2, lo=0, hi=8):
    L = hi - lo + 1
    c = rng.standard_normal((L, rows, cols)) + 1j * rng.standard_normal((L, rows, cols))
    return MatrixLaurentSeries(c, lo)


class TestCirclePoint:
    def test_theta_wrapped(self):
        assert CirclePoint(2 * math.pi + 0.25).theta == pytest.approx(0.25)

    def test_radius_range(self):
        with pytest.raises(ParameterError):
            CirclePoint(0.0, 1.5)

    def test_from_complex_roundtrip(self):
        p = CirclePoint.from_complex(0.3 - 0.4j)
        assert p.r == pytest.approx(0.5)
        assert p.value == pytest.approx(0.3 - 0.4j)


class TestEvaluate:
    def test_constant_identity(self):
        s = MatrixLaurentSeries.constant(np.eye(2))
        assert np.allclose(evaluate(s, CirclePoint(1.1)), np.eye(2))

    def test_monomial_at_quarter_turn(self):
        s = MatrixLaurentSeries.monomial(1, [[1.0]])
        assert evaluate(s, CirclePoint(math.pi / 2)) == pytest.approx(np.array([[1j]]), abs=1e-15)

    def test_horner_oracle(self, rng):
        s = random_series(rng)
        z = 0.5 * np.exp(0.7j)
        got = evaluate(s, CirclePoint(0.7, 0.5))
        assert np.max(np.abs(got - horner(s.coeffs, z))) <= 1e-12

    def test_laurent_on_circle(self, rng):
        s = random_series(rng, lo=-3, hi=4)
        z = np.exp(1.3j)
        want = horner(s.coeffs, z) * z ** -3
        assert np.max(np.abs(evaluate(s, CirclePoint(1.3)) - want)) <= 1e-12

    def test_interior_needs_analytic(self, rng):
        with pytest.raises(DomainError):
            evaluate(random_series(rng, lo=-1, hi=2), CirclePoint(0.0, 0.5))

    def test_call_shortcut(self, rng):
        s = random_series(rng)
        assert np.array_equal(s(0.2 + 0.1j), evaluate(s, 0.2 + 0.1j))


class TestSampleGrid:
    def test_constant(self):
        s = MatrixLaurentSeries.constant([[2.0, 1j]])
        vals = sample_grid(s, 8)
        assert vals.shape == (8, 1, 2)
        assert np.allclose(vals, [[2.0, 1j]])

    def test_fourth_roots(self):
        vals = sample_grid(MatrixLaurentSeries.monomial(1, np.eye(2)), 4)
        for v, w in zip(vals, [1, 1j, -1, -1j]):
            assert np.allclose(v, w * np.eye(2))

    def test_aliasing_bound(self, rng):
        with pytest.raises(ParameterError):
            sample_grid(random_series(rng, hi=8), 16)

    def test_blaschke_direct_oracle(self):
        b = blaschke_scalar(0.5)
        z = np.exp(2j * np.pi * np.arange(256) / 256)
        assert np.max(np.abs(sample_grid(b, 256)[:, 0, 0] - blaschke_value(0.5, z))) <= 1e-12

    def test_matches_evaluate(self, rng):
        s = random_series(rng, lo=-2, hi=5)
        vals = sample_grid(s, 32)
        for j in (0, 5, 31):
            assert np.max(np.abs(vals[j] - evaluate(s, CirclePoint(2 * np.pi * j / 32)))) <= 1e-12


class TestArithmetic:
    def test_convolution_matches_pointwise(self, rng):
        a = random_series(rng, 2, 3, 0, 4)
        b = random_series(rng, 3, 1, -1, 3)
        p = CirclePoint(0.4)
        assert np.allclose(evaluate(a @ b, p), evaluate(a, p) @ evaluate(b, p), atol=1e-12)
        assert (a @ b).shape == (2, 1)

    def test_matrix_products(self, rng):
        a = random_series(rng)
        m = rng.standard_normal((2, 3))
        assert np.allclose((a @ m).coeffs, a.coeffs @ m)
        assert np.allclose((m.T @ a).coeffs, m.T @ a.coeffs)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionError):
            random_series(rng, 2, 2) @ random_series(rng, 3, 1)
        with pytest.raises(DimensionError):
            random_series(rng, 2, 2) + random_series(rng, 2, 1)

    def test_truncate_and_shift(self, rng):
        a = random_series(rng, hi=6)
        assert a.truncate(3).hi == 3
        assert a.shift(2).lo == 2
        assert np.array_equal(a.shift(2).coefficient(4), a.coefficient(2))

    def test_immutable(self, rng):
        a = random_series(rng)
        with pytest.raises(ValueError):
            a.coeffs[0, 0, 0] = 1.0

    def test_json_roundtrip(self, rng):
        a = random_series(rng, 2, 1, -2, 3)
        d = json.loads(json.dumps(a.to_dict()))
        assert set(d) >= {"rows", "cols", "lo", "coeffs"}
        b = MatrixLaurentSeries.from_dict(d)
        assert b.lo == a.lo and np.array_equal(b.coeffs, a.coeffs)


class TestDistances:
    def test_l2_zero(self, rng):
        a = random_series(rng)
        d = l2_distance(a, a)
        assert d.hs == 0 and d.op == 0

    def test_l2_orthogonal_monomials(self):
        d = l2_distance(MatrixLaurentSeries.constant([[1.0]]), MatrixLaurentSeries.monomial(1, [[1.0]]))
        assert d.hs == pytest.approx(math.sqrt(2), abs=1e-14)

    def test_l2_blaschke_quadrature_oracle(self):
        d = l2_distance(blaschke_scalar(0.5), blaschke_scalar(0.51))
        want = trapezoid_l2(lambda z: blaschke_value(0.5, z), lambda z: blaschke_value(0.51, z))
        assert abs(d.hs - want) <= 1e-8
        assert abs(d.op - want) <= 1e-8

    def test_hs_dominates_op(self, rng):
        a, b = random_series(rng, 3, 2), random_series(rng, 3, 2)
        d = l2_distance(a, b)
        assert d.op <= d.hs + 1e-12

    def test_sup_trivial(self):
        one = MatrixLaurentSeries.constant([[1.0]])
        assert sup_norm_distance(one, one, 64) == 0
        assert sup_norm_distance(one, -one, 64) == pytest.approx(2.0)

    def test_sup_grid_refinement(self):
        a, b = blaschke_scalar(0.5), blaschke_scalar(0.6)
        assert abs(sup_norm_distance(a, b, 1024) - sup_norm_distance(a, b, 4096)) <= 1e-6


class TestOpNorms:
    @pytest.mark.parametrize("shape", [(50, 1, 3), (50, 2, 2), (50, 3, 3), (50, 2, 3), (50, 4, 4)])
    def test_against_svd(self, rng, shape):
        a = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        want = np.linalg.svd(a, compute_uv=False)[:, 0]
        assert np.allclose(op_norms(a), want, rtol=1e-13)

    def test_degenerate_scaled_unitary(self, rng):
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
        assert op_norms(1e-9 * q[None])[0] == pytest.approx(1e-9, rel=1e-12)


class TestInnerCertificate:
    def test_blaschke_valid(self):
        cert = certify_inner(blaschke_scalar(0.3 + 0.4j))
        assert cert.valid and cert.isometry_defect <= 1e-9

    def test_non_inner_rejected(self):
        cert = certify_inner(MatrixLaurentSeries.constant([[0.5]]))
        assert not cert.valid and cert.isometry_defect == pytest.approx(0.75)

    def test_grid_grows_with_degree(self):
        cert = certify_inner(blaschke_scalar(0.2, D=300), J=64)
        assert cert.grid_size >= 601

    def test_non_analytic(self):
        with pytest.raises(DomainError):
            certify_inner(MatrixLaurentSeries.monomial(-1, [[1.0]]))

    def test_isometric_columns_have_unit_norm(self, rng):
        b3, b5 = blaschke_scalar(0.3).coeffs[:, 0, 0], blaschke_scalar(0.5).coeffs[:, 0, 0]
        g = np.zeros((b3.size, 2, 2), dtype=complex)
        g[:, 0, 0], g[:, 1, 1] = b3, b5
        cert = certify_inner(MatrixLaurentSeries(g))
        assert cert.isometry_defect <= 1e-8
        x = rng.standard_normal((2, 5)) + 1j * rng.standard_normal((2, 5))
        x /= np.linalg.norm(x, axis=0)
        lengths = np.linalg.norm(sample_grid(cert.series, 256) @ x, axis=1)
        assert np.all(np.abs(lengths - 1) <= 1e-6)


coef = st.floats(-1, 1, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(coef, coef), min_size=1, max_size=10),
       st.lists(st.tuples(coef, coef), min_size=1, max_size=10),
       st.floats(0, 2 * math.pi), st.floats(0, 1))
def test_evaluate_is_linear(ca, cb, theta, r):
    a = MatrixLaurentSeries(np.array([complex(*x) for x in ca])[:, None, None])
    b = MatrixLaurentSeries(np.array([complex(*x) for x in cb])[:, None, None])
    p = CirclePoint(theta, r)
    assert np.allclose(evaluate(a + b, p), evaluate(a, p) + evaluate(b, p), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(-4, 4), st.lists(st.tuples(coef, coef), min_size=1, max_size=12))
def test_parseval(lo, cs):
    a = MatrixLaurentSeries(np.array([complex(*x) for x in cs])[:, None, None], lo)
    J = 64
    quad = np.mean(np.abs(sample_grid(a, J)) ** 2)
    zero = MatrixLaurentSeries.zeros(1, 1)
    assert abs(l2_distance(a, zero).hs ** 2 - quad) <= 1e-10
