import json

import numpy as np
import pytest

from hardylift.errors import CertificateError, ParameterError, SpecError
from hardylift.hardy import invariance_defect, path_modulus, wandering_dimension
from hardylift.innergen import (FactorPath, InnerPathSpec, PotapovFactor, Trajectory,
                                UnitaryTrajectory, blaschke_path_spec, blaschke_scalar,
                                crossing_spec, potapov_product, random_spec, seeded_fixtures,
                                synthesize_path)
from hardylift.lift import gram_at_base, lambda_matrix
from hardylift.series import sample_grid

from oracles import blaschke_coeffs, blaschke_value


class TestBlaschke:
    def test_zero_at_origin_is_z(self):
        c = blaschke_scalar(0).coeffs[:, 0, 0]
        assert c[1] == 1 and np.count_nonzero(c) == 1

    def test_half(self):
        c = blaschke_scalar(0.5).coeffs[:, 0, 0]
        assert np.allclose(c[:4], [0.5, -0.75, -0.375, -0.1875], atol=1e-15)
        assert abs(np.sum(np.abs(c) ** 2) - 1) <= 1e-10

    def test_unimodular(self):
        vals = sample_grid(blaschke_scalar(0.3 + 0.4j), 256)[:, 0, 0]
        assert np.max(np.abs(np.abs(vals) - 1)) <= 1e-9

    def test_geometric_oracle(self):
        for a in (0.2, -0.7 + 0.1j, 0.5j):
            assert np.allclose(blaschke_scalar(a).coeffs[:, 0, 0], blaschke_coeffs(a, 64), atol=1e-15)

    def test_outside_disk(self):
        with pytest.raises(ParameterError):
            blaschke_scalar(1.0)


class TestPotapovFactor:
    def test_validation(self):
        with pytest.raises(ParameterError):
            PotapovFactor.from_vector(0.95, [1.0])
        with pytest.raises(ParameterError):
            PotapovFactor(0.5, np.eye(2), np.eye(2))
        with pytest.raises(ParameterError):
            PotapovFactor.from_vector(0.5, [1.0, 0.0], np.ones((2, 2)))

    def test_acts_on_projector_range(self):
        f = PotapovFactor.from_vector(0.4, [1.0, 1.0])
        z = np.exp(0.9j)
        g = f.series()(z)
        v = np.array([1.0, 1.0]) / np.sqrt(2)
        w = np.array([1.0, -1.0]) / np.sqrt(2)
        assert np.allclose(g @ v, blaschke_value(0.4, z) * v, atol=1e-12)
        assert np.allclose(g @ w, w, atol=1e-12)


class TestProduct:
    def test_no_factors(self):
        spec = InnerPathSpec(n=3, m=2, t_count=2)
        cert = potapov_product(spec, 0)
        assert cert.isometry_defect == 0
        assert np.array_equal(cert.series.coeffs[0], np.eye(3, 2))

    def test_single_scalar_factor(self):
        cert = potapov_product(blaschke_path_spec([0.5], t_count=2), 1)
        assert cert.isometry_defect <= 1e-9
        assert np.allclose(cert.series.coeffs[:, 0, 0], blaschke_coeffs(0.5, 64), atol=1e-15)

    def test_diagonal_factors_per_channel(self):
        spec = InnerPathSpec(n=2, m=2, t_count=2, factors=[
            FactorPath(Trajectory([0.3]), np.array([1.0, 0.0])),
            FactorPath(Trajectory([-0.5j]), np.array([0.0, 1.0])),
        ])
        cert = potapov_product(spec, 0)
        assert cert.isometry_defect <= 1e-8
        c = cert.series.coeffs
        assert np.allclose(c[:, 0, 0], blaschke_coeffs(0.3, 64), atol=1e-14)
        assert np.allclose(c[:, 1, 1], blaschke_coeffs(-0.5j, 64), atol=1e-14)
        assert np.max(np.abs(c[:, 0, 1])) == 0

    def test_truncation_failure_reported(self):
        spec = blaschke_path_spec([0.85], t_count=2, D=16)
        with pytest.raises(CertificateError) as err:
            potapov_product(spec, 0)
        assert err.value.defect > 1e-6

    def test_square_determinant_unimodular(self):
        for spec in seeded_fixtures()[:6]:
            if spec.n != spec.m:
                continue
            vals = sample_grid(potapov_product(spec, 7).series, 256)
            assert np.max(np.abs(np.abs(np.linalg.det(vals)) - 1)) <= 1e-8


class TestSpecValidation:
    def test_m_exceeds_n(self):
        with pytest.raises(SpecError):
            InnerPathSpec(n=1, m=2)

    def test_embed_not_isometric(self):
        with pytest.raises(SpecError):
            InnerPathSpec(n=2, m=1, embed=np.array([[1.0], [1.0]]))

    def test_zero_too_large(self):
        with pytest.raises(SpecError):
            blaschke_path_spec([0.5, 0.95])

    def test_jump_too_large(self):
        with pytest.raises(SpecError):
            blaschke_path_spec([0.8, -0.8], t_count=2)

    def test_knots_must_increase(self):
        with pytest.raises(SpecError):
            Trajectory([0.1, 0.2], knots=[0.5, 0.5])

    def test_generator_hermitian(self):
        with pytest.raises(SpecError):
            UnitaryTrajectory(base=np.eye(2), generator=np.array([[0, 1], [0, 0]]))

    @pytest.mark.parametrize("bad", [
        {"m": 1},
        {"n": 1, "m": 1, "factors": [{"a": [0.2]}]},
        {"n": 1, "m": 1, "factors": [{"a": [[0.2, 0.1, 0.3]], "P": {"vector": [1]}}]},
        {"n": "x", "m": 1},
    ])
    def test_malformed_json(self, bad):
        with pytest.raises(SpecError):
            InnerPathSpec.from_dict(bad)


class TestJson:
    def test_roundtrip_random(self):
        spec = random_spec(7, 3, 2, 2, t_count=5)
        back = InnerPathSpec.from_dict(json.loads(json.dumps(spec.to_dict())))
        for j in range(spec.t_count):
            a, b = potapov_product(spec, j).series, potapov_product(back, j).series
            assert np.array_equal(a.coeffs, b.coeffs)

    def test_schema_keys(self):
        d = crossing_spec(t_count=5).to_dict()
        assert set(d) == {"n", "m", "D", "tGrid", "embed", "factors"}
        assert d["tGrid"] == {"count": 5}
        assert {"a", "P", "U"} <= set(d["factors"][0])

    def test_tables_and_plain_reals(self):
        d = {"n": 2, "m": 2, "tGrid": {"count": 3},
             "factors": [{"a": [0.1, 0.3], "P": {"vector": [1, 0]},
                          "U": [[[1, 0], [0, 1]], [[0, 1], [1, 0]]]}]}
        spec = InnerPathSpec.from_dict(d)
        u = spec.factors[0].unitary(0.5)
        assert np.allclose(u.conj().T @ u, np.eye(2))
        assert spec.factors[0].zero(0.5) == pytest.approx(0.2)


class TestSynthesis:
    def test_constant_spec(self):
        path, _ = synthesize_path(InnerPathSpec(n=2, m=1, t_count=4, D=8))
        assert np.all(path_modulus(path) == 0)

    def test_circling_zero(self):
        t = np.linspace(0, 1, 64)
        spec = blaschke_path_spec(Trajectory(0.5 * np.exp(2j * np.pi * t), knots=t), t_count=64)
        path, _ = synthesize_path(spec)
        assert np.all(path_modulus(path) < 1)

    def test_single_channel_in_plane(self):
        spec = random_spec(3, 2, 1, 2, t_count=5)
        path, _ = synthesize_path(spec)
        assert all(wandering_dimension(p, path.model) == 1 for p in path.projections)

    def test_seeded_fixture_invariants(self, seeded):
        for spec, path, _ in seeded:
            assert spec.n <= 3 and spec.m <= spec.n and len(spec.factors) <= 3
            for j in (0, len(path) // 2, len(path) - 1):
                assert invariance_defect(path.projections[j], path.model) <= 1e-6
                assert wandering_dimension(path.projections[j], path.model) == spec.m
            zeros = [abs(f.zero(t)) for f in spec.factors for t in spec.t_grid]
            assert max(zeros) <= 0.75

    def test_seeded_are_reproducible(self):
        a, b = seeded_fixtures(count=3), seeded_fixtures(count=3)
        assert [json.dumps(s.to_dict()) for s in a] == [json.dumps(s.to_dict()) for s in b]

    def test_threads_do_not_change_output(self):
        spec = random_spec(11, 2, 2, 1, t_count=4, D=32)
        p1, _ = synthesize_path(spec)
        p2, _ = synthesize_path(spec, workers=3)
        assert all(np.array_equal(a.matrix, b.matrix) for a, b in zip(p1.projections, p2.projections))


def test_crossing_fixture_eigenvalues_cross():
    spec = crossing_spec(t_count=65)
    path, _ = synthesize_path(spec)
    lam = 0.6
    gaps = []
    for p in path.projections:
        mu = np.linalg.eigvalsh(gram_at_base(lambda_matrix(p, lam, path.model)).matrix)[::-1]
        gaps.append(mu[0] - mu[1])
    gaps = np.array(gaps)
    mid = 32
    assert gaps[mid] <= 1e-10
    assert np.all(gaps[np.arange(65) != mid] > 1e-4)
    # the eigenvalue tied to the first channel is |b_{a1}(lam)|^2, the larger one before the crossing
    a1 = lambda t: 0.2 + 0.4 * t
    a2 = lambda t: 0.6 - 0.4 * t
    for j in (10, 50):
        t = spec.t_grid[j]
        first = abs(blaschke_value(a1(t), lam)) ** 2
        second = abs(blaschke_value(a2(t), lam)) ** 2
        assert (first > second) == (j < mid)
