import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ppbo.geometry import (
    Domain,
    DomainError,
    IntervalError,
    ProjectionError,
    ProjectiveQuery,
    QueryError,
    coordinate_projection,
    denormalize_point,
    embed,
    feasible_interval,
    make_projection,
    normalize_point,
    query_with_reference,
)

CAMEL_DOMAIN = Domain(np.array([-3.0, -2.0]), np.array([3.0, 2.0]))


class TestDomain:
    def test_rejects_inverted_bounds(self):
        with pytest.raises(DomainError):
            Domain(np.array([0.0, 1.0]), np.array([1.0, 1.0]))

    def test_rejects_one_dimension(self):
        with pytest.raises(DomainError):
            Domain(np.array([0.0]), np.array([1.0]))

    def test_config_round_trip(self):
        dom = Domain.from_config(CAMEL_DOMAIN.to_config())
        np.testing.assert_array_equal(dom.lower, CAMEL_DOMAIN.lower)
        np.testing.assert_array_equal(dom.upper, CAMEL_DOMAIN.upper)


class TestNormalizePoint:
    def test_lower_corner_maps_to_origin(self):
        u = normalize_point(CAMEL_DOMAIN, np.array([-3.0, -2.0]))
        np.testing.assert_array_equal(u, [0.0, 0.0])

    def test_affine_formula(self):
        # (0.0898 - (-3)) / 6 and (-0.7126 - (-2)) / 4, computed independently
        u = normalize_point(CAMEL_DOMAIN, np.array([0.0898, -0.7126]))
        np.testing.assert_allclose(u, [0.5149666666666667, 0.32185], rtol=0, atol=1e-15)

    def test_out_of_bounds_names_coordinate(self):
        with pytest.raises(DomainError, match="coordinate 0"):
            normalize_point(CAMEL_DOMAIN, np.array([4.0, 0.0]))

    def test_round_trip_many_random_domains(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            dim = int(rng.integers(2, 9))
            lo = rng.uniform(-50, 0, size=dim)
            hi = lo + rng.uniform(0.1, 100, size=dim)
            dom = Domain(lo, hi)
            for _ in range(200):
                p = rng.uniform(lo, hi)
                back = denormalize_point(dom, normalize_point(dom, p))
                np.testing.assert_allclose(back, p, rtol=1e-12)


class TestMakeProjection:
    def test_single_coordinate(self):
        xi = make_projection(np.array([0.0, 2.0, 0.0]))
        np.testing.assert_array_equal(xi.values, [0.0, 1.0, 0.0])
        np.testing.assert_array_equal(xi.support, [1])

    def test_divides_by_sup_norm(self):
        xi = make_projection(np.array([2.0, 1.0, 0.0]))
        np.testing.assert_array_equal(xi.values, [1.0, 0.5, 0.0])

    def test_all_zero_rejected(self):
        with pytest.raises(ProjectionError):
            make_projection(np.array([0.0, 0.0]))

    def test_negative_entry_rejected(self):
        with pytest.raises(ProjectionError):
            make_projection(np.array([1.0, -0.5]))

    @given(st.lists(st.floats(0.0, 10.0), min_size=2, max_size=8))
    def test_idempotent(self, raw):
        if max(raw, default=0.0) <= 0.0:
            return
        xi = make_projection(np.array(raw))
        again = make_projection(xi.values)
        np.testing.assert_array_equal(again.values, xi.values)


class TestFeasibleInterval:
    def test_axis_projection(self):
        q = ProjectiveQuery(coordinate_projection(2, 0), np.array([0.0, 0.3]))
        iv = feasible_interval(q)
        assert (iv.lo, iv.hi) == (0.0, 1.0)

    def test_diagonal_projection_scan(self):
        # Brute-force membership over an alpha grid agrees with hi = 1.
        q = ProjectiveQuery(make_projection(np.array([1.0, 0.5])), np.array([0.0, 0.0]))
        iv = feasible_interval(q)
        alphas = np.linspace(0.0, 2.0, 10_001)
        pts = alphas[:, None] * q.xi.values[None, :] + q.x[None, :]
        feasible = np.all((pts >= 0.0) & (pts <= 1.0), axis=1)
        assert alphas[feasible].max() == pytest.approx(1.0, abs=1e-4)
        assert iv.hi == 1.0 and iv.lo == 0.0
        assert np.all(np.abs(1.0 * q.xi.values + q.x - [1.0, 0.5]) == 0.0)

    def test_reference_nonzero_on_support_rejected(self):
        with pytest.raises(QueryError):
            ProjectiveQuery(coordinate_projection(2, 0), np.array([0.4, 0.3]))

    @given(st.data())
    @settings(max_examples=200, deadline=None)
    def test_length_is_one(self, data):
        dim = data.draw(st.integers(2, 8))
        raw = np.array(
            data.draw(
                st.lists(st.floats(0.0, 1.0), min_size=dim, max_size=dim).filter(
                    lambda v: max(v) > 1e-6
                )
            )
        )
        xi = make_projection(raw)
        ref = np.array(data.draw(st.lists(st.floats(0.0, 1.0), min_size=dim, max_size=dim)))
        q = query_with_reference(xi, ref)
        assert feasible_interval(q).length == 1.0


class TestEmbed:
    def test_alpha_zero_is_reference(self):
        q = ProjectiveQuery(coordinate_projection(2, 1), np.array([0.2, 0.0]))
        np.testing.assert_array_equal(embed(0.0, q), q.x)

    def test_alpha_one_on_axis(self):
        q = ProjectiveQuery(coordinate_projection(2, 1), np.array([0.2, 0.0]))
        np.testing.assert_array_equal(embed(1.0, q), [0.2, 1.0])

    def test_composition_reaches_normalized_target(self):
        target = normalize_point(CAMEL_DOMAIN, np.array([0.0898, -0.7126]))
        q = ProjectiveQuery(coordinate_projection(2, 1), np.array([target[0], 0.0]))
        np.testing.assert_allclose(embed(target[1], q), target, rtol=0, atol=1e-15)

    def test_alpha_outside_interval_rejected(self):
        q = ProjectiveQuery(coordinate_projection(2, 0), np.array([0.0, 0.5]))
        with pytest.raises(IntervalError):
            embed(1.5, q)

    @given(st.data())
    @settings(max_examples=200, deadline=None)
    def test_embedding_stays_in_cube(self, data):
        dim = data.draw(st.integers(2, 6))
        raw = np.array(
            data.draw(
                st.lists(st.floats(0.0, 1.0), min_size=dim, max_size=dim).filter(
                    lambda v: max(v) > 1e-6
                )
            )
        )
        ref = np.array(data.draw(st.lists(st.floats(0.0, 1.0), min_size=dim, max_size=dim)))
        alpha = data.draw(st.floats(0.0, 1.0))
        q = query_with_reference(make_projection(raw), ref)
        pt = embed(alpha, q)
        assert np.all(pt >= 0.0) and np.all(pt <= 1.0)
