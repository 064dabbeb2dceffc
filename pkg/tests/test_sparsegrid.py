import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from basinuq.errors import NotDownwardClosedError, OutOfDomainError
from basinuq.scenario import ParameterSpace
from basinuq.sparsegrid import (
    GridDesign,
    KnotFamily,
    SparseGridSurrogate,
    build_surrogate,
    collocation_points,
    combination_coefficients,
    make_index_set_aniso,
    make_index_set_explicit,
    make_index_set_iso,
    parse_knots,
)
from basinuq.sparsegrid.knots import _clenshaw_curtis_unit, _gauss_legendre_unit

GL = KnotFamily()
CC_DOUBLING = KnotFamily(kind="clenshaw-curtis", rule="doubling")
CC_LINEAR = KnotFamily(kind="clenshaw-curtis", rule="linear")


def unit_space(dim):
    return ParameterSpace.from_intervals([(-1.0, 1.0)] * dim)


class TestKnots:
    def test_level_to_nodes_invariants(self):
        for fam in (GL, CC_DOUBLING, CC_LINEAR):
            assert fam.m(0) == 0
            assert fam.m(1) == 1
            for j in range(2, 8):
                assert fam.m(j) >= j - 1

    @pytest.mark.parametrize("m", [1, 2, 3, 5, 8, 13])
    def test_gauss_weights_positive_and_normalised(self, m):
        x, w = GL.nodes_weights(m, 2.0, 5.0)
        assert np.all(x >= 2.0) and np.all(x <= 5.0)
        assert np.all(w > 0)
        assert np.sum(w) == pytest.approx(1.0, abs=1e-14)

    @pytest.mark.parametrize("m", [1, 2, 3, 5, 9, 17])
    def test_clenshaw_curtis_weights_integrate_low_degrees(self, m):
        x, w = _clenshaw_curtis_unit(m)
        assert np.sum(w) == pytest.approx(1.0, abs=1e-14)
        if m >= 3:
            # CC with m points integrates polynomials up to degree m-1
            for deg in range(m):
                exact = (1 / (deg + 1)) if deg % 2 == 0 else 0.0
                assert np.sum(w * x**deg) == pytest.approx(exact, abs=1e-13)

    def test_gauss_quadrature_degree(self):
        x, w = _gauss_legendre_unit(4)
        for deg in range(8):
            exact = (1 / (deg + 1)) if deg % 2 == 0 else 0.0
            assert np.sum(w * x**deg) == pytest.approx(exact, abs=1e-14)

    def test_doubling_rule_is_nested(self):
        prev = set()
        for j in range(1, 5):
            x, _ = CC_DOUBLING.nodes_weights(CC_DOUBLING.m(j), -1, 1)
            cur = set(np.round(x, 12))
            assert prev <= cur
            prev = cur

    def test_parse_knots(self):
        assert parse_knots("gl") == GL
        assert parse_knots("cc:doubling") == CC_DOUBLING
        with pytest.raises(ValueError):
            parse_knots("weird")


class TestIndexSets:
    def test_iso_small_enumeration(self):
        s = make_index_set_iso(2, 1)
        assert set(s.indices) == {(1, 1), (2, 1), (1, 2)}

    def test_iso_degenerate(self):
        s = make_index_set_iso(3, 0)
        assert s.indices == ((1, 1, 1),)

    def test_aniso_equals_iso_for_unit_weights(self):
        a = make_index_set_aniso(3, 4, [1, 1, 1])
        b = make_index_set_iso(3, 4)
        assert a.indices == b.indices

    def test_aniso_membership_arithmetic(self):
        s = make_index_set_aniso(3, 12, [2, 2, 1])
        assert (1, 1, 13) in s
        assert (1, 1, 14) not in s

    def test_explicit_validates_downward_closure(self):
        with pytest.raises(NotDownwardClosedError):
            make_index_set_explicit([(1, 1), (2, 2)])

    def test_combination_coefficients_triangle(self):
        s = make_index_set_iso(2, 1)
        assert combination_coefficients(s) == {(1, 1): -1, (2, 1): 1, (1, 2): 1}

    def test_rectangle_collapses_to_tensor(self):
        s = make_index_set_explicit(
            [(i, j) for i in (1, 2) for j in (1, 2)]
        )
        assert combination_coefficients(s) == {(2, 2): 1}

    @staticmethod
    def random_downward_closed(rng, dim, n_extra):
        members = {(1,) * dim}
        frontier = [(1,) * dim]
        for _ in range(n_extra):
            base = frontier[rng.integers(len(frontier))]
            k = rng.integers(dim)
            cand = base[:k] + (base[k] + 1,) + base[k + 1 :]
            below_ok = all(
                cand[:i] + (cand[i] - 1,) + cand[i + 1 :] in members
                for i in range(dim)
                if cand[i] > 1
            )
            if below_ok:
                members.add(cand)
                frontier.append(cand)
        return make_index_set_explicit(sorted(members))

    def test_brute_force_oracle_on_random_sets(self):
        rng = np.random.default_rng(123)
        for _ in range(50):
            dim = int(rng.integers(1, 5))
            s = self.random_downward_closed(rng, dim, int(rng.integers(0, 14)))
            got = combination_coefficients(s)
            # oracle: raw k-sum for every member
            for j in s:
                c = 0
                for k in itertools.product((0, 1), repeat=dim):
                    if tuple(a + b for a, b in zip(j, k)) in s:
                        c += (-1) ** sum(k)
                assert got.get(j, 0) == c
            assert sum(got.values()) == 1  # constant reproduction

    def test_sum_of_coefficients_is_one(self):
        for w in range(5):
            s = make_index_set_aniso(3, 2 * w, [2, 1.5, 1])
            assert sum(combination_coefficients(s).values()) == 1


class TestPointCounts:
    def test_paper_case_a_isotropic(self):
        # case A has two uncertain parameters; iso w=6 GL m(j)=j
        pts = collocation_points(unit_space(2), make_index_set_iso(2, 6), GL)
        assert len(pts) == 137

    def test_paper_case_b_anisotropic(self):
        pts = collocation_points(
            unit_space(3), make_index_set_aniso(3, 12, [4, 4, 1]), GL
        )
        assert len(pts) == 133

    def test_duplicate_centre_merged(self):
        # the (1,3) and (3,1) cross grids share the centre point; raw
        # tensor grids carry 14 points, the distinct union only 13
        pts = collocation_points(unit_space(2), make_index_set_iso(2, 2), GL)
        assert len(pts) == 13


class TestSurrogate:
    def test_constant_reproduction(self):
        sur = build_surrogate(lambda p: 3.25, unit_space(2),
                              make_index_set_iso(2, 2), GL)
        rng = np.random.default_rng(0)
        pts = rng.uniform(-1, 1, (50, 2))
        np.testing.assert_allclose(sur.evaluate_batch(pts)[:, 0], 3.25,
                                   atol=1e-12)

    def test_product_polynomial_exact(self):
        sur = build_surrogate(lambda p: p[0] * p[1], unit_space(2),
                              make_index_set_iso(2, 2), GL)
        rng = np.random.default_rng(1)
        pts = rng.uniform(-1, 1, (100, 2))
        np.testing.assert_allclose(sur.evaluate_batch(pts)[:, 0],
                                   pts[:, 0] * pts[:, 1], atol=1e-12)

    def test_monomial_space_guarantee(self):
        # every monomial with degrees q such that q+1 lies in the set is
        # reproduced (each tensor term of index j covers degrees m(j_n)-1)
        space = unit_space(3)
        iset = make_index_set_aniso(3, 4, [2, 1, 1])
        sur_cache = {}
        rng = np.random.default_rng(2)
        pts = rng.uniform(-1, 1, (40, 3))
        for q in iset:
            degs = tuple(v - 1 for v in q)
            f = lambda p, d=degs: np.prod(np.asarray(p) ** np.asarray(d))
            sur = build_surrogate(f, space, iset, GL)
            exact = np.prod(pts ** np.asarray(degs)[None, :], axis=1)
            np.testing.assert_allclose(sur.evaluate_batch(pts)[:, 0], exact,
                                       atol=1e-10)
            sur_cache[degs] = sur

    def test_one_dimensional_collapse(self):
        # 1D sparse grid == plain Lagrange interpolation on m(w+1) nodes
        w = 4
        space = unit_space(1)
        f = lambda p: np.sin(2.0 * p[0])
        sur = build_surrogate(f, space, make_index_set_iso(1, w), GL)
        x, _ = GL.nodes_weights(w + 1, -1.0, 1.0)
        fx = np.sin(2.0 * x)
        t = np.linspace(-1, 1, 31)
        lagr = np.array([
            np.sum(fx * np.array([
                np.prod([(tt - x[k]) / (x[i] - x[k])
                         for k in range(len(x)) if k != i])
                for i in range(len(x))
            ]))
            for tt in t
        ])
        np.testing.assert_allclose(sur.evaluate_batch(t[:, None])[:, 0], lagr,
                                   atol=1e-11)

    def test_linearity_of_the_operator(self):
        space = unit_space(2)
        iset = make_index_set_iso(2, 3)
        f = lambda p: np.sin(p[0]) + p[1] ** 2
        g = lambda p: np.cos(p[0] * p[1])
        a, b = 2.0, -0.7
        sf = build_surrogate(f, space, iset, GL)
        sg = build_surrogate(g, space, iset, GL)
        sfg = build_surrogate(lambda p: a * f(p) + b * g(p), space, iset, GL)
        rng = np.random.default_rng(3)
        pts = rng.uniform(-1, 1, (30, 2))
        np.testing.assert_allclose(
            sfg.evaluate_batch(pts),
            a * sf.evaluate_batch(pts) + b * sg.evaluate_batch(pts),
            atol=1e-12,
        )

    def test_nested_family_interpolates_stored_values(self):
        space = unit_space(2)
        iset = make_index_set_iso(2, 3)
        f = lambda p: np.exp(p[0]) * (1 + p[1] ** 3)
        sur = build_surrogate(f, space, iset, CC_DOUBLING)
        got = sur.evaluate_batch(sur.points)
        np.testing.assert_allclose(got[:, 0], sur.values[:, 0], atol=1e-12)

    def test_evaluation_count_reported(self):
        calls = []
        f = lambda p: calls.append(1) or p[0]
        sur = build_surrogate(f, unit_space(3),
                              make_index_set_aniso(3, 12, [4, 4, 1]), GL)
        assert sur.n_evaluations == 133
        assert len(calls) == 133

    def test_out_of_domain_rejected(self):
        sur = build_surrogate(lambda p: p[0], unit_space(2),
                              make_index_set_iso(2, 1), GL)
        with pytest.raises(OutOfDomainError):
            sur.evaluate([0.0, 1.5])

    def test_evaluator_failure_carries_point(self):
        def bad(p):
            raise ValueError("boom")

        with pytest.raises(RuntimeError, match="collocation point"):
            build_surrogate(bad, unit_space(1), make_index_set_iso(1, 1), GL)


class TestQuadrature:
    def test_constant(self):
        sur = build_surrogate(lambda p: 2.5, unit_space(2),
                              make_index_set_iso(2, 1), GL)
        mean, var = sur.quadrature()
        assert mean[0] == pytest.approx(2.5, abs=1e-13)
        assert var[0] == pytest.approx(0.0, abs=1e-13)

    def test_linear_coordinate(self):
        sur = build_surrogate(lambda p: p[0], unit_space(1),
                              make_index_set_iso(1, 3), GL)
        mean, var = sur.quadrature()
        assert abs(mean[0]) <= 1e-12
        assert var[0] == pytest.approx(1.0 / 3.0, abs=1e-10)

    def test_tensor_square_integral(self):
        dim = 3
        sur = build_surrogate(lambda p: np.prod(np.asarray(p) ** 2),
                              unit_space(dim), make_index_set_iso(dim, 6), GL)
        mean, _ = sur.quadrature()
        assert mean[0] == pytest.approx((1.0 / 3.0) ** dim, rel=1e-10)

    def test_point_weights_sum_to_one(self):
        sur = build_surrogate(lambda p: p[0], unit_space(2),
                              make_index_set_aniso(2, 3, [2, 1]), GL)
        assert np.sum(sur.point_weights()) == pytest.approx(1.0, abs=1e-12)


class TestSerialization:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(11)
        f = lambda p: np.array([np.sin(p[0] * 3 + p[1]), p[1] ** 4])
        space = ParameterSpace.from_intervals([(0.5, 2.5), (-3.0, 1.0)],
                                              names=("a", "b"))
        sur = build_surrogate(f, space, make_index_set_iso(2, 4), GL,
                              output_names=("s", "q"))
        path = tmp_path / "sur.json"
        sur.save(path)
        back = SparseGridSurrogate.load(path)
        assert back.values.tobytes() == sur.values.tobytes()
        assert back.points.tobytes() == sur.points.tobytes()
        assert back.output_names == ("s", "q")
        pts = space.sample(rng, 20)
        np.testing.assert_array_equal(back.evaluate_batch(pts),
                                      sur.evaluate_batch(pts))

    def test_version_check(self, tmp_path):
        sur = build_surrogate(lambda p: p[0], unit_space(1),
                              make_index_set_iso(1, 1), GL)
        doc = sur.to_json_dict()
        doc["version"] = 99
        with pytest.raises(ValueError, match="version"):
            SparseGridSurrogate.from_json_dict(doc)
