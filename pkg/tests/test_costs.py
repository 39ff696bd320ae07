from __future__ import annotations

import numpy as np
import pytest

from routelearn import (
    Belief,
    BeliefError,
    CostError,
    CostFunction,
    CostModel,
    StateSpace,
    beckmann_integral,
    edge_cost,
    expected_edge_cost,
    expected_route_cost,
    validate_slope_bound,
)


def tiny_model(functions, edges=("e",), states=("s0", "s1")):
    """One-edge or few-edge model from a {(edge, state): fn} mapping."""
    sigma = np.eye(len(edges))
    return CostModel(edges, states, functions, sigma)


@pytest.fixture
def mixed_model():
    fns = {
        ("e", "s0"): CostFunction.affine(1.0, 5.0),
        ("e", "s1"): CostFunction.affine(1.0, 10.0),
    }
    return tiny_model(fns)


class TestCostFunction:
    def test_affine_intercept(self):
        fn = CostFunction.affine(2.0, 5.0)
        assert fn.value(0.0) == 5.0
        assert fn.form == "affine"

    def test_affine_value(self):
        assert CostFunction.affine(2.0, 5.0).value(1.5) == 8.0

    def test_polynomial_value_and_form(self):
        fn = CostFunction.polynomial([1.0, 0.0, 2.0])
        assert fn.form == "polynomial"
        assert fn.value(2.0) == 1.0 + 8.0

    def test_rejects_negative_coefficients(self):
        with pytest.raises(CostError):
            CostFunction.polynomial([1.0, -0.5])

    def test_rejects_degree_zero(self):
        with pytest.raises(CostError):
            CostFunction.polynomial([3.0])

    def test_rejects_negative_load(self):
        with pytest.raises(ValueError):
            CostFunction.affine(1.0, 1.0).value(-0.1)

    def test_integral_of_affine(self):
        fn = CostFunction.affine(2.0, 3.0)
        assert fn.integral(2.0) == pytest.approx(2.0 * 4.0 / 2.0 + 3.0 * 2.0)


class TestStateSpace:
    def test_basic(self):
        ss = StateSpace(("a", "b"), "b")
        assert ss.true_index == 1
        assert ss.index("a") == 0

    def test_duplicate_labels_rejected(self):
        with pytest.raises(CostError):
            StateSpace(("a", "a"), "a")

    def test_true_state_must_exist(self):
        with pytest.raises(CostError):
            StateSpace(("a", "b"), "zz")


class TestBelief:
    def test_uniform(self):
        b = Belief.uniform(4)
        assert np.array_equal(b.probs, np.full(4, 0.25))

    def test_point_mass_support(self):
        b = Belief.point_mass(3, 1)
        assert list(b.support()) == [1]

    def test_rejects_negative(self):
        with pytest.raises(BeliefError):
            Belief([-0.1, 1.1])

    def test_rejects_bad_sum(self):
        with pytest.raises(BeliefError):
            Belief([0.5, 0.6])

    def test_read_only(self):
        b = Belief.uniform(2)
        with pytest.raises(ValueError):
            b.probs[0] = 0.9


class TestEdgeCost:
    def test_compromised_intercept(self):
        fns = {("e", "s"): CostFunction.affine(2.0, 5.0)}
        model = tiny_model(fns, states=("s",))
        assert edge_cost(model, "e", "s", 0.0) == 5.0

    def test_normal_at_unit_load(self):
        fns = {("e", "s"): CostFunction.affine(1.0, 5.0)}
        model = tiny_model(fns, states=("s",))
        assert edge_cost(model, "e", "s", 1.0) == 6.0

    def test_unknown_edge(self, mixed_model):
        with pytest.raises(CostError):
            edge_cost(mixed_model, "zz", "s0", 0.0)

    def test_unknown_state(self, mixed_model):
        with pytest.raises(CostError):
            edge_cost(mixed_model, "e", "zz", 0.0)


class TestExpectedEdgeCost:
    def test_point_mass_reduces_to_edge_cost(self, mixed_model):
        theta = Belief.point_mass(2, 1)
        for w in (0.0, 0.3, 2.0):
            assert expected_edge_cost(mixed_model, "e", theta, w) == edge_cost(
                mixed_model, "e", "s1", w
            )

    def test_linear_in_compromise_probability(self, mixed_model):
        # normal w+5, compromised w+10: expected intercept is 5 + 5x
        for x in (0.0, 0.2, 0.5, 1.0):
            theta = Belief([1.0 - x, x])
            assert expected_edge_cost(mixed_model, "e", theta, 0.0) == pytest.approx(
                5.0 + 5.0 * x
            )

    def test_threshold_value_matches(self, mixed_model):
        assert expected_edge_cost(mixed_model, "e", Belief([0.8, 0.2]), 0.0) == pytest.approx(6.0)

    def test_identical_components(self):
        fns = {
            ("e", "s0"): CostFunction.affine(1.0, 3.0),
            ("e", "s1"): CostFunction.affine(1.0, 3.0),
        }
        model = tiny_model(fns)
        assert expected_edge_cost(model, "e", Belief.uniform(2), 0.7) == pytest.approx(3.7)

    def test_mixture_linearity_randomized(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            n_states = int(rng.integers(1, 5))
            fns = {
                ("e", f"s{j}"): CostFunction.affine(
                    0.1 + rng.uniform(0, 3), rng.uniform(0, 10)
                )
                for j in range(n_states)
            }
            model = tiny_model(fns, states=tuple(f"s{j}" for j in range(n_states)))
            p = rng.dirichlet(np.ones(n_states))
            theta = Belief(p / p.sum())
            w = float(rng.uniform(0, 4))
            direct = sum(
                theta.probs[j] * edge_cost(model, "e", f"s{j}", w)
                for j in range(n_states)
            )
            assert expected_edge_cost(model, "e", theta, w) == pytest.approx(
                direct, rel=1e-14, abs=1e-12
            )

    def test_slope_lower_bound_randomized(self):
        # increasing the load by d raises the expected cost by at least alpha*d
        rng = np.random.default_rng(9)
        alpha = 0.25
        fns = {
            ("e", f"s{j}"): CostFunction.affine(alpha + rng.uniform(0, 2), rng.uniform(0, 5))
            for j in range(3)
        }
        model = tiny_model(fns, states=("s0", "s1", "s2"))
        for _ in range(40):
            p = rng.dirichlet(np.ones(3))
            theta = Belief(p / p.sum())
            w1, w2 = sorted(rng.uniform(0, 3, size=2))
            c1 = expected_edge_cost(model, "e", theta, w1)
            c2 = expected_edge_cost(model, "e", theta, w2)
            assert c1 + alpha * (w2 - w1) <= c2 + 1e-12


class TestExpectedRouteCost:
    def test_sum_over_member_edges(self, three_edge):
        theta = Belief.point_mass(4, 3)  # all mass on the uncompromised state
        w = np.array([1.0, 0.0, 1.0])
        cost = expected_route_cost(three_edge.model, three_edge.network, 1, theta, w)
        assert cost == pytest.approx(12.0)

    def test_route_by_edge_sequence(self, three_edge):
        theta = Belief.point_mass(4, 3)
        w = np.array([1.0, 0.5, 0.5])
        by_index = expected_route_cost(three_edge.model, three_edge.network, 0, theta, w)
        by_edges = expected_route_cost(
            three_edge.model, three_edge.network, ["e2", "e1"], theta, w
        )
        assert by_index == by_edges == pytest.approx(11.5)

    def test_singleton_route(self):
        from routelearn import Network

        net = Network(["a"], [["a"]])
        fns = {("a", "s"): CostFunction.affine(1.0, 2.0)}
        model = CostModel(["a"], ["s"], fns, np.eye(1))
        theta = Belief.point_mass(1, 0)
        assert expected_route_cost(model, net, 0, theta, [0.5]) == pytest.approx(
            expected_edge_cost(model, "a", theta, 0.5)
        )

    def test_unknown_route(self, three_edge):
        from routelearn import NetworkError

        with pytest.raises(NetworkError):
            expected_route_cost(
                three_edge.model, three_edge.network, ["e1", "e2", "e3"], Belief.uniform(4), [1, 1, 1]
            )


class TestBeckmannIntegral:
    def test_affine_point_mass(self):
        fns = {("e", "s"): CostFunction.affine(2.0, 3.0)}
        model = tiny_model(fns, states=("s",))
        theta = Belief.point_mass(1, 0)
        w = 1.5
        assert beckmann_integral(model, "e", theta, w) == pytest.approx(
            2.0 * w**2 / 2.0 + 3.0 * w
        )

    def test_zero_load(self, mixed_model):
        assert beckmann_integral(mixed_model, "e", Belief.uniform(2), 0.0) == 0.0

    def test_mixture_of_affines(self, mixed_model):
        # weights 0.8/0.2 on intercepts 5/10 gives the affine z + 6
        theta = Belief([0.8, 0.2])
        assert beckmann_integral(mixed_model, "e", theta, 1.0) == pytest.approx(6.5)

    def test_derivative_matches_expected_cost(self):
        rng = np.random.default_rng(13)
        fns = {
            ("e", "s0"): CostFunction.polynomial([1.0, 0.5, 0.25]),
            ("e", "s1"): CostFunction.affine(2.0, 4.0),
        }
        model = tiny_model(fns)
        h = 1e-6
        for _ in range(30):
            p = rng.dirichlet(np.ones(2))
            theta = Belief(p / p.sum())
            w = float(rng.uniform(0.1, 3.0))
            fd = (
                beckmann_integral(model, "e", theta, w + h)
                - beckmann_integral(model, "e", theta, w - h)
            ) / (2 * h)
            assert fd == pytest.approx(
                expected_edge_cost(model, "e", theta, w), rel=1e-6
            )


class TestValidateSlopeBound:
    def test_all_slopes_pass(self):
        fns = {("e", "s"): CostFunction.affine(1.0, 0.0)}
        model = tiny_model(fns, states=("s",))
        report = validate_slope_bound(model, alpha=0.5)
        assert report.ok and not report.violations

    def test_zero_slope_fails_with_entry(self):
        fns = {
            ("e", "s0"): CostFunction.affine(0.0, 5.0),
            ("e", "s1"): CostFunction.affine(1.0, 5.0),
        }
        model = tiny_model(fns)
        report = validate_slope_bound(model, alpha=1e-3)
        assert not report.ok
        assert report.violations == (("e", "s0", 0.0),)

    def test_quadratic_without_linear_term_fails(self):
        # derivative of 2w^2 is 4w, which vanishes at zero load
        fns = {("e", "s"): CostFunction.polynomial([0.0, 0.0, 2.0])}
        model = tiny_model(fns, states=("s",))
        report = validate_slope_bound(model, alpha=0.1)
        assert not report.ok
        assert report.violations[0][:2] == ("e", "s")


class TestCostModelValidation:
    def test_incomplete_table_rejected(self):
        fns = {("e", "s0"): CostFunction.affine(1.0, 1.0)}
        with pytest.raises(CostError):
            CostModel(["e"], ["s0", "s1"], fns, np.eye(1))

    def test_non_spd_sigma_rejected(self):
        fns = {
            ("a", "s"): CostFunction.affine(1.0, 1.0),
            ("b", "s"): CostFunction.affine(1.0, 1.0),
        }
        with pytest.raises(CostError):
            CostModel(["a", "b"], ["s"], fns, [[1.0, 2.0], [2.0, 1.0]])

    def test_asymmetric_sigma_rejected(self):
        fns = {
            ("a", "s"): CostFunction.affine(1.0, 1.0),
            ("b", "s"): CostFunction.affine(1.0, 1.0),
        }
        with pytest.raises(CostError):
            CostModel(["a", "b"], ["s"], fns, [[1.0, 0.5], [0.0, 1.0]])
