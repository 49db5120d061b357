import json
import math

import numpy as np
import pytest

from cxsharp.comparison import gaussian_stop_loss
from cxsharp.envelope import make_envelope
from cxsharp.verifier import Source, StopLossCurve, Verdict, convex_order_check
from cxsharp.tensorize import (
    CATALOG,
    DiscreteLaw,
    DiscreteMartingaleTree,
    Node,
    Profile,
    RidgeFunction,
    RidgeTerm,
    ScaledGaussian,
    ScaledLaplace,
    TreeError,
    check_conditional_dominance,
    critical_points,
    discrete_tail_ok,
    discretize_extremal,
    enumerate_expectation,
    hinge,
    law_dominated,
    product_tree,
    random_instance,
    random_tail_tree,
    ridge_catalog,
    ridge_mc_check,
    tensorization_check,
    tree_from_document,
    tree_to_document,
    unit_direction,
)

import oracle_values as ov

COIN = DiscreteLaw([-1.0, 1.0], [0.5, 0.5])


def law_curve(law):
    return StopLossCurve(Source.ANALYTIC, law.stop_loss, law.mean)


class TestDiscreteLaw:
    def test_validation(self):
        with pytest.raises(TreeError):
            DiscreteLaw([0.0, 1.0], [0.5, 0.6])
        with pytest.raises(TreeError):
            DiscreteLaw([0.0, 1.0], [0.5])
        with pytest.raises(TreeError):
            DiscreteLaw([], [])
        with pytest.raises(TreeError):
            DiscreteLaw([0.0, math.nan], [0.5, 0.5])

    def test_stop_loss_paths_agree(self):
        law = DiscreteLaw(np.linspace(-2, 3, 2001), np.full(2001, 1 / 2001))
        small = np.linspace(-4, 5, 101)
        big = np.linspace(-4, 5, 100_001)
        np.testing.assert_allclose(law.stop_loss(big)[::1000], law.stop_loss(small), atol=1e-13)

    def test_laplace_tangency(self):
        lap = ScaledLaplace(1.5)
        for q in (0.1, 0.5, 0.8):
            t = lap.tangency(q)
            assert 0.5 * math.exp(-abs(t) / 1.5) == pytest.approx(q if t >= 0 else 1 - q)

    def test_tail_envelope_membership(self):
        env = make_envelope("gaussian")
        assert discrete_tail_ok(COIN, env)
        assert not discrete_tail_ok(DiscreteLaw([-3.0, 3.0], [0.5, 0.5]), env)


class TestConditionalDominance:
    def test_coin_against_sharp_gaussian(self, gauss):
        tree = product_tree([COIN, COIN])
        assert check_conditional_dominance(tree, [ScaledGaussian(gauss.scale)] * 2).ok

    def test_wide_law_fails(self, gauss):
        wide = DiscreteLaw([-3.0, 3.0], [0.5, 0.5])
        tree = DiscreteMartingaleTree(1, Node(wide, None, "wide"))
        res = check_conditional_dominance(tree, [ScaledGaussian(gauss.scale)])
        assert not res.ok and res.node == "wide" and res.gap < 0
        # the violation is visible at u = 2 in closed form
        assert wide.stop_loss(2.0) == 0.5 > gaussian_stop_loss(gauss.scale, 2.0)

    def test_mean_mismatch_reported(self):
        tree = DiscreteMartingaleTree(1, Node(DiscreteLaw([0.0, 2.0], [0.5, 0.5])))
        res = check_conditional_dominance(tree, [ScaledGaussian(3.0)])
        assert not res.ok and res.reason == "mean mismatch" and res.u is None

    def test_depth_mismatch(self):
        with pytest.raises(TreeError):
            check_conditional_dominance(product_tree([COIN]), [ScaledGaussian(1.0)] * 2)

    def test_critical_points_include_tangencies(self, gauss):
        comp = ScaledGaussian(gauss.scale)
        pts = critical_points(COIN, comp)
        assert set(pts.tolist()) == {-1.0, 0.0, 1.0}

    def test_kink_rule_matches_dense_grid(self):
        # inside the support hull the minimum sits at a critical point; outside it
        # the gap is nonnegative for any law with the comparator's mean
        rng = np.random.default_rng(4)
        for _ in range(30):
            x = rng.normal(size=4)
            p = rng.dirichlet(np.ones(4))
            law = DiscreteLaw(x - p @ x, p)
            comp = ScaledGaussian(float(rng.uniform(0.3, 2.0)))
            _, _, gap, _ = law_dominated(law, comp)
            grid = np.linspace(law.support.min(), law.support.max(), 400_001)
            dense = np.min(np.asarray(comp.stop_loss(grid)) - law.stop_loss(grid))
            assert gap <= dense + 1e-12
            assert gap >= dense - 1e-8


class TestEnumeration:
    def test_examples(self):
        tree = product_tree([COIN, COIN])
        assert enumerate_expectation(tree, lambda x: np.ones(len(x))) == pytest.approx(1.0, abs=1e-15)
        assert enumerate_expectation(tree, lambda x: x.sum(axis=1)) == pytest.approx(0.0, abs=1e-15)
        assert enumerate_expectation(tree, CATALOG["max"]) == pytest.approx(0.5, abs=1e-15)

    def test_martingale_mean_zero(self):
        for k in range(20):
            tree, _ = random_instance(3, k, 3)
            assert enumerate_expectation(tree, lambda x: x.sum(axis=1)) == pytest.approx(0.0, abs=1e-12)

    def test_affine_invariance(self):
        rng = np.random.default_rng(8)
        for k in range(20):
            tree, comps = random_instance(5, k, 3)
            b, a = float(rng.normal()), rng.normal(size=3)
            yt = product_tree(comps)
            for name, f in CATALOG.items():
                g = lambda x, f=f: f(x) + b + x @ a  # noqa: E731
                lhs_shift = enumerate_expectation(tree, g) - enumerate_expectation(tree, f)
                rhs_shift = enumerate_expectation(yt, g) - enumerate_expectation(yt, f)
                assert lhs_shift == pytest.approx(b, abs=1e-12)
                assert rhs_shift == pytest.approx(b, abs=1e-12)


class TestTensorizationCheck:
    def test_discrete_exact(self):
        tree, comps = random_instance(0, 0, 3)
        rep = tensorization_check(tree, comps)
        assert rep.status == "checked" and rep.exact and rep.holds
        assert {r.name for r in rep.results} == set(CATALOG)
        assert all(r.stderr == 0 for r in rep.results)

    def test_random_instances_hold(self):
        for k in range(100):
            tree, comps = random_instance(11, k, 3)
            rep = tensorization_check(tree, comps)
            assert rep.status == "checked" and rep.holds, k

    def test_gaussian_comparators_mc(self, gauss):
        tree = random_tail_tree(1, 0, 3)
        comps = [ScaledGaussian(gauss.scale)] * 3
        rep = tensorization_check(tree, comps, n_mc=200_000, seed=1)
        assert rep.status == "checked" and not rep.exact and rep.holds
        assert all(r.stderr > 0 for r in rep.results)

    def test_necessity_probe(self):
        violated = 0
        for k in range(50):
            tree, comps = random_instance(2, k, 2, dominated=False)
            rep = tensorization_check(tree, comps)
            assert rep.status == "skipped" and not rep.results
            forced = tensorization_check(tree, comps, force=True)
            assert forced.status == "forced"
            violated += not forced.holds
        assert violated >= 1

    def test_discretized_extremal_below_sharp_scale(self, xstar, gauss):
        law = discretize_extremal(xstar)
        tree = DiscreteMartingaleTree(1, Node(law))
        c = 0.99 * gauss.scale
        kappa = c * gauss.quantile
        rep = tensorization_check(tree, [ScaledGaussian(c)], {"hinge": hinge(kappa)}, n_mc=1_000_000, seed=1, force=True)
        assert not rep.hypothesis.ok
        assert not rep.holds
        # and the exact comparator side agrees with the MC figure
        assert rep.results[0].rhs == pytest.approx(gaussian_stop_loss(c, kappa), abs=4 * rep.results[0].stderr)

    def test_one_dimensional_consistency(self, gauss):
        agree = 0
        for k in range(50):
            tree, comps = random_instance(21, k, 1, dominated=k % 2 == 0)
            law = tree.root.law
            grid = np.union1d(law.support, comps[0].support)
            verdict = convex_order_check(law_curve(law), law_curve(comps[0]), grid).verdict
            rep = tensorization_check(tree, comps)
            assert rep.hypothesis.ok == (verdict is Verdict.DOMINATED), k
            agree += 1
        assert agree == 50

    def test_one_dimensional_consistency_gaussian(self):
        rng = np.random.default_rng(12)
        outcomes = set()
        for _ in range(50):
            x = rng.normal(size=3)
            p = rng.dirichlet(np.ones(3))
            law = DiscreteLaw(x - p @ x, p)
            comp = ScaledGaussian(float(rng.uniform(0.5, 2.0)))
            grid = np.union1d(np.linspace(-20, 20, 400_001), law.support)
            analytic = StopLossCurve(Source.ANALYTIC, comp.stop_loss, 0.0)
            verdict = convex_order_check(law_curve(law), analytic, grid).verdict
            ok = check_conditional_dominance(DiscreteMartingaleTree(1, Node(law)), [comp]).ok
            assert ok == (verdict is Verdict.DOMINATED)
            outcomes.add(ok)
        assert outcomes == {True, False}


class TestDocuments:
    def test_round_trip(self):
        tree, comps = random_instance(7, 3, 3)
        doc = json.loads(json.dumps(tree_to_document(tree, comps)))
        assert doc["schema_version"] == 1
        tree2, comps2 = tree_from_document(doc)
        c1, p1 = tree.paths()
        c2, p2 = tree2.paths()
        assert np.array_equal(c1, c2) and np.array_equal(p1, p2)
        assert [c.to_document() for c in comps2] == [c.to_document() for c in comps]

    def test_gaussian_and_laplace_comparators(self):
        doc = {"depth": 2, "comparators": [{"type": "gaussian", "scale": 2.0}, {"type": "laplace", "scale": 1.5}],
               "root": {"id": "r", "support": [-1, 1], "probs": [0.5, 0.5],
                        "children": [{"support": [-1, 1], "probs": [0.5, 0.5]},
                                     {"id": "hot", "support": [-4, 4], "probs": [0.5, 0.5]}]}}
        tree, comps = tree_from_document(doc)
        assert isinstance(comps[0], ScaledGaussian) and isinstance(comps[1], ScaledLaplace)
        res = check_conditional_dominance(tree, comps)
        assert not res.ok and res.node == "hot"

    @pytest.mark.parametrize("doc", [
        [],
        {"depth": 1, "comparators": [{"type": "gaussian", "scale": 1.0}]},
        {"depth": 1, "comparators": [], "root": {"support": [0], "probs": [1]}},
        {"depth": 1, "comparators": [{"type": "cauchy", "scale": 1.0}], "root": {"support": [0], "probs": [1]}},
        {"depth": 1, "comparators": [{"type": "gaussian", "scale": -1}], "root": {"support": [0], "probs": [1]}},
        {"depth": 1, "comparators": [{"type": "gaussian", "scale": 1}], "root": {"support": [0, 1], "probs": [0.2, 0.2]}},
        {"depth": 2, "comparators": [{"type": "gaussian", "scale": 1}] * 2, "root": {"support": [-1, 1], "probs": [0.5, 0.5]}},
        {"depth": 1, "comparators": [{"type": "gaussian", "scale": 1}], "root": {"probs": [1]}},
    ])
    def test_malformed(self, doc):
        with pytest.raises(TreeError):
            tree_from_document(doc)


class TestRidge:
    N = 200_000

    def test_catalog_holds(self):
        v = unit_direction(8, 0)
        for f in ridge_catalog(v, 0):
            assert ridge_mc_check(v, f, self.N, 3).holds, f.name

    def test_orthogonal_abs(self, gauss):
        v = unit_direction(8, 0)
        f = {g.name: g for g in ridge_catalog(v, 0)}["abs_orthogonal"]
        rep = ridge_mc_check(v, f, self.N, 3)
        assert rep.lhs == pytest.approx(0.0, abs=1e-12)
        assert rep.rhs == pytest.approx(gauss.scale * math.sqrt(2 / math.pi), abs=4 * rep.rhs_stderr)

    def test_square_is_variance(self, gauss):
        v = unit_direction(8, 0)
        f = {g.name: g for g in ridge_catalog(v, 0)}["square_direction"]
        rep = ridge_mc_check(v, f, 1_000_000, 1)
        assert rep.lhs == pytest.approx(ov.VAR_XSTAR_G, abs=4 * rep.lhs_stderr)
        assert rep.rhs == pytest.approx(gauss.scale_squared, abs=4 * rep.rhs_stderr)
        assert ov.VAR_XSTAR_G <= ov.C0_SQ

    def test_hinge_along_direction_is_one_dimensional(self, gauss, xstar):
        v = unit_direction(5, 2)
        f = RidgeFunction(0.0, np.zeros(5), (RidgeTerm(1.0, v, Profile("hinge", gauss.tangency)),))
        rep = ridge_mc_check(v, f, 1_000_000, 1)
        assert rep.lhs == pytest.approx(float(xstar.stop_loss(gauss.tangency)), abs=4 * rep.lhs_stderr)
        assert rep.rhs == pytest.approx(gaussian_stop_loss(gauss.scale, gauss.tangency), abs=4 * rep.rhs_stderr)

    def test_shrunk_scale_detected(self, gauss):
        v = unit_direction(4, 1)
        c = 0.9 * gauss.scale
        f = RidgeFunction(0.0, np.zeros(4), (RidgeTerm(1.0, v, Profile("hinge", c * gauss.quantile)),))
        assert not ridge_mc_check(v, f, 1_000_000, 1, scale=c).holds

    def test_non_unit_direction_warns(self):
        v = 2 * unit_direction(3, 0)
        f = RidgeFunction(0.0, np.zeros(3), (RidgeTerm(1.0, v / 2, Profile("abs")),))
        with pytest.warns(UserWarning):
            ridge_mc_check(v, f, 1000, 0)

    def test_validation(self):
        with pytest.raises(ValueError):
            Profile("cube")
        with pytest.raises(ValueError):
            RidgeTerm(-1.0, np.ones(2), Profile("abs"))
