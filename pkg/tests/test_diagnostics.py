import itertools
import math

import numpy as np
import pytest

from conftest import potts_pair, random_feasible, random_instance, zero_instance
from crffw import (Adaptive, CapacityError, Constant, ConvergenceParams,
                   CrfInstance, EdgeList, EntropyRegularizer, L2Regularizer,
                   LineSearch, SolverConfig, VanillaFW, brute_force_map,
                   convergence_params, decrease_bound, feasible_set_diameter,
                   finite_diff_gradient, potts_matrix, project_feasible,
                   round_bcd, run_generalized_fw, tightness_report,
                   vertex_regularizer_constancy)


def hand_enumeration(instance):
    # independent re-enumeration via plain Python sums
    best = None
    for lab in itertools.product(range(instance.n_labels), repeat=instance.n_nodes):
        lab = np.array(lab)
        e = instance.energy_discrete(lab)
        if best is None or e < best[0] - 1e-15:
            best = (e, lab)
    return best


class TestBruteForceMap:
    def test_two_node_potts(self):
        report = brute_force_map(potts_pair())
        assert report.optimal_energy == pytest.approx(1.0)
        np.testing.assert_array_equal(report.optimal_labeling, [0, 0])
        assert report.enumerated_count == 4

    def test_zero_instance_tie_breaks_to_all_zeros(self):
        report = brute_force_map(zero_instance(3, 2))
        assert report.optimal_energy == 0.0
        np.testing.assert_array_equal(report.optimal_labeling, [0, 0, 0])

    def test_single_node_unary_argmin(self, rng):
        u = rng.standard_normal((1, 5))
        inst = CrfInstance(u, EdgeList(1, 5, np.zeros((0, 2), int), np.zeros((0, 5, 5))))
        report = brute_force_map(inst)
        assert report.optimal_labeling[0] == int(np.argmin(u))

    def test_energy_matches_reevaluation(self, rng):
        for _ in range(30):
            inst = random_instance(rng)
            report = brute_force_map(inst)
            assert inst.energy_discrete(report.optimal_labeling) == pytest.approx(
                report.optimal_energy, abs=0.0)
            e_hand, _ = hand_enumeration(inst)
            assert report.optimal_energy == pytest.approx(e_hand, abs=1e-12)

    def test_capacity_guard(self):
        inst = zero_instance(30, 2)  # 2^30 labelings
        with pytest.raises(CapacityError):
            brute_force_map(inst)

    def test_lexicographic_tie_break(self):
        # constant energy: the first labeling in lexicographic order wins
        inst = zero_instance(3, 3)
        report = brute_force_map(inst)
        np.testing.assert_array_equal(report.optimal_labeling, [0, 0, 0])


class TestFiniteDiffGradient:
    def test_zero_pairwise(self, rng):
        u = rng.standard_normal((3, 2))
        inst = CrfInstance(u, EdgeList(3, 2, np.zeros((0, 2), int), np.zeros((0, 2, 2))))
        x = random_feasible(rng, 3, 2)
        np.testing.assert_allclose(finite_diff_gradient(inst, x), u, atol=1e-8)

    def test_quadratic_exactness_unit_scale(self, rng):
        inst = random_instance(rng, n=3, d=2, kind="dense")
        x = random_feasible(rng, 3, 2)
        np.testing.assert_allclose(finite_diff_gradient(inst, x, h=1e-5),
                                   inst.gradient(x), atol=1e-9)

    def test_rejects_bad_step(self, rng):
        inst = random_instance(rng)
        x = random_feasible(rng, inst.n_nodes, inst.n_labels)
        with pytest.raises(ValueError):
            finite_diff_gradient(inst, x, h=0.0)


class TestTightnessReport:
    def test_one_hot_optimum_is_tight(self):
        inst = potts_pair()
        report = brute_force_map(inst)
        x = inst.one_hot(report.optimal_labeling)
        out = tightness_report(inst, x, reg=None, x_is_global_min=True)
        assert out.e_rounded_nearest == pytest.approx(out.e_star)
        assert out.e_rounded_bcd == pytest.approx(out.e_star)

    def test_l2_bound_arithmetic(self):
        inst = potts_pair()
        x = np.full((2, 2), 0.5)
        out = tightness_report(inst, x, reg=L2Regularizer(1.0))
        # n=2, d=2: M = 1, m = 0.5
        assert out.bound_bcd == pytest.approx(out.e_star + 0.5)

    def test_sandwich_for_random_points(self, rng):
        for _ in range(20):
            inst = random_instance(rng)
            x = random_feasible(rng, inst.n_nodes, inst.n_labels)
            out = tightness_report(inst, x)
            assert out.e_star <= out.e_rounded_bcd + 1e-9
            assert out.e_rounded_bcd <= inst.energy_relaxed(x) + 1e-9

    def test_certified_global_min_bounds(self, rng):
        # zero-pairwise + l2: the regularized relaxation is separable and
        # its global minimizer is the projected scaled unary
        lam = 0.7
        u = rng.standard_normal((3, 3))
        inst = CrfInstance(u, EdgeList(3, 3, np.zeros((0, 2), int), np.zeros((0, 3, 3))))
        x_star = project_feasible(-u / lam)
        tightness_report(inst, x_star, reg=L2Regularizer(lam), x_is_global_min=True)


class TestDecreaseBoundTable:
    def test_strongly_convex_adaptive(self):
        params = ConvergenceParams(l_f=3.0, sigma_g=1.0, diameter=2.0)
        assert decrease_bound(params, Adaptive(), 0, 2.0, 1.0) == pytest.approx(
            params.omega * 2.0)

    def test_concave_constant(self):
        params = ConvergenceParams(l_f=0.0, sigma_g=0.0, diameter=2.0)
        assert decrease_bound(params, Constant(0.25), 5, 2.0, 1.0) == pytest.approx(0.5)

    def test_convex_constant_with_slack(self):
        params = ConvergenceParams(l_f=2.0, sigma_g=0.0, diameter=2.0)
        val = decrease_bound(params, Constant(0.5), 0, 3.0, 1.0)
        assert val == pytest.approx(0.5 * 3.0 - 0.5 * 2.0 * 4.0 * 0.25)

    def test_strongly_convex_small_constant(self):
        params = ConvergenceParams(l_f=1.0, sigma_g=1.0, diameter=2.0)
        # omega = 0.5, alpha = 0.25 < 2*omega: alpha*min(1, 2 - alpha/omega)*S
        assert decrease_bound(params, Constant(0.25), 0, 4.0, 1.0) == pytest.approx(1.0)

    def test_line_search_shares_adaptive_row(self):
        params = ConvergenceParams(l_f=3.0, sigma_g=1.0, diameter=2.0)
        assert decrease_bound(params, LineSearch(), 0, 2.0, 1.0) == pytest.approx(
            decrease_bound(params, Adaptive(), 0, 2.0, 1.0))


class TestConvergenceParams:
    def test_omega_and_diameter(self, rng):
        inst = random_instance(rng, n=8)
        params = convergence_params(inst, L2Regularizer(2.0))
        assert params.sigma_g == 2.0
        assert params.omega == pytest.approx(2.0 / (params.l_f + 2.0))
        assert params.diameter == pytest.approx(math.sqrt(16.0))
        assert feasible_set_diameter(2) == pytest.approx(2.0)

    def test_omega_degenerate(self):
        assert ConvergenceParams(l_f=0.0, sigma_g=0.0, diameter=1.0).omega == 1.0


class TestVertexRegularizerConstancy:
    def test_builtin_regularizers_constant(self):
        assert vertex_regularizer_constancy(L2Regularizer(0.5), 3, 2)
        assert vertex_regularizer_constancy(EntropyRegularizer(1.5), 3, 2)
        assert vertex_regularizer_constancy(None, 3, 2)

    def test_asymmetric_fixture_detected(self):
        class FavorsLabelZero:
            def value(self, x):
                return float(x[:, 0].sum())

        assert not vertex_regularizer_constancy(FavorsLabelZero(), 2, 2)


class TestDecodedQualityFloor:
    def test_fw_line_search_often_finds_the_optimum(self, rng):
        hits = 0
        total = 100
        for _ in range(total):
            inst = random_instance(rng, n=int(rng.integers(2, 7)),
                                   d=int(rng.integers(2, 4)))
            report = brute_force_map(inst)
            cfg = SolverConfig(VanillaFW(), schedule=LineSearch(), max_iters=200)
            x, _ = run_generalized_fw(inst, cfg)
            decoded = inst.energy_discrete(round_bcd(inst, x))
            assert decoded >= report.optimal_energy - 1e-9
            if decoded <= report.optimal_energy + 1e-9:
                hits += 1
        assert hits >= 0.7 * total
