import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from secmargin.attack import (
    DistortionBudget,
    apply_map_to_sequence,
    optimal_attack_map,
    optimal_attack_map_linf,
    optimal_attack_map_tr,
    round_map_counts,
)
from secmargin.divergence import h_c, kl_divergence
from secmargin.margin import security_margin_linf
from secmargin.pmf import Pmf, bernoulli, empirical_type, sample_sequence, type_counts
from secmargin.transport import CostSpec, TransportMap, emd, map_cost

from conftest import random_pmf
from oracles import attack_binary

HAM = CostSpec.hamming()


def budget(l, cost=HAM):
    return DistortionBudget(cost, l)


def assert_admissible(sol, p_y, b):
    assert np.allclose(sol.map.flow.sum(axis=1), p_y.probs, atol=1e-9)
    assert map_cost(sol.map, b.metric) <= b.l_max + 1e-8
    assert sol.objective_bits >= 0


class TestBudget:
    def test_validation(self):
        with pytest.raises(ValueError):
            DistortionBudget(HAM, -0.1)
        with pytest.raises(ValueError):
            DistortionBudget("l2", 1)
        assert DistortionBudget("linf", 2).is_linf


class TestOptimalAttack:
    def test_zero_budget_is_identity(self):
        p_y, p_x = Pmf(0, [0.2, 0.5, 0.3]), Pmf(0, [0.4, 0.4, 0.2])
        sol = optimal_attack_map(p_y, p_x, budget(0.0, CostSpec.lp(1)))
        assert np.allclose(sol.map.flow, np.diag(p_y.probs), atol=1e-12)
        assert sol.objective_bits == pytest.approx(kl_divergence(p_y, p_x), abs=1e-12)

    def test_enough_budget_reaches_target(self):
        p_y, p_x = Pmf(0, [0.2, 0.5, 0.3]), Pmf(0, [0.4, 0.4, 0.2])
        c = CostSpec.lp(2)
        sol = optimal_attack_map(p_y, p_x, budget(emd(p_y, p_x, c), c))
        assert sol.objective_bits <= 1e-6
        assert np.allclose(sol.attacked_type.probs, p_x.probs, atol=1e-3)
        assert sol.gap <= 1e-8

    def test_bernoulli_example(self):
        sol = optimal_attack_map(bernoulli(0.8), bernoulli(0.5), budget(0.1))
        assert sol.attacked_type.probs == pytest.approx([0.3, 0.7], abs=1e-8)
        assert sol.objective_bits == pytest.approx(kl_divergence(bernoulli(0.7), bernoulli(0.5)), abs=1e-9)

    def test_forbidden_columns(self):
        p_y, p_x = Pmf(0, [0.5, 0.5, 0.0]), Pmf(0, [0.0, 0.5, 0.5])
        # moving the mass off symbol 0 costs 0.5
        sol = optimal_attack_map(p_y, p_x, budget(0.6, CostSpec.lp(1)))
        assert np.all(sol.map.flow[:, 0] == 0)
        assert np.isfinite(sol.objective_bits)
        assert optimal_attack_map(p_y, p_x, budget(0.3, CostSpec.lp(1))).objective_bits == np.inf

    def test_unreachable_support_is_infinite(self):
        p_y, p_x = Pmf(0, [1.0, 0.0, 0.0]), Pmf(0, [0.0, 0.0, 1.0])
        sol = optimal_attack_map(p_y, p_x, budget(1.0, CostSpec.lp(1)))
        assert sol.objective_bits == np.inf

    def test_alphabet_mismatch(self):
        with pytest.raises(ValueError):
            optimal_attack_map(bernoulli(0.5), Pmf(0, [0.2, 0.3, 0.5]), budget(0.1))

    def test_json(self):
        sol = optimal_attack_map(bernoulli(0.8), bernoulli(0.5), budget(0.1))
        d = json.loads(sol.to_json())
        assert {"objective_bits", "gap", "flow"} <= set(d)
        assert all(len(t) == 3 for t in d["flow"])

    def test_history_non_increasing(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            p_y, p_x = random_pmf(rng, 4), random_pmf(rng, 4)
            c = CostSpec.lp(1)
            sol = optimal_attack_map(p_y, p_x, budget(0.5 * emd(p_y, p_x, c), c))
            h = np.array(sol.history)
            assert np.all(np.diff(h) <= 1e-12 * (1 + np.abs(h[:-1])))

    @given(st.integers(2, 5), st.integers(0, 2**32 - 1), st.floats(0, 1.2))
    @settings(max_examples=60, deadline=None)
    def test_feasible_and_budget_monotone(self, k, seed, frac):
        rng = np.random.default_rng(seed)
        p_y, p_x = random_pmf(rng, k, zeros=True), random_pmf(rng, k)
        c = CostSpec.lp(1 + rng.integers(0, 2))
        e = emd(p_y, p_x, c)
        lo = optimal_attack_map(p_y, p_x, budget(frac * e, c))
        hi = optimal_attack_map(p_y, p_x, budget(frac * e + 0.1 * e, c))
        assert_admissible(lo, p_y, budget(frac * e, c))
        assert lo.converged and hi.converged
        assert hi.objective_bits <= lo.objective_bits + 1e-9

    def test_binary_oracle(self):
        rng = np.random.default_rng(100)
        for _ in range(100):
            a, b, l = rng.random(), rng.uniform(0.01, 0.99), rng.random() * 0.5
            sol = optimal_attack_map(bernoulli(a), bernoulli(b), budget(l))
            assert sol.objective_bits == pytest.approx(attack_binary(a, b, l), abs=1e-6)


    @pytest.mark.parametrize("k", [2, 4])
    def test_certified_positive_just_below_threshold(self, rng, k):
        # the optimum is quadratic in the shortfall, so it is tiny but must
        # still be certifiably nonzero: objective - gap > 0
        cost = HAM if k == 2 else CostSpec.lp(1)
        for _ in range(3):
            p_y, p_x = random_pmf(rng, k), random_pmf(rng, k)
            E = emd(p_y, p_x, cost)
            below = optimal_attack_map(p_y, p_x, budget(E - 1e-4, cost))
            at = optimal_attack_map(p_y, p_x, budget(E, cost))
            assert below.objective_bits - below.gap > 0
            assert at.objective_bits <= at.gap + 1e-12


class TestTrainingAttack:
    def test_zero_budget(self):
        p_y, p_t = Pmf(0, [0.2, 0.5, 0.3]), Pmf(0, [0.4, 0.4, 0.2])
        sol = optimal_attack_map_tr(p_y, p_t, budget(0.0), 2.0)
        assert sol.objective_bits == pytest.approx(h_c(p_y, p_t, 2.0), abs=1e-10)

    def test_enough_budget(self):
        p_y, p_t = Pmf(0, [0.2, 0.5, 0.3]), Pmf(0, [0.4, 0.4, 0.2])
        c = CostSpec.lp(1)
        sol = optimal_attack_map_tr(p_y, p_t, budget(emd(p_y, p_t, c), c), 1.5)
        assert sol.objective_bits <= 1e-6

    def test_below_ks_objective(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            p_y, p_x = random_pmf(rng, 3), random_pmf(rng, 3)
            c = CostSpec.lp(1)
            b = budget(0.4 * emd(p_y, p_x, c), c)
            tr = optimal_attack_map_tr(p_y, p_x, b, 1.0)
            ks = optimal_attack_map(p_y, p_x, b)
            assert tr.objective_bits <= ks.objective_bits + 1e-9
            assert_admissible(tr, p_y, b)

    def test_bad_c(self):
        with pytest.raises(ValueError):
            optimal_attack_map_tr(bernoulli(0.5), bernoulli(0.5), budget(0.1), 0.0)


class TestLinfAttack:
    def test_zero_is_identity(self):
        p_y, p_x = Pmf(0, [0.2, 0.5, 0.3]), Pmf(0, [0.4, 0.4, 0.2])
        sol = optimal_attack_map_linf(p_y, p_x, 0)
        assert np.allclose(sol.map.flow, np.diag(p_y.probs), atol=1e-12)
        assert sol.objective_bits == pytest.approx(kl_divergence(p_y, p_x), abs=1e-12)

    def test_margin_budget_reaches_zero(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            p_y, p_x = random_pmf(rng, 5), random_pmf(rng, 5)
            m = security_margin_linf(p_y, p_x).value
            sol = optimal_attack_map_linf(p_y, p_x, m)
            assert sol.objective_bits <= 1e-6
            ii, jj = np.nonzero(sol.map.flow > 1e-9)
            assert np.all(np.abs(ii - jj) <= m)
            full = optimal_attack_map_linf(p_y, p_x, 4)
            assert full.objective_bits <= 1e-6

    def test_band_support(self):
        p_y, p_x = Pmf(0, [0.7, 0.1, 0.1, 0.1]), Pmf(0, [0.1, 0.1, 0.1, 0.7])
        sol = optimal_attack_map(p_y, p_x, DistortionBudget("linf", 1))
        ii, jj = np.nonzero(sol.map.flow > 1e-12)
        assert np.all(np.abs(ii - jj) <= 1)
        assert sol.objective_bits > 0


class TestApplyMap:
    def test_identity(self):
        y = sample_sequence(Pmf(0, [0.3, 0.3, 0.4]), 50, 1)
        t = empirical_type(y, 3)
        z = apply_map_to_sequence(y, TransportMap(0, 0, np.diag(t.probs)), 5)
        assert np.array_equal(z, y)

    def test_all_zeros_become_ones(self):
        y = np.array([0, 0, 1, 1, 1])
        f = np.array([[0.0, 0.4], [0.0, 0.6]])
        z = apply_map_to_sequence(y, TransportMap(0, 0, f), 0)
        assert z.tolist() == [1] * 5

    def test_exact_count(self):
        y = np.array([1] * 80 + [0] * 20)
        f = np.array([[0.2, 0.0], [0.1, 0.7]])
        z = apply_map_to_sequence(y, TransportMap(0, 0, f), 3)
        assert int(z.sum()) == 70
        assert np.all(z[y == 0] == 0)

    def test_mismatch(self):
        with pytest.raises(ValueError):
            apply_map_to_sequence(np.array([0, 0, 1]), TransportMap(0, 0, np.diag([0.5, 0.5])), 0)

    def test_joint_type_matches_rounded_map_and_deterministic(self):
        rng = np.random.default_rng(9)
        for trial in range(30):
            k, n = 4, int(rng.integers(5, 300))
            p_y = Pmf(0, rng.dirichlet(np.ones(k)))
            y = sample_sequence(p_y, n, trial)
            ty = empirical_type(y, k)
            c = CostSpec.lp(1)
            b = budget(0.3, c)
            sol = optimal_attack_map(ty, random_pmf(rng, k), b)
            z1 = apply_map_to_sequence(y, sol.map, trial)
            z2 = apply_map_to_sequence(y, sol.map, trial)
            assert np.array_equal(z1, z2)
            joint = np.zeros((k, k), dtype=int)
            np.add.at(joint, (y, z1), 1)
            assert np.array_equal(joint, round_map_counts(sol.map.flow, type_counts(y, k)))
            realized = np.mean(np.abs(y - z1))
            assert realized <= b.l_max + k**2 / n

    def test_round_counts_row_sums(self):
        f = np.array([[1 / 3, 1 / 3 - 1e-17], [0.0, 1 / 3]])
        rows = np.array([2, 1])
        counts = round_map_counts(f, rows)
        assert counts.sum(axis=1).tolist() == [2, 1]
