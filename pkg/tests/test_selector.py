import numpy as np
import pytest

from conftest import unit_rows
from otselect.ot import SimplexWeights, cost_matrix, ot_gradient, SinkhornParams
from otselect.selector import (
    EvoParams,
    SelectorError,
    budget,
    evoselect,
    exp_update,
    standardize,
    top_k,
)


class TestStandardize:
    def test_constant_vector_maps_to_zero(self):
        np.testing.assert_array_equal(standardize(np.full(5, 3.7)), np.zeros(5))

    def test_one_two_three(self):
        np.testing.assert_allclose(
            standardize(np.array([1.0, 2.0, 3.0])), [-1.22474, 0.0, 1.22474], atol=1e-5
        )

    def test_moments(self, rng):
        v = rng.standard_normal(200) * 4 + 7
        z = standardize(v)
        assert abs(z.mean()) <= 1e-12
        assert abs(np.sqrt(np.mean(z * z)) - 1.0) <= 1e-9

    def test_rejects_nonfinite(self):
        with pytest.raises(SelectorError):
            standardize(np.array([1.0, np.nan]))


class TestExpUpdate:
    def test_zero_gradient_is_identity(self, rng):
        w = SimplexWeights(np.array([0.2, 0.3, 0.5]))
        out = exp_update(w, np.zeros(3), 0.1)
        np.testing.assert_allclose(out.values, w.values, atol=1e-15)

    def test_zero_lr_is_identity(self, rng):
        w = SimplexWeights(np.array([0.2, 0.8]))
        out = exp_update(w, rng.standard_normal(2), 0.0)
        np.testing.assert_allclose(out.values, w.values, atol=1e-15)

    def test_hand_computed_value(self):
        out = exp_update(SimplexWeights(np.array([0.5, 0.5])), np.array([1.0, -1.0]), 0.1)
        np.testing.assert_allclose(out.values, [0.45017, 0.54983], atol=1e-5)
        # closed form: (1 - sigmoid(0.2), sigmoid(0.2))
        sig = 1.0 / (1.0 + np.exp(-0.2))
        np.testing.assert_allclose(out.values, [1.0 - sig, sig], atol=1e-12)

    def test_preserves_positivity_and_sum(self, rng):
        w = SimplexWeights.uniform(40)
        for _ in range(50):
            w = exp_update(w, rng.standard_normal(40), 0.3)
            assert np.all(w.values > 0)
            assert abs(w.values.sum() - 1.0) <= 1e-9


class TestTopK:
    def test_simple(self):
        assert top_k(SimplexWeights(np.array([0.1, 0.5, 0.4])), 1) == [1]

    def test_tie_breaks_to_smaller_index(self):
        assert top_k(SimplexWeights.uniform(5), 3) == [0, 1, 2]

    def test_full_budget(self, rng):
        v = rng.random(7)
        w = SimplexWeights(v / v.sum())
        assert top_k(w, 7) == list(range(7))

    def test_out_of_range(self):
        with pytest.raises(SelectorError):
            top_k(SimplexWeights.uniform(3), 4)
        with pytest.raises(SelectorError):
            top_k(SimplexWeights.uniform(3), 0)


class TestBudget:
    @pytest.mark.parametrize("n,rho,expected", [(10, 0.5, 5), (10, 0.06, 1), (3, 1.0, 3), (7, 0.5, 3)])
    def test_floor_rule(self, n, rho, expected):
        assert budget(n, rho) == expected


class TestEvoselect:
    def test_full_ratio_selects_everything(self, rng):
        train, val = unit_rows(rng, 9, 6), unit_rows(rng, 4, 6)
        res = evoselect(train, val, EvoParams(rho=1.0, steps=3))
        assert res.selected == list(range(9))

    def test_single_candidate(self, rng):
        train, val = unit_rows(rng, 1, 5), unit_rows(rng, 3, 5)
        res = evoselect(train, val, EvoParams(rho=0.4, steps=2))
        assert res.selected == [0] and res.k == 1

    def test_planted_recovery_all_param_combos(self, planted):
        train, val = planted
        for steps in (10, 20):
            for eps in (0.5, 1.0):
                res = evoselect(train, val, EvoParams(rho=0.5, steps=steps, lr=0.1, epsilon=eps))
                assert res.selected == list(range(10)), (steps, eps)

    def test_planted_gradient_favors_duplicates(self, planted):
        # Brute-force check on the 20x10 cost matrix: at uniform weights the
        # transport dual must be strictly lower on every duplicate than on
        # every antipode.
        train, val = planted
        cost = cost_matrix(train, val)
        u = ot_gradient(
            SimplexWeights.uniform(train.n),
            SimplexWeights.uniform(val.n),
            cost,
            SinkhornParams(epsilon=0.5, tol=1e-10),
        )
        assert u[:10].max() < u[10:].min()

    def test_trace_contents(self, planted):
        train, val = planted
        res = evoselect(train, val, EvoParams(rho=0.5, steps=4))
        assert [r.step for r in res.trace] == [0, 1, 2, 3]
        assert all(np.isfinite(r.ot_value) for r in res.trace)
        assert all(r.sinkhorn_violation <= 1e-6 for r in res.trace)
        # transport pull decreases the regularized objective on this instance
        assert res.trace[-1].ot_value < res.trace[0].ot_value

    def test_simplex_invariant_every_step(self, rng):
        train, val = unit_rows(rng, 30, 8), unit_rows(rng, 12, 8)
        seen = []

        def observer(step, values):
            seen.append((step, values.min(), values.sum()))

        evoselect(train, val, EvoParams(rho=0.3, steps=8), _observer=observer)
        assert len(seen) == 8
        for _, lo, total in seen:
            assert lo > 0
            assert abs(total - 1.0) <= 1e-9

    def test_shift_invariance_bitwise(self, planted):
        train, val = planted
        params = EvoParams(rho=0.5, steps=10)
        base = evoselect(train, val, params)
        shifted = evoselect(train, val, params, _dual_shift=7.3)
        assert base.selected == shifted.selected
        np.testing.assert_array_equal(base.final_weights.values, shifted.final_weights.values)
        assert base.trace == shifted.trace

    def test_permutation_equivariance(self, rng):
        from otselect.features import FeatureMatrix

        train, val = unit_rows(rng, 24, 6), unit_rows(rng, 10, 6)
        params = EvoParams(rho=0.25, steps=6)
        base = evoselect(train, val, params)
        perm = rng.permutation(train.n)
        permuted = evoselect(FeatureMatrix(train.data[perm]), val, params)
        unpermuted = np.empty_like(permuted.final_weights.values)
        unpermuted[perm] = permuted.final_weights.values
        np.testing.assert_allclose(unpermuted, base.final_weights.values, atol=1e-6)
        assert sorted(int(perm[i]) for i in permuted.selected) == base.selected

    def test_zero_steps_degenerates_to_tie_rule(self, rng):
        train, val = unit_rows(rng, 10, 4), unit_rows(rng, 5, 4)
        res = evoselect(train, val, EvoParams(rho=0.3, steps=0))
        assert res.selected == [0, 1, 2]
        assert res.trace == []

    def test_warm_start_matches_cold_start(self, planted):
        train, val = planted
        params = EvoParams(
            rho=0.5, steps=10, sinkhorn=SinkhornParams(epsilon=0.5, tol=1e-10)
        )
        warm = evoselect(train, val, params)
        cold = evoselect(train, val, params, _cold_start=True)
        assert warm.selected == cold.selected
        np.testing.assert_allclose(
            warm.final_weights.values, cold.final_weights.values, atol=1e-8
        )

    def test_determinism(self, rng):
        train, val = unit_rows(rng, 15, 6), unit_rows(rng, 6, 6)
        params = EvoParams(rho=0.4, steps=5)
        a = evoselect(train, val, params)
        b = evoselect(train, val, params)
        assert a.selected == b.selected
        np.testing.assert_array_equal(a.final_weights.values, b.final_weights.values)
        assert a.trace == b.trace

    def test_selected_matches_topk_of_weights(self, rng):
        train, val = unit_rows(rng, 21, 5), unit_rows(rng, 8, 5)
        res = evoselect(train, val, EvoParams(rho=0.33, steps=4))
        assert res.selected == top_k(res.final_weights, res.k)
        assert res.k == budget(21, 0.33)
