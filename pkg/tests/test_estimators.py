import warnings

import numpy as np
import pytest

from auxcal.data import Dataset, DegenerateOutcomeError
from auxcal.estimators import (
    CalibratedFit,
    PooledFit,
    calibration_problem,
    candidate_coordinates,
    cross_fit_estimate,
    fit_calibrated_k,
    fit_multitask_group_lasso,
    fit_pooled,
    fit_single_outcome,
    fit_transfer_direct,
    multitask_pooled_rule,
    rule_validation_loss,
    select_auxiliary_by_f1,
    select_k_star,
    single_outcome_problem,
    split_halves,
    stratified_folds,
    transfer_problem,
    two_dataset_estimate,
)
from auxcal.metrics import accuracy, sign_plus
from auxcal.solver import SolverConfig, lambda_max, solve

from .conftest import toy_classification
from .oracles import newton_logistic

TIGHT = SolverConfig(max_iterations=50_000, tolerance=1e-11)


def pure_noise_data(n=40, p=5, seed=0, n_aux=1):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    cols = [np.where(rng.random(n) > 0.5, 1, -1) for _ in range(n_aux + 1)]
    return Dataset(X, np.column_stack(cols))


class TestFolds:
    def test_partition(self):
        folds = stratified_folds(11, 4, labels=np.array([1, -1] * 5 + [1]))
        seen = np.sort(np.concatenate(folds))
        assert np.array_equal(seen, np.arange(11))

    def test_deterministic(self):
        labels = np.array([1, -1, 1, 1, -1, -1, 1, -1])
        a = stratified_folds(8, 3, labels)
        b = stratified_folds(8, 3, labels)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_stratification_balances_classes(self):
        labels = np.array([1] * 20 + [-1] * 20)
        for fold in stratified_folds(40, 5, labels):
            vals = labels[fold]
            assert abs(int(np.sum(vals == 1)) - int(np.sum(vals == -1))) <= 1

    def test_clamps_to_n(self):
        assert len(stratified_folds(3, 5)) == 3


class TestSingleOutcome:
    def test_separable_toy_training_accuracy(self):
        data, _ = toy_classification(n=100, p=2, signal=(3.0, -2.0), seed=1,
                                     noise=0.0)
        rule = fit_single_outcome(data)
        assert accuracy(rule, data) >= 0.95

    def test_pure_noise_near_prior(self):
        # Monte-Carlo reference: best achievable accuracy on independent
        # labels is the larger class prior.
        data = pure_noise_data(n=200, p=4, seed=3)
        rule = fit_single_outcome(data)
        rng = np.random.default_rng(99)
        X_test = rng.standard_normal((20_000, 4))
        y_test = np.where(rng.random(20_000) > 0.5, 1, -1)
        test = Dataset(X_test, y_test)
        prior = max(np.mean(y_test == 1), np.mean(y_test == -1))
        assert accuracy(rule, test, 0) >= prior - 0.05

    def test_degenerate_labels_error(self):
        data = Dataset(np.random.default_rng(0).standard_normal((10, 2)),
                       np.ones((10, 1), dtype=int))
        with pytest.raises(DegenerateOutcomeError):
            fit_single_outcome(data)

    def test_deterministic(self, toy_data):
        a = fit_single_outcome(toy_data)
        b = fit_single_outcome(toy_data)
        assert np.array_equal(a.beta, b.beta) and a.c == b.c


class TestPooled:
    def test_target_only_matches_single_at_fixed_lambda(self, toy_data):
        single_problem = single_outcome_problem(
            toy_data.covariates, toy_data.outcome(0).astype(float), 0.0)
        lam = 0.3 * lambda_max(single_problem)
        pooled = fit_pooled(toy_data, (0,), lam=lam)
        rule = fit_single_outcome(toy_data, lam=lam)
        assert np.max(np.abs(pooled.beta_pool - rule.beta)) <= 1e-6
        assert pooled.intercepts[0] == pytest.approx(rule.c, abs=1e-6)

    def test_target_only_matches_single_under_cv(self, toy_data):
        pooled = fit_pooled(toy_data, (0,))
        rule = fit_single_outcome(toy_data)
        assert np.max(np.abs(pooled.beta_pool - rule.beta)) <= 1e-6

    def test_duplicated_outcome_matches_target_only(self):
        data, _ = toy_classification(n=150, p=5, seed=4, n_aux=1, aux_flip=0.0)
        lam = 0.2 * lambda_max(single_outcome_problem(
            data.covariates, data.outcome(0).astype(float), 0.0))
        both = fit_pooled(data, (0, 1), lam=lam)
        only = fit_pooled(data, (0,), lam=lam)
        assert np.max(np.abs(both.beta_pool - only.beta_pool)) <= 1e-6
        assert both.intercepts[0] == pytest.approx(both.intercepts[1], abs=1e-6)

    def test_degenerate_aux_dropped_with_warning(self):
        data, _ = toy_classification(n=60, p=4, seed=5)
        outcomes = np.column_stack([data.outcomes[:, 0],
                                    np.ones(60, dtype=int)])
        bad = Dataset(data.covariates, outcomes)
        with pytest.warns(RuntimeWarning, match="dropped"):
            pooled = fit_pooled(bad, (0, 1))
        assert pooled.outcome_indices == (0,)
        assert len(pooled.intercepts) == 1

    def test_all_degenerate_errors(self):
        data = Dataset(np.random.default_rng(1).standard_normal((10, 2)),
                       np.ones((10, 2), dtype=int))
        with pytest.raises(DegenerateOutcomeError):
            fit_pooled(data)

    def test_support_matches_nonzeros(self, toy_data):
        pooled = fit_pooled(toy_data)
        assert pooled.support == tuple(np.flatnonzero(pooled.beta_pool))


@pytest.fixture(scope="module")
def fitted():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        data, _ = toy_classification(n=160, p=6, seed=6, n_aux=1)
        pooled = fit_pooled(data)
    return data, pooled


class TestCalibration:

    def test_pin_is_exactly_zero_and_reassembly(self, fitted):
        data, pooled = fitted
        for k in pooled.support[:3]:
            fit = fit_calibrated_k(data, pooled, k)
            assert fit.delta[k] == 0.0
            assert np.array_equal(fit.beta_cal,
                                  fit.delta + fit.gamma * pooled.beta_pool)

    def test_k_outside_support_rejected(self, fitted):
        data, pooled = fitted
        outside = next(q for q in range(data.p) if q not in pooled.support)
        with pytest.raises(ValueError):
            fit_calibrated_k(data, pooled, outside)

    def test_zero_pooled_direction_rejected(self, fitted):
        data, _ = fitted
        zero = PooledFit(np.zeros(data.p), np.zeros(1), (0,), 0.1, (0,))
        with pytest.raises(ValueError):
            fit_calibrated_k(data, zero, 0)

    def test_huge_penalty_reduces_to_two_parameter_fit(self, fitted):
        data, pooled = fitted
        k = pooled.support[0]
        fit = fit_calibrated_k(data, pooled, k, lam=1e6)
        assert np.all(fit.delta == 0.0)
        # independent 2-parameter oracle on [pooled index | -1]
        index = data.covariates @ pooled.beta_pool
        design = np.column_stack([index, -np.ones(data.n)])
        oracle = newton_logistic(design, data.outcome(0).astype(float))
        assert fit.gamma == pytest.approx(oracle[0], abs=1e-4)
        assert fit.c == pytest.approx(oracle[1], abs=1e-4)

    def test_scale_invariance_of_selection(self, fitted):
        # Rescaling the pooled direction is absorbed by a rescaled gamma:
        # the selected rule's predictions on held-out data are unchanged
        # (coefficients and even the pinned coordinate may differ between
        # near-tied candidates, predictions must not).
        data, pooled = fitted
        scaled = PooledFit(2.0 * pooled.beta_pool, pooled.intercepts,
                           pooled.support, pooled.lambda_chosen,
                           pooled.outcome_indices)
        val = data.subset(np.arange(0, data.n, 3))
        ks = candidate_coordinates(pooled)
        lam = fit_calibrated_k(data, pooled, ks[0]).lambda_chosen
        a = select_k_star([fit_calibrated_k(data, pooled, k, lam=lam)
                           for k in ks], val)
        b = select_k_star([fit_calibrated_k(data, scaled, k, lam=lam)
                           for k in ks], val)
        margins_a = val.covariates @ a.beta_cal - a.c
        margins_b = val.covariates @ b.beta_cal - b.c
        assert np.array_equal(sign_plus(margins_a), sign_plus(margins_b))
        assert np.max(np.abs(margins_a - margins_b)) < 1e-4
        b_at_a = fit_calibrated_k(data, scaled, a.k, lam=lam)
        assert b_at_a.gamma == pytest.approx(a.gamma / 2.0, rel=1e-3)


class TestSelectKStar:
    def _candidate(self, k, beta, c):
        beta = np.asarray(beta, dtype=float)
        return CalibratedFit(k=k, delta=beta, gamma=0.0, c=c,
                             beta_cal=beta, lambda_chosen=0.1)

    def test_single_candidate_returned(self, toy_data):
        cand = self._candidate(0, np.ones(toy_data.p), 0.0)
        chosen = select_k_star([cand], toy_data)
        assert chosen.k == 0
        assert np.isfinite(chosen.validation_loss)

    def test_argmin_by_construction(self):
        rng = np.random.default_rng(8)
        X = rng.standard_normal((50, 2))
        y = np.where(X[:, 0] > 0, 1, -1)
        data = Dataset(X, y)
        good = self._candidate(0, [5.0, 0.0], 0.0)
        bad = self._candidate(1, [-5.0, 0.0], 0.0)
        assert select_k_star([bad, good], data).k == 0
        loss_good = rule_validation_loss(good.beta_cal, good.c, X, y.astype(float))
        loss_bad = rule_validation_loss(bad.beta_cal, bad.c, X, y.astype(float))
        assert loss_good < loss_bad

    def test_tie_breaks_to_smallest_k(self, toy_data):
        a = self._candidate(3, np.ones(toy_data.p), 0.5)
        b = self._candidate(7, np.ones(toy_data.p), 0.5)
        assert select_k_star([b, a], toy_data).k == 3

    def test_empty_candidates_rejected(self, toy_data):
        with pytest.raises(ValueError):
            select_k_star([], toy_data)


class TestCrossFit:
    def test_deterministic_replay(self):
        data, _ = toy_classification(n=120, p=6, seed=9, n_aux=1)
        a = cross_fit_estimate(data, split_seed=42)
        b = cross_fit_estimate(data, split_seed=42)
        assert np.array_equal(a.rule.beta, b.rule.beta)
        assert a.rule.c == b.rule.c
        assert all(np.array_equal(x.indices, y.indices)
                   for x, y in zip(a.halves, b.halves))

    def test_rule_is_average_of_halves(self):
        data, _ = toy_classification(n=100, p=5, seed=10, n_aux=1)
        res = cross_fit_estimate(data, split_seed=7)
        h1, h2 = res.halves
        assert np.array_equal(res.rule.beta, 0.5 * (h1.beta + h2.beta))
        assert res.rule.c == 0.5 * (h1.c + h2.c)

    def test_split_convention(self):
        half1, half2 = split_halves(9, split_seed=3)
        assert len(half1) == 5 and len(half2) == 4
        assert np.array_equal(np.sort(np.concatenate([half1, half2])), np.arange(9))

    def test_too_small_rejected(self):
        data = pure_noise_data(n=7, p=2, seed=1)
        with pytest.raises(ValueError):
            cross_fit_estimate(data)

    def test_empty_support_falls_back_with_warning(self):
        data = pure_noise_data(n=40, p=5, seed=0)
        with pytest.warns(RuntimeWarning, match="empty"):
            res = cross_fit_estimate(data, split_seed=0)
        assert any(h.fallback for h in res.halves)
        assert all(h.k_star is None for h in res.halves if h.fallback)

    def test_candidate_cap(self):
        beta = np.linspace(1.0, 0.1, 30)
        pooled = PooledFit(beta, np.zeros(1), tuple(range(30)), 0.1, (0,))
        ks = candidate_coordinates(pooled, cap=25)
        assert len(ks) == 25
        assert ks == sorted(ks)
        assert 29 not in ks  # smallest magnitude dropped


class TestTwoDataset:
    def test_matches_manual_variant_on_duplicated_data(self):
        data, _ = toy_classification(n=120, p=6, seed=11, n_aux=2, aux_flip=0.1)
        res = two_dataset_estimate(data, data, split_seed=5)

        # independent reconstruction from public pieces: pooled fit on the
        # auxiliaries only, shared across both calibration halves
        pooled = fit_pooled(data, (1, 2))
        half1, half2 = split_halves(data.n, 5)
        halves = []
        for fit_idx, sel_idx in ((half1, half2), (half2, half1)):
            sub = data.subset(fit_idx)
            ks = candidate_coordinates(pooled)
            mag = np.abs(pooled.beta_pool)
            k_tune = min(ks, key=lambda q: (-mag[q], q))
            tuned = fit_calibrated_k(sub, pooled, k_tune)
            cands = [tuned if k == k_tune
                     else fit_calibrated_k(sub, pooled, k, lam=tuned.lambda_chosen)
                     for k in ks]
            halves.append(select_k_star(cands, data.subset(sel_idx)))
        expect_beta = 0.5 * (halves[0].beta_cal + halves[1].beta_cal)
        expect_c = 0.5 * (halves[0].c + halves[1].c)
        assert np.array_equal(res.rule.beta, expect_beta)
        assert res.rule.c == expect_c

    def test_dimension_mismatch_rejected(self):
        a = pure_noise_data(n=20, p=3, seed=2)
        b = pure_noise_data(n=20, p=4, seed=2)
        with pytest.raises(ValueError):
            two_dataset_estimate(a, b)

    def test_requires_auxiliaries(self):
        a = pure_noise_data(n=20, p=3, seed=2, n_aux=0)
        b = pure_noise_data(n=20, p=3, seed=3)
        with pytest.raises(ValueError):
            two_dataset_estimate(a, b)


class TestTransferDirect:
    def test_zero_offset_reduces_to_single_outcome(self, toy_data):
        # gamma * 0 contributes nothing: with a zero pooled direction the
        # correction problem is exactly the target-only problem.
        y = toy_data.outcome(0).astype(float)
        lam = 0.2 * lambda_max(single_outcome_problem(toy_data.covariates, y, 0.0))
        a = solve(transfer_problem(toy_data.covariates, y,
                                   np.zeros(toy_data.n), lam), TIGHT)
        b = solve(single_outcome_problem(toy_data.covariates, y, lam), TIGHT)
        assert np.max(np.abs(a.coefficients - b.coefficients)) <= 1e-9

    def test_runs_and_beats_chance(self):
        data, _ = toy_classification(n=150, p=5, seed=12, n_aux=1, aux_flip=0.1)
        rule = fit_transfer_direct(data)
        assert accuracy(rule, data) > 0.7


class TestMultitask:
    def test_j0_reduces_to_single_outcome(self):
        data, _ = toy_classification(n=120, p=5, seed=13, n_aux=0)
        a = fit_multitask_group_lasso(data)
        b = fit_single_outcome(data)
        assert np.max(np.abs(a.beta - b.beta)) <= 1e-6
        assert a.c == pytest.approx(b.c, abs=1e-6)

    def test_duplicated_outcome_symmetric_blocks(self):
        data, _ = toy_classification(n=100, p=4, seed=14, n_aux=1, aux_flip=0.0)
        from auxcal.estimators import multitask_problem

        Y = data.outcomes.astype(float)
        prob = multitask_problem(data.covariates, Y, 0.05)
        sol = solve(prob, TIGHT)
        p = data.p
        assert np.max(np.abs(sol.coefficients[:p] - sol.coefficients[p:2 * p])) < 1e-6

    def test_degenerate_target_rejected(self):
        data = Dataset(np.random.default_rng(2).standard_normal((12, 3)),
                       np.column_stack([np.ones(12, dtype=int),
                                        np.where(np.arange(12) % 2 == 0, 1, -1)]))
        with pytest.raises(DegenerateOutcomeError):
            fit_multitask_group_lasso(data)


class TestMultitaskPooledRule:
    def test_exact_copies(self):
        pooled = PooledFit(np.array([1.0, 0.0, -2.0]), np.array([0.3, 0.7]),
                           (0, 2), 0.05, (0, 1))
        rule = multitask_pooled_rule(pooled)
        assert np.array_equal(rule.beta, pooled.beta_pool)
        assert rule.c == 0.3

    def test_j0_reduction(self, toy_data):
        rule = multitask_pooled_rule(fit_pooled(toy_data, (0,)))
        single = fit_single_outcome(toy_data)
        assert np.max(np.abs(rule.beta - single.beta)) <= 1e-6

    def test_target_absent_rejected(self):
        pooled = PooledFit(np.array([1.0]), np.array([0.1]), (0,), 0.05, (1,))
        with pytest.raises(ValueError):
            multitask_pooled_rule(pooled)


class TestSelectAuxiliaryByF1:
    def test_copy_beats_coin_flips(self):
        # Y1 duplicates the target, Y2 is an independent coin: the copy wins
        # in a majority of seeded splits.
        wins = 0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            n = 160
            X = rng.standard_normal((n, 4))
            y0 = np.where(X[:, 0] - X[:, 1]
                          + 0.6 * rng.standard_normal(n) > 0, 1, -1)
            y2 = np.where(rng.random(n) > 0.5, 1, -1)
            data = Dataset(X, np.column_stack([y0, y0, y2]))
            if select_auxiliary_by_f1(data, split_seed=seed) == 1:
                wins += 1
        assert wins > 10

    def test_pure_disagreement_returns_none(self):
        nones = 0
        for seed in range(20):
            rng = np.random.default_rng(100 + seed)
            n = 160
            X = rng.standard_normal((n, 4))
            y0 = np.where(X[:, 0] + 0.5 * rng.standard_normal(n) > 0, 1, -1)
            data = Dataset(X, np.column_stack([y0, -y0]))
            if select_auxiliary_by_f1(data, split_seed=seed) is None:
                nones += 1
        assert nones > 10

    def test_deterministic_replay(self):
        data, _ = toy_classification(n=100, p=4, seed=15, n_aux=2, aux_flip=0.2)
        assert (select_auxiliary_by_f1(data, split_seed=3)
                == select_auxiliary_by_f1(data, split_seed=3))

    def test_score_against_own_flag(self):
        data, _ = toy_classification(n=100, p=4, seed=16, n_aux=1, aux_flip=0.3)
        out = select_auxiliary_by_f1(data, split_seed=1, score_against="own")
        assert out in (None, 1)

    def test_requires_auxiliaries(self):
        data, _ = toy_classification(n=50, p=3, seed=17, n_aux=0)
        with pytest.raises(ValueError):
            select_auxiliary_by_f1(data)


class TestPinnedDomainEquivalence:
    def test_constrained_minimum_matches_unconstrained(self):
        # On a well-conditioned instance the best pinned-coordinate optimum
        # equals the unconstrained calibration optimum (same objective).
        rng = np.random.default_rng(20)
        n, p = 300, 10
        X = rng.standard_normal((n, p))
        beta = np.zeros(p)
        beta[:3] = (1.5, -1.0, 0.8)
        y = np.where(X @ beta + rng.standard_normal(n) > 0, 1, -1)
        data = Dataset(X, np.column_stack([y, y]))
        pooled = fit_pooled(data)
        assert pooled.support
        index = X @ pooled.beta_pool
        lam = 0.05
        tight = SolverConfig(max_iterations=200_000, tolerance=1e-13)
        y0 = data.outcome(0).astype(float)
        free = solve(calibration_problem(X, y0, index, None, lam,
                                         standardize=False), tight)
        best = min(
            solve(calibration_problem(X, y0, index, k, lam,
                                      standardize=False), tight).objective_value
            for k in pooled.support
        )
        rel = abs(best - free.objective_value) / max(1.0, abs(free.objective_value))
        assert rel <= 1e-6
        assert best >= free.objective_value - 1e-9
