"""Estimation procedures for the target classification rule.

The main pipeline pools all binary outcomes through a shared-direction
L1-penalized logistic fit, then calibrates the pooled direction for the
target outcome: a sparse correction delta (with one coordinate pinned to
zero for identifiability) plus a rescaling gamma of the pooled index,

    beta_cal = delta + gamma * beta_pool,        delta[k] = 0,

with the pin coordinate k selected on held-out data and the whole procedure
cross-fitted over two sample halves.  Comparators (target-only baseline,
direct transfer with gamma fixed at 1, group-lasso multi-task, pooled rule)
and an F1-based auxiliary-outcome screen live here too.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset, DecisionRule, DegenerateOutcomeError
from .metrics import phi, f1_score
from .solver import (
    PenalizedProblem,
    SolverConfig,
    default_lambda_grid,
    iter_regularization_path,
    lambda_max,
    regularization_path,
)

__all__ = [
    "PooledFit",
    "CalibratedFit",
    "HalfFit",
    "CrossFitResult",
    "fit_single_outcome",
    "fit_pooled",
    "fit_calibrated_k",
    "select_k_star",
    "cross_fit_estimate",
    "two_dataset_estimate",
    "fit_transfer_direct",
    "fit_multitask_group_lasso",
    "multitask_pooled_rule",
    "select_auxiliary_by_f1",
    "single_outcome_problem",
    "pooled_problem",
    "calibration_problem",
    "multitask_problem",
    "stratified_folds",
    "cross_validated_lasso",
    "split_halves",
]

# Fold fits can run looser than the final refit; both remain deterministic.
FOLD_CONFIG = SolverConfig(max_iterations=1_500, tolerance=1e-7)
FINAL_CONFIG = SolverConfig(max_iterations=10_000, tolerance=1e-8)

N_LAMBDA = 50
LAMBDA_MIN_RATIO = 1e-3
MAX_CALIBRATION_CANDIDATES = 25


# ---------------------------------------------------------------------------
# result containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PooledFit:
    """Shared direction with one intercept per pooled outcome."""

    beta_pool: np.ndarray
    intercepts: np.ndarray
    support: tuple[int, ...]
    lambda_chosen: float
    outcome_indices: tuple[int, ...]

    def intercept_for(self, outcome: int) -> float:
        if outcome not in self.outcome_indices:
            raise ValueError(f"outcome {outcome} was not part of the pooled fit")
        return float(self.intercepts[self.outcome_indices.index(outcome)])


@dataclass(frozen=True)
class CalibratedFit:
    """Calibration solution on the domain {delta : delta[k] = 0}."""

    k: int
    delta: np.ndarray
    gamma: float
    c: float
    beta_cal: np.ndarray
    lambda_chosen: float
    validation_loss: float = math.nan


@dataclass(frozen=True)
class HalfFit:
    """Calibrated rule fitted on one sample half (indices into the full data)."""

    indices: np.ndarray
    beta: np.ndarray
    c: float
    k_star: int | None
    pooled: PooledFit | None
    fallback: bool


@dataclass(frozen=True)
class CrossFitResult:
    """Averaged cross-fitted rule plus the two half fits used to build it."""

    rule: DecisionRule
    halves: tuple[HalfFit, HalfFit]
    n: int


# ---------------------------------------------------------------------------
# cross-validation machinery
# ---------------------------------------------------------------------------

def stratified_folds(n: int, k: int, labels=None) -> list[np.ndarray]:
    """Deterministic fold assignment (validation index arrays).

    Indices are dealt round-robin after sorting by label so every fold sees a
    balanced class mix; with ``labels=None`` the deal is by index order.  The
    assignment involves no randomness, keeping every fit a pure function of
    its inputs.
    """
    k_eff = max(2, min(k, n))
    if labels is None:
        order = np.arange(n)
    else:
        labels = np.asarray(labels)
        order = np.lexsort((np.arange(n), labels))
    return [np.sort(order[i::k_eff]) for i in range(k_eff)]


# A fold path stops once its held-out loss has risen this many grid points
# in a row past its running minimum; the small-penalty tail is by far the
# most expensive part of a path and cannot win the selection anymore.
CV_EARLY_STOP = 8


def cross_validated_lasso(build_problem, validation_loss, n: int,
                          folds: list[np.ndarray],
                          lambda_grid=None,
                          fold_config: SolverConfig = FOLD_CONFIG,
                          final_config: SolverConfig = FINAL_CONFIG):
    """Tune the penalty level by K-fold cross-validation and refit.

    ``build_problem(rows)`` must return the PenalizedProblem restricted to
    the given sample rows (raising DegenerateOutcomeError when the rows
    cannot support a fit); ``validation_loss(coefficients, rows)`` scores a
    coefficient vector on held-out rows.  The grid is shared across folds
    and anchored at the full-data critical penalty; ties go to the larger
    penalty.  Returns (final Solution, chosen lam, mean CV losses, grid).
    """
    full_problem = build_problem(np.arange(n))
    if lambda_grid is None:
        lam_hi = lambda_max(full_problem)
        grid = default_lambda_grid(lam_hi, N_LAMBDA, LAMBDA_MIN_RATIO)
    else:
        grid = np.asarray(lambda_grid, dtype=float)

    losses = np.full((len(folds), grid.size), np.nan)
    evaluated = np.zeros(len(folds), dtype=int)
    usable = np.zeros(len(folds), dtype=bool)
    all_rows = np.arange(n)
    for f, val_rows in enumerate(folds):
        train_rows = np.setdiff1d(all_rows, val_rows, assume_unique=True)
        try:
            problem = build_problem(train_rows)
        except DegenerateOutcomeError:
            warnings.warn(f"fold {f} skipped: training rows are degenerate",
                          RuntimeWarning, stacklevel=2)
            continue
        best_loss = math.inf
        rising = 0
        for i, sol in enumerate(iter_regularization_path(problem, grid, fold_config)):
            loss = validation_loss(sol.coefficients, val_rows)
            losses[f, i] = loss
            evaluated[f] = i + 1
            if loss < best_loss:
                best_loss = loss
                rising = 0
            elif loss > best_loss:
                rising += 1
                if rising >= CV_EARLY_STOP:
                    break
            # exact ties (e.g. the all-zero head of the grid when this
            # fold's critical penalty sits below the shared anchor) neither
            # improve nor count toward the stop
        usable[f] = True

    if usable.any():
        # Compare penalty levels on the prefix every usable fold evaluated.
        limit = int(evaluated[usable].min())
        mean_losses = np.full(grid.size, np.nan)
        mean_losses[:limit] = losses[usable, :limit].mean(axis=0)
        best = int(np.argmin(mean_losses[:limit]))
    else:
        warnings.warn("no usable cross-validation fold; using the critical "
                      "penalty level", RuntimeWarning, stacklevel=2)
        mean_losses = np.full(grid.size, np.nan)
        best = 0
    path = regularization_path(full_problem, grid[: best + 1], final_config)
    return path[best], float(grid[best]), mean_losses, grid


# ---------------------------------------------------------------------------
# problem builders (shared by the fitters and by direct solver-level tests)
# ---------------------------------------------------------------------------

def single_outcome_problem(X, y, lam: float, standardize: bool = True) -> PenalizedProblem:
    """L1 logistic problem for one outcome: design [X | -1], intercept free."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    design = np.hstack([X, -np.ones((n, 1))])
    mask = np.concatenate([np.ones(p, dtype=bool), [False]])
    return PenalizedProblem(design, np.asarray(y, dtype=float), lam,
                            penalty_mask=mask, standardize=standardize)


def pooled_problem(X, outcome_columns, lam: float, standardize: bool = True) -> PenalizedProblem:
    """Stacked shared-direction problem with one free intercept per outcome.

    Rows are replicated once per outcome; the penalized block holds the p
    shared covariate columns and each outcome gets a one-hot column valued
    -1 whose coefficient is that outcome's threshold.  Averaging over all
    stacked rows averages the per-outcome risks.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(outcome_columns, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n, p = X.shape
    m = Y.shape[1]
    design = np.zeros((m * n, p + m))
    for j in range(m):
        design[j * n:(j + 1) * n, :p] = X
        design[j * n:(j + 1) * n, p + j] = -1.0
    response = Y.T.reshape(-1)
    mask = np.concatenate([np.ones(p, dtype=bool), np.zeros(m, dtype=bool)])
    return PenalizedProblem(design, response, lam, penalty_mask=mask,
                            standardize=standardize)


def calibration_problem(X, y0, pooled_index, k: int | None, lam: float,
                        standardize: bool = True) -> PenalizedProblem:
    """Calibration problem [X_{-k} | X @ beta_pool | -1] with delta penalized.

    ``k=None`` keeps all p covariate columns penalized (the unconstrained
    variant without a pinned coordinate); the pooled-index and intercept
    columns are always free.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    keep = [q for q in range(p) if q != k] if k is not None else list(range(p))
    design = np.hstack([
        X[:, keep],
        np.asarray(pooled_index, dtype=float)[:, None],
        -np.ones((n, 1)),
    ])
    mask = np.concatenate([np.ones(len(keep), dtype=bool), [False, False]])
    return PenalizedProblem(design, np.asarray(y0, dtype=float), lam,
                            penalty_mask=mask, standardize=standardize)


def transfer_problem(X, y0, offset, lam: float, standardize: bool = True) -> PenalizedProblem:
    """Calibration with gamma frozen at 1: the pooled index enters as an offset."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    design = np.hstack([X, -np.ones((n, 1))])
    mask = np.concatenate([np.ones(p, dtype=bool), [False]])
    return PenalizedProblem(design, np.asarray(y0, dtype=float), lam,
                            penalty_mask=mask, offset=np.asarray(offset, dtype=float),
                            standardize=standardize)


def multitask_problem(X, outcome_columns, lam: float, standardize: bool = True) -> PenalizedProblem:
    """Group-lasso multi-task problem: one coefficient block per outcome.

    Coefficient layout is [beta^(0) | ... | beta^(m-1) | intercepts]; group q
    ties coordinate q across the m outcome blocks.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(outcome_columns, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n, p = X.shape
    m = Y.shape[1]
    design = np.zeros((m * n, m * p + m))
    for j in range(m):
        design[j * n:(j + 1) * n, j * p:(j + 1) * p] = X
        design[j * n:(j + 1) * n, m * p + j] = -1.0
    response = Y.T.reshape(-1)
    groups = tuple(tuple(j * p + q for j in range(m)) for q in range(p))
    return PenalizedProblem(design, response, lam, groups=groups,
                            standardize=standardize)


# ---------------------------------------------------------------------------
# validation losses
# ---------------------------------------------------------------------------

def _logistic_loss(margins) -> float:
    return float(np.mean(phi(margins)))


def rule_validation_loss(beta, c, X, y) -> float:
    """Held-out average logistic loss of a linear rule."""
    return _logistic_loss(np.asarray(y) * (X @ beta - c))


def _check_not_degenerate(y, what: str):
    y = np.asarray(y)
    if y.size == 0 or np.all(y == y.flat[0]):
        raise DegenerateOutcomeError(f"{what} has a single class")


# ---------------------------------------------------------------------------
# single-outcome baseline
# ---------------------------------------------------------------------------

def _fit_outcome_rule(data: Dataset, outcome: int, cv_folds: int,
                      lam: float | None = None) -> tuple[DecisionRule, float]:
    X = data.covariates
    y = data.outcome(outcome).astype(float)
    _check_not_degenerate(y, f"outcome column {outcome}")
    p = data.p

    def build(rows):
        _check_not_degenerate(y[rows], "training outcome")
        return single_outcome_problem(X[rows], y[rows], 0.0)

    def val_loss(coef, rows):
        return rule_validation_loss(coef[:p], coef[p], X[rows], y[rows])

    if lam is not None:
        sol = regularization_path(build(np.arange(data.n)), [lam], FINAL_CONFIG)[0]
        chosen = lam
    else:
        folds = stratified_folds(data.n, cv_folds, labels=y)
        sol, chosen, _, _ = cross_validated_lasso(build, val_loss, data.n, folds)
    return DecisionRule(sol.coefficients[:p], sol.coefficients[p]), chosen


def fit_single_outcome(data: Dataset, cv_folds: int = 5,
                       lam: float | None = None) -> DecisionRule:
    """L1-penalized logistic rule for the target outcome alone.

    The penalty level is tuned by K-fold cross-validation on held-out
    logistic loss unless ``lam`` is given explicitly.
    """
    rule, _ = _fit_outcome_rule(data, 0, cv_folds, lam=lam)
    return rule


# ---------------------------------------------------------------------------
# pooled estimation
# ---------------------------------------------------------------------------

def fit_pooled(data: Dataset, outcome_subset=None, cv_folds: int = 5,
               lam: float | None = None) -> PooledFit:
    """Shared-direction fit over several outcomes with per-outcome intercepts.

    Minimizes the average logistic risk over the stacked outcomes with an L1
    penalty on the shared direction only.  Degenerate outcome columns are
    dropped with a warning; folds are stratified on the target when pooled.
    """
    if outcome_subset is None:
        outcome_subset = tuple(range(data.n_outcomes))
    used = []
    for j in outcome_subset:
        j = int(j)
        if j < 0 or j >= data.n_outcomes:
            raise ValueError(f"outcome index {j} out of range")
        col = data.outcome(j)
        if np.all(col == col[0]):
            warnings.warn(f"outcome {j} dropped from pooling: single class",
                          RuntimeWarning, stacklevel=2)
            continue
        used.append(j)
    if not used:
        raise DegenerateOutcomeError("every requested outcome is degenerate")

    X = data.covariates
    Y = data.outcomes[:, used].astype(float)
    p = data.p
    m = len(used)

    def build(rows):
        sub = Y[rows]
        if all(np.all(sub[:, j] == sub[0, j]) for j in range(m)):
            raise DegenerateOutcomeError("all outcomes degenerate on fold")
        return pooled_problem(X[rows], sub, 0.0)

    def val_loss(coef, rows):
        beta, cs = coef[:p], coef[p:]
        index = X[rows] @ beta
        margins = Y[rows] * (index[:, None] - cs[None, :])
        return _logistic_loss(margins)

    if lam is not None:
        sol = regularization_path(build(np.arange(data.n)), [lam], FINAL_CONFIG)[0]
        chosen = lam
    else:
        labels = data.outcome(0) if 0 in used else None
        folds = stratified_folds(data.n, cv_folds, labels=labels)
        sol, chosen, _, _ = cross_validated_lasso(build, val_loss, data.n, folds)

    beta_pool = sol.coefficients[:p]
    return PooledFit(
        beta_pool=beta_pool,
        intercepts=sol.coefficients[p:],
        support=tuple(int(q) for q in np.flatnonzero(beta_pool)),
        lambda_chosen=float(chosen),
        outcome_indices=tuple(used),
    )


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------

def fit_calibrated_k(data: Dataset, pooled: PooledFit, k: int,
                     cv_folds: int = 5, lam: float | None = None) -> CalibratedFit:
    """Calibrate the pooled direction on the domain {delta : delta[k] = 0}.

    Solves for a sparse correction delta over the remaining covariates, a
    free rescaling gamma of the pooled index, and a threshold c.
    """
    if k not in pooled.support:
        raise ValueError(f"coordinate {k} is not in the pooled support")
    if not np.any(pooled.beta_pool):
        raise ValueError("pooled direction is identically zero")

    X = data.covariates
    y0 = data.outcome(0).astype(float)
    p = data.p
    index = X @ pooled.beta_pool
    keep = [q for q in range(p) if q != k]

    def build(rows):
        _check_not_degenerate(y0[rows], "training target outcome")
        return calibration_problem(X[rows], y0[rows], index[rows], k, 0.0)

    def val_loss(coef, rows):
        pred = X[rows][:, keep] @ coef[:p - 1] + index[rows] * coef[p - 1] - coef[p]
        return _logistic_loss(y0[rows] * pred)

    if lam is not None:
        sol = regularization_path(build(np.arange(data.n)), [lam], FINAL_CONFIG)[0]
        chosen = lam
    else:
        folds = stratified_folds(data.n, cv_folds, labels=y0)
        sol, chosen, _, _ = cross_validated_lasso(build, val_loss, data.n, folds)

    delta = np.zeros(p)
    delta[keep] = sol.coefficients[:p - 1]
    gamma = float(sol.coefficients[p - 1])
    c = float(sol.coefficients[p])
    return CalibratedFit(
        k=int(k),
        delta=delta,
        gamma=gamma,
        c=c,
        beta_cal=delta + gamma * pooled.beta_pool,
        lambda_chosen=float(chosen),
    )


def select_k_star(candidates, validation: Dataset) -> CalibratedFit:
    """Pick the candidate with the smallest held-out logistic loss.

    Ties break toward the smallest pinned coordinate k.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("no calibration candidates supplied")
    X = validation.covariates
    y0 = validation.outcome(0).astype(float)
    best = None
    for cand in candidates:
        loss = rule_validation_loss(cand.beta_cal, cand.c, X, y0)
        key = (loss, cand.k)
        if best is None or key < best[0]:
            best = (key, cand, loss)
    _, chosen, loss = best
    return replace(chosen, validation_loss=float(loss))


# ---------------------------------------------------------------------------
# cross-fitted estimation
# ---------------------------------------------------------------------------

def split_halves(n: int, split_seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded equal split; with odd n the first half gets the extra sample."""
    perm = np.random.default_rng(split_seed).permutation(n)
    cut = (n + 1) // 2
    return np.sort(perm[:cut]), np.sort(perm[cut:])


def candidate_coordinates(pooled: PooledFit,
                          cap: int = MAX_CALIBRATION_CANDIDATES) -> list[int]:
    """Support coordinates to calibrate, largest |beta_pool| first when capped."""
    support = list(pooled.support)
    if len(support) > cap:
        mag = np.abs(pooled.beta_pool)
        support = sorted(support, key=lambda q: (-mag[q], q))[:cap]
    return sorted(support)


def _calibrated_half(data: Dataset, fit_idx: np.ndarray, sel_idx: np.ndarray,
                     pooled_fn, cv_folds: int, max_candidates: int) -> HalfFit:
    half = data.subset(fit_idx)
    pooled = pooled_fn(half)
    if not pooled.support:
        warnings.warn("pooled support is empty; falling back to the "
                      "target-only fit on this half", RuntimeWarning, stacklevel=2)
        rule = fit_single_outcome(half, cv_folds)
        return HalfFit(indices=fit_idx, beta=rule.beta, c=rule.c,
                       k_star=None, pooled=pooled, fallback=True)
    # One calibration penalty level per half: tuned by CV on the candidate
    # with the largest pooled coefficient, then shared by the other pins.
    ks = candidate_coordinates(pooled, max_candidates)
    mag = np.abs(pooled.beta_pool)
    k_tune = min(ks, key=lambda q: (-mag[q], q))
    tuned = fit_calibrated_k(half, pooled, k_tune, cv_folds)
    candidates = [tuned if k == k_tune
                  else fit_calibrated_k(half, pooled, k, cv_folds,
                                        lam=tuned.lambda_chosen)
                  for k in ks]
    chosen = select_k_star(candidates, data.subset(sel_idx))
    return HalfFit(indices=fit_idx, beta=chosen.beta_cal, c=chosen.c,
                   k_star=chosen.k, pooled=pooled, fallback=False)


def _average_halves(halves, n: int) -> CrossFitResult:
    h1, h2 = halves
    rule = DecisionRule(0.5 * (h1.beta + h2.beta), 0.5 * (h1.c + h2.c))
    return CrossFitResult(rule=rule, halves=(h1, h2), n=n)


def cross_fit_estimate(data: Dataset, cv_folds: int = 5, split_seed: int = 0,
                       max_candidates: int = MAX_CALIBRATION_CANDIDATES) -> CrossFitResult:
    """Full pooled-then-calibrated pipeline, cross-fitted over two halves.

    Each half receives its own pooled fit and per-coordinate calibrations;
    the pin coordinate is selected on the opposite half; the two calibrated
    rules are averaged.  Both half fits are retained for score-based
    inference.
    """
    if data.n < 8:
        raise ValueError("cross-fitting needs at least 8 samples")
    half1, half2 = split_halves(data.n, split_seed)

    def pooled_fn(half):
        return fit_pooled(half, tuple(range(data.n_outcomes)), cv_folds)

    halves = tuple(
        _calibrated_half(data, fit_idx, sel_idx, pooled_fn, cv_folds, max_candidates)
        for fit_idx, sel_idx in ((half1, half2), (half2, half1))
    )
    return _average_halves(halves, data.n)


def two_dataset_estimate(large: Dataset, small: Dataset, cv_folds: int = 5,
                         split_seed: int = 0,
                         max_candidates: int = MAX_CALIBRATION_CANDIDATES) -> CrossFitResult:
    """Pool on a large auxiliary-outcome dataset, calibrate on the small one.

    The pooled fit uses only the auxiliary outcome columns of ``large`` (its
    target column is ignored); calibration and pin-coordinate selection are
    cross-fitted on ``small`` exactly as in ``cross_fit_estimate``, with the
    single large-data pooled fit shared by both halves.  Gains over fitting
    the small dataset alone come from a large auxiliary sample; with
    comparable sizes no improvement is claimed.
    """
    if large.p != small.p:
        raise ValueError("covariate dimensions of the two datasets differ")
    if large.n_aux < 1:
        raise ValueError("the large dataset must carry at least one auxiliary outcome")
    if small.n < 8:
        raise ValueError("cross-fitting needs at least 8 samples")

    pooled = fit_pooled(large, tuple(range(1, large.n_outcomes)), cv_folds)
    half1, half2 = split_halves(small.n, split_seed)
    halves = tuple(
        _calibrated_half(small, fit_idx, sel_idx, lambda half: pooled,
                         cv_folds, max_candidates)
        for fit_idx, sel_idx in ((half1, half2), (half2, half1))
    )
    return _average_halves(halves, small.n)


# ---------------------------------------------------------------------------
# comparators
# ---------------------------------------------------------------------------

def fit_transfer_direct(data: Dataset, cv_folds: int = 5,
                        lam: float | None = None) -> DecisionRule:
    """Direct transfer: pooled fit, then one correction with gamma fixed at 1.

    No sample splitting and no pinned coordinate; the pooled index enters
    the correction problem as a fixed offset.
    """
    y0 = data.outcome(0).astype(float)
    _check_not_degenerate(y0, "target outcome")
    pooled = fit_pooled(data, tuple(range(data.n_outcomes)), cv_folds)
    X = data.covariates
    p = data.p
    offset = X @ pooled.beta_pool

    def build(rows):
        _check_not_degenerate(y0[rows], "training target outcome")
        return transfer_problem(X[rows], y0[rows], offset[rows], 0.0)

    def val_loss(coef, rows):
        pred = X[rows] @ coef[:p] + offset[rows] - coef[p]
        return _logistic_loss(y0[rows] * pred)

    if lam is not None:
        sol = regularization_path(build(np.arange(data.n)), [lam], FINAL_CONFIG)[0]
    else:
        folds = stratified_folds(data.n, cv_folds, labels=y0)
        sol, _, _, _ = cross_validated_lasso(build, val_loss, data.n, folds)
    delta = sol.coefficients[:p]
    return DecisionRule(pooled.beta_pool + delta, sol.coefficients[p])


def fit_multitask_group_lasso(data: Dataset, cv_folds: int = 5,
                              lam: float | None = None) -> DecisionRule:
    """Multi-task logistic fit with a row-wise group-lasso penalty.

    Each outcome gets its own coefficient vector; coordinate q is penalized
    through the L2 norm of its row across outcomes.  Returns the target
    outcome's column with its intercept.
    """
    y_target = data.outcome(0)
    if np.all(y_target == y_target[0]):
        raise DegenerateOutcomeError("target outcome has a single class")
    used = [0]
    for j in range(1, data.n_outcomes):
        col = data.outcome(j)
        if np.all(col == col[0]):
            warnings.warn(f"outcome {j} dropped from multi-task fit: single class",
                          RuntimeWarning, stacklevel=2)
            continue
        used.append(j)

    X = data.covariates
    Y = data.outcomes[:, used].astype(float)
    p = data.p
    m = len(used)

    def build(rows):
        _check_not_degenerate(Y[rows, 0], "training target outcome")
        return multitask_problem(X[rows], Y[rows], 0.0)

    def val_loss(coef, rows):
        B = coef[: m * p].reshape(m, p)
        cs = coef[m * p:]
        margins = Y[rows] * (X[rows] @ B.T - cs[None, :])
        return _logistic_loss(margins)

    if lam is not None:
        sol = regularization_path(build(np.arange(data.n)), [lam], FINAL_CONFIG)[0]
    else:
        folds = stratified_folds(data.n, cv_folds, labels=y_target)
        sol, _, _, _ = cross_validated_lasso(build, val_loss, data.n, folds)
    return DecisionRule(sol.coefficients[:p], sol.coefficients[m * p])


def multitask_pooled_rule(pooled: PooledFit) -> DecisionRule:
    """The pooled fit itself as a rule for the target outcome."""
    return DecisionRule(pooled.beta_pool, pooled.intercept_for(0))


# ---------------------------------------------------------------------------
# auxiliary-outcome selection
# ---------------------------------------------------------------------------

def select_auxiliary_by_f1(data: Dataset, split_seed: int = 0, cv_folds: int = 5,
                           score_against: str = "target") -> int | None:
    """Screen auxiliary outcomes by held-out F1 against the target labels.

    One half trains a penalized logistic rule per outcome; the other half
    scores each rule's predictions by F1.  Returns the auxiliary index with
    the highest score, or None when the target-trained rule beats every
    auxiliary (or no auxiliary can be scored).  ``score_against="own"``
    scores each rule against its own outcome instead of the target.
    """
    if data.n_aux < 1:
        raise ValueError("no auxiliary outcomes to select from")
    if score_against not in ("target", "own"):
        raise ValueError("score_against must be 'target' or 'own'")
    half1, half2 = split_halves(data.n, split_seed)
    train, test = data.subset(half1), data.subset(half2)

    scores: dict[int, float] = {}
    for j in range(data.n_outcomes):
        try:
            rule, _ = _fit_outcome_rule(train, j, cv_folds)
        except DegenerateOutcomeError:
            warnings.warn(f"outcome {j} skipped in F1 screening: single class",
                          RuntimeWarning, stacklevel=2)
            continue
        preds = rule.predict(test.covariates)
        reference = test.outcome(0) if score_against == "target" else test.outcome(j)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            scores[j] = f1_score(preds, reference)

    aux_scores = {j: s for j, s in scores.items() if j >= 1}
    if not aux_scores:
        warnings.warn("no auxiliary outcome could be scored", RuntimeWarning,
                      stacklevel=2)
        return None
    best_aux = min(aux_scores, key=lambda j: (-aux_scores[j], j))
    if 0 in scores and scores[0] > aux_scores[best_aux]:
        return None
    return best_aux
