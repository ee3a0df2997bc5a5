"""Logistic surrogate-loss primitives and classification metrics.

The surrogate loss used throughout is the logistic loss

    phi(u) = log(1 + exp(-u)),

evaluated at margins u = y * (x @ beta - c).  Its first two derivatives are
needed by the estimators and the score test, so all three are exposed here
in numerically stable form.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy import special, stats

__all__ = [
    "phi",
    "phi_prime",
    "phi_double_prime",
    "sign_plus",
    "accuracy",
    "rank_correlation",
    "f1_score",
]

# Margins are clipped here before any exponentiation; beyond this the loss
# and its derivatives are constant to double precision anyway.
MARGIN_CLIP = 700.0


def _clip(u):
    return np.clip(np.asarray(u, dtype=float), -MARGIN_CLIP, MARGIN_CLIP)


def phi(u):
    """Logistic loss log(1 + exp(-u)), stable for |u| up to 700."""
    return np.logaddexp(0.0, -_clip(u))


def phi_prime(u):
    """First derivative -1 / (1 + exp(u))."""
    return -special.expit(-_clip(u))


def phi_double_prime(u):
    """Second derivative exp(u) / (1 + exp(u))^2, symmetric in u."""
    u = _clip(u)
    return special.expit(u) * special.expit(-u)


def sign_plus(x):
    """Sign function with sign(0) := +1, returning int values in {-1, +1}."""
    return np.where(np.asarray(x) >= 0, 1, -1)


def accuracy(rule, data, outcome_index: int = 0) -> float:
    """Fraction of samples where sign(x @ beta - c) matches the outcome.

    ``rule`` is a DecisionRule and ``data`` a Dataset; sign(0) counts as +1.
    """
    if data.n == 0:
        raise ValueError("accuracy is undefined on an empty dataset")
    if outcome_index < 0 or outcome_index >= data.n_outcomes:
        raise ValueError(f"outcome index {outcome_index} out of range")
    preds = sign_plus(data.covariates @ rule.beta - rule.c)
    return float(np.mean(preds == data.outcomes[:, outcome_index]))


def rank_correlation(a, b, method: str = "kendall") -> float:
    """Rank correlation between two equal-length vectors.

    Defaults to Kendall's tau-b (tie-corrected); Spearman's rho is available
    via ``method="spearman"``.  A constant input makes the statistic
    undefined, in which case NaN is returned.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise ValueError("inputs must be 1-d vectors of equal length")
    if a.size < 2:
        raise ValueError("rank correlation needs at least 2 observations")
    if np.all(a == a[0]) or np.all(b == b[0]):
        return float("nan")
    if method == "kendall":
        return float(stats.kendalltau(a, b).statistic)
    if method == "spearman":
        return float(stats.spearmanr(a, b).statistic)
    raise ValueError(f"unknown rank correlation method {method!r}")


def f1_score(predictions, labels) -> float:
    """Harmonic mean of precision and recall with +1 as the positive class.

    Returns 0 when precision + recall is 0; the degenerate all-negative case
    (no positive labels and no positive predictions) also returns 0, with a
    warning because neither precision nor recall is informative there.
    """
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape or predictions.ndim != 1:
        raise ValueError("predictions and labels must be equal-length vectors")
    pos_pred = predictions == 1
    pos_lab = labels == 1
    tp = int(np.sum(pos_pred & pos_lab))
    fp = int(np.sum(pos_pred & ~pos_lab))
    fn = int(np.sum(~pos_pred & pos_lab))
    if tp + fp == 0 and tp + fn == 0:
        warnings.warn("no positive labels or predictions; F1 set to 0",
                      RuntimeWarning, stacklevel=2)
        return 0.0
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)
