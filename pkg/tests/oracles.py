"""Independent reference implementations used only by the tests.

Everything here is written directly against the mathematical definitions
(plain numpy, no package solver code) so the solver and estimators can be
checked against genuinely separate computations.
"""

from __future__ import annotations

import numpy as np


def logistic_loss(margins):
    m = np.clip(margins, -700, 700)
    return np.logaddexp(0.0, -m)


def penalized_objective(X, y, beta, lam, penalized=None):
    """Mean logistic loss plus lam * ||beta_penalized||_1 (no standardization)."""
    margins = y * (X @ beta)
    if penalized is None:
        pen = np.abs(beta).sum()
    else:
        pen = np.abs(beta[penalized]).sum()
    return float(np.mean(logistic_loss(margins)) + lam * pen)


def newton_logistic(X, y, max_iter=200, tol=1e-12):
    """Unregularized logistic regression by damped Newton iteration."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    beta = np.zeros(d)

    def value(b):
        return float(np.mean(logistic_loss(y * (X @ b))))

    current = value(beta)
    for _ in range(max_iter):
        m = np.clip(y * (X @ beta), -700, 700)
        s = 1.0 / (1.0 + np.exp(m))            # -phi'(m)
        grad = -(X.T @ (y * s)) / n
        w = s * (1.0 - s)                       # phi''(m)
        hess = (X.T * w) @ X / n + 1e-12 * np.eye(d)
        step = np.linalg.solve(hess, grad)
        scale = 1.0
        while scale > 1e-8:
            cand = beta - scale * step
            cand_val = value(cand)
            if cand_val <= current:
                break
            scale *= 0.5
        beta = beta - scale * step
        new = value(beta)
        if abs(current - new) <= tol * max(1.0, abs(current)):
            current = new
            break
        current = new
    return beta


def grid_search_2d(X, y, lam, span=3.0, coarse=0.04):
    """Dense 2-d grid minimizer of the L1-penalized logistic objective.

    Coarse pass at `coarse` spacing over [-span, span]^2, then refinement
    passes at 1e-3 and 1e-5 around the running best point (each window
    generously covers the previous pass's resolution).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)

    def evaluate(b1_vals, b2_vals):
        B1, B2 = np.meshgrid(b1_vals, b2_vals, indexing="ij")
        B = np.stack([B1.ravel(), B2.ravel()])
        best_val = np.inf
        best_pt = None
        chunk = 60_000
        for lo in range(0, B.shape[1], chunk):
            Bc = B[:, lo:lo + chunk]
            margins = y[:, None] * (X @ Bc)
            vals = logistic_loss(margins).mean(axis=0) + lam * np.abs(Bc).sum(axis=0)
            i = int(np.argmin(vals))
            if vals[i] < best_val:
                best_val = float(vals[i])
                best_pt = Bc[:, i].copy()
        return best_pt, best_val

    center, _ = evaluate(np.arange(-span, span + coarse / 2, coarse),
                         np.arange(-span, span + coarse / 2, coarse))
    for step, width in ((1e-3, 2.0 * coarse), (1e-4, 2e-3), (1e-5, 2e-4)):
        b1 = np.arange(center[0] - width, center[0] + width + step / 2, step)
        b2 = np.arange(center[1] - width, center[1] + width + step / 2, step)
        center, _ = evaluate(b1, b2)
    return center


def kendall_tau_b(a, b):
    """Brute-force tie-corrected Kendall tau over all pairs."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = len(a)
    concordant = discordant = ties_a = ties_b = 0
    for i in range(n):
        for j in range(i + 1, n):
            da, db = a[i] - a[j], b[i] - b[j]
            if da == 0 and db == 0:
                continue
            if da == 0:
                ties_a += 1
            elif db == 0:
                ties_b += 1
            elif da * db > 0:
                concordant += 1
            else:
                discordant += 1
    denom = np.sqrt((concordant + discordant + ties_a)
                    * (concordant + discordant + ties_b))
    if denom == 0:
        return float("nan")
    return (concordant - discordant) / denom


def finite_difference_gradient(fun, x, step=1e-6):
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for i in range(x.size):
        hi = x.copy()
        lo = x.copy()
        hi[i] += step
        lo[i] -= step
        grad[i] = (fun(hi) - fun(lo)) / (2.0 * step)
    return grad


def score_test_by_hand(X, y0, halves, coordinate):
    """Plain-Python evaluation of the two-half score statistic and variance.

    ``halves`` is a sequence of (row_indices, beta, c, w) with beta already
    holding the null value at the tested coordinate.  Returns (T, sigma2).
    """
    t_terms = []
    v_terms = []
    for rows, beta, c, w in halves:
        t_sum = 0.0
        v_sum = 0.0
        for i in rows:
            margin = y0[i] * (sum(X[i][q] * beta[q] for q in range(len(beta))) - c)
            e = np.exp(np.clip(margin, -700, 700))
            dphi = -1.0 / (1.0 + e)
            ddphi = e / (1.0 + e) ** 2
            pred = 0.0
            pos = 0
            for q in range(len(beta)):
                if q == coordinate:
                    continue
                pred += X[i][q] * w[pos]
                pos += 1
            pred += -1.0 * w[pos]
            resid = X[i][coordinate] - pred
            t_sum += y0[i] * dphi * resid
            v_sum += ddphi * resid * resid
        t_terms.append(t_sum / len(rows))
        v_terms.append(v_sum / len(rows))
    return 0.5 * sum(t_terms), 0.5 * sum(v_terms)
