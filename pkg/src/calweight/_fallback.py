"""Pure-Python (numpy) versions of the compiled kernels.

Both backends compute, per SRSWOR sample, the mean-scale estimators

    lr = ybar + b_ols (Xbar - xbar)      b_ols: q*-weighted slope with intercept
    ds = ybar + b_ds  (Xbar - xbar)      b_ds = sum q x y / sum q x^2

A sample is degenerate when the q*-weighted spread of x is below 1e-12 of
``sum q* x^2`` (or ``sum q x^2`` is 0). Degenerate samples are skipped
unless ``fallback`` is set, in which case both estimators become ``ybar``.
"""

from __future__ import annotations

from itertools import islice

import numpy as np

from .design import iter_combinations, rank_combination

BACKEND = "python"

_CHUNK = 1 << 15


def _estimates(y, x, q, qs, xbar_pop):
    # rows are samples
    ym = y.mean(axis=1)
    xm = x.mean(axis=1)
    g0 = qs.sum(axis=1)
    xg = (qs * x).sum(axis=1) / g0
    yg = (qs * y).sum(axis=1) / g0
    cx = x - xg[:, None]
    dxx = (qs * cx * cx).sum(axis=1)
    dxy = (qs * cx * (y - yg[:, None])).sum(axis=1)
    gscale = (qs * x * x).sum(axis=1)
    qxx = (q * x * x).sum(axis=1)
    qxy = (q * x * y).sum(axis=1)
    bad = ~(gscale > 0.0) | (dxx < 1e-12 * gscale) | ~(qxx > 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        lr = np.where(bad, ym, ym + (dxy / dxx) * (xbar_pop - xm))
        ds = np.where(bad, ym, ym + (qxy / qxx) * (xbar_pop - xm))
    return lr, ds, bad


def enum_sq_errors(y, x, q, qs, first, count, xbar_pop, ybar_pop, fallback):
    """Sum squared errors of both estimators over ``count`` lexicographic samples
    starting at the combination ``first``.

    Returns ``(sum_lr, sum_ds, visited, skipped)``.
    """
    N = len(y)
    n = len(first)
    start = rank_combination(N, first)
    combos = iter_combinations(N, n, start, start + count)
    sum_lr = sum_ds = 0.0
    visited = skipped = 0
    while True:
        chunk = list(islice(combos, _CHUNK))
        if not chunk:
            break
        idx = np.array(chunk, dtype=np.int64)
        lr, ds, bad = _estimates(y[idx], x[idx], q[idx], qs[idx], xbar_pop)
        visited += idx.shape[0]
        keep = np.ones_like(bad) if fallback else ~bad
        skipped += int(np.sum(~keep))
        sum_lr += float(np.sum((lr[keep] - ybar_pop) ** 2))
        sum_ds += float(np.sum((ds[keep] - ybar_pop) ** 2))
    return sum_lr, sum_ds, visited, skipped


def mc_sq_errors(ys, xs, rho, sy2, sx2, mu_y, mu_x, fallback):
    """Per-replicate squared errors of both estimators for normal draws ``ys``, ``xs``.

    Returns ``(sq_lr, sq_ds, degenerate)``; skipped replicates carry 0.0.
    """
    a = np.sqrt(sy2 * (1.0 - rho * rho))
    b = rho * np.sqrt(sy2)
    y = mu_y + a * ys + b * xs
    x = mu_x + np.sqrt(sx2) * xs
    ones = np.ones_like(x)
    lr, ds, bad = _estimates(y, x, ones, ones, mu_x)
    sq_lr = (lr - mu_y) ** 2
    sq_ds = (ds - mu_y) ** 2
    if not fallback:
        sq_lr[bad] = 0.0
        sq_ds[bad] = 0.0
    return sq_lr, sq_ds, bad
