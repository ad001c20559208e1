"""Small resampling helpers shared by the Monte Carlo modules."""

import numpy as np


def jackknife(samples, statistic=np.mean, axis=0):
    """Leave-one-out jackknife: (estimate, standard error).

    ``statistic`` must accept ``axis``.  For the plain mean the standard error
    equals the usual s / sqrt(n).
    """
    x = np.asarray(samples, dtype=float)
    n = x.shape[axis]
    est = statistic(x, axis=axis)
    if n < 2:
        return est, np.full_like(np.asarray(est, dtype=float), np.nan)
    total = np.sum(x, axis=axis, keepdims=True)
    if statistic is np.mean:
        loo = (total - x) / (n - 1)
    else:
        loo = np.stack([statistic(np.delete(x, i, axis=axis), axis=axis) for i in range(n)], axis=axis)
    mean_loo = np.mean(loo, axis=axis)
    var = (n - 1) / n * np.sum((loo - np.expand_dims(mean_loo, axis)) ** 2, axis=axis)
    return est, np.sqrt(var)


def loglog_fit(x, y):
    """Least-squares line through (log x, log y): (slope, intercept, r_squared)."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), float(r2)
