import numpy as np

N_BATCHES = 50


def batch_means_se(x, n_batches=N_BATCHES):
    """Standard error of ``mean(x)`` from non-overlapping batch means (columns treated separately)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    nb = min(n_batches, n)
    if nb < 2:
        return np.full(x.shape[1], np.nan)
    size = n // nb
    means = x[: nb * size].reshape(nb, size, -1).mean(axis=1)
    with np.errstate(invalid="ignore"):
        return means.std(axis=0, ddof=1) / np.sqrt(nb)


def ols(x, y):
    """Least-squares slope, intercept and r^2 of ``y`` against ``x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xm = x - x.mean()
    ym = y - y.mean()
    sxx = xm @ xm
    slope = (xm @ ym) / sxx
    intercept = y.mean() - slope * x.mean()
    syy = ym @ ym
    r2 = 1.0 if syy == 0 else (xm @ ym) ** 2 / (sxx * syy)
    return float(slope), float(intercept), float(r2)
