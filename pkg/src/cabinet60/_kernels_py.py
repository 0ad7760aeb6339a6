"""Numpy implementations of the compiled kernels (fallback backend)."""
import numpy as np


def em_exp_mixture_step(x, weight, lam1, lam2):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        la1 = np.log(weight) + np.log(lam1)
        la2 = np.log1p(-weight) + np.log(lam2)
    a1 = la1 - lam1 * x
    a2 = la2 - lam2 * x
    d = a1 - a2
    e = np.exp(-np.abs(d))
    pos = d > 0
    ll = float(np.sum(np.where(pos, a1, a2) + np.log1p(e)))
    r1 = np.where(pos, 1.0 / (1.0 + e), e / (1.0 + e))
    r2 = 1.0 - r1

    s1, s2 = r1.sum(), r2.sum()
    s1x, s2x = r1 @ x, r2 @ x
    n1 = s1 / s1x if (s1x > 0 and s1 > 1e-300) else lam1
    n2 = s2 / s2x if (s2x > 0 and s2 > 1e-300) else lam2
    return float(s1 / x.size), float(n1), float(n2), ll


def strict_local_maxima(power, floor):
    p = np.asarray(power, dtype=float)
    padded = np.concatenate(([-np.inf], p, [-np.inf]))
    mask = (p > padded[:-2]) & (p > padded[2:]) & (p >= floor)
    return np.flatnonzero(mask).astype(np.int64)


def accumulate_bins(index, values, n):
    index = np.asarray(index, dtype=np.int64)
    values = np.asarray(values, dtype=complex)
    keep = (index >= 0) & (index < n)
    out = np.zeros(n, dtype=complex)
    np.add.at(out, index[keep], values[keep])
    return out
