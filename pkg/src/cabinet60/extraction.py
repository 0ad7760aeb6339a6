"""Statistical parameter extraction from impulse responses.

Path detection and thresholding, RMS delay spread, log-distance path-loss
regression, per-measurement decay constants, Gaussian/Gamma/Weibull
maximum-likelihood fits and single/mixed Poisson arrival fits.

Unit conventions: times inside profiles are seconds; decay constants are
returned in seconds; arrival rates are reported per nanosecond.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import optimize, special

from . import _backend
from .dsp import ImpulseResponse

DEFAULT_THRESHOLD_DB = 30.0


class ConvergenceWarning(RuntimeWarning):
    pass


class NonDecayingProfileError(ValueError):
    """The fitted decay slope is not negative."""


@dataclass(frozen=True)
class MultipathProfile:
    """Discrete path list ``(t_n, p_n)`` with ``t_n`` in seconds, ``p_n`` linear power.

    ``threshold_db`` records the selection level below the strongest path;
    ``None`` marks an unthresholded list (e.g. a synthesized path set).
    """

    times: np.ndarray
    powers: np.ndarray
    threshold_db: float | None = None

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        p = np.array(self.powers, dtype=float)
        if t.shape != p.shape or t.ndim != 1:
            raise ValueError("times and powers must be 1-D arrays of equal length")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("path times must be strictly increasing")
        if np.any(p <= 0):
            raise ValueError("path powers must be positive")
        if self.threshold_db is not None and p.size:
            floor = p.max() * 10 ** (-self.threshold_db / 10)
            if np.any(p < floor * (1 - 1e-12)):
                raise ValueError("profile contains paths below its threshold")
        t.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "powers", p)

    def __len__(self):
        return self.times.size

    def scaled(self, factor: float) -> "MultipathProfile":
        return MultipathProfile(self.times, self.powers * factor, self.threshold_db)


@dataclass(frozen=True)
class PathLossFit:
    pl_d0: float
    alpha: float
    sigma: float
    d0: float
    residuals: np.ndarray = field(repr=False)
    alpha_stderr: float = math.nan

    def predict(self, distance):
        return self.pl_d0 + self.alpha * 10 * np.log10(np.asarray(distance) / self.d0)


@dataclass(frozen=True)
class DecayFit:
    gamma: float
    rmse: float
    intercept_db: float = 0.0


@dataclass(frozen=True)
class DistributionFit:
    """``params`` is ``(mu, sigma)``, ``(shape, scale)`` or ``(scale, shape)``
    for the gaussian, gamma and weibull families respectively."""

    family: str
    params: tuple[float, float]
    log_likelihood: float

    @property
    def mean(self) -> float:
        first, second = self.params
        if self.family == "gaussian":
            return first
        if self.family == "gamma":
            return first * second
        return first * math.gamma(1.0 + 1.0 / second)

    def as_dict(self) -> dict:
        names = {"gaussian": ("mu", "sigma"), "gamma": ("shape", "scale"),
                 "weibull": ("scale", "shape")}[self.family]
        return dict(zip(names, self.params))


@dataclass(frozen=True)
class ArrivalFit:
    single_lambda: float
    lambda1: float
    lambda2: float
    weight: float
    loglik_single: float
    loglik_mixture: float
    n_intervals: int
    converged: bool = True
    iterations: int = 0

    @property
    def mixed(self) -> tuple[float, float, float]:
        return self.lambda1, self.lambda2, self.weight

    @property
    def log_likelihoods(self) -> tuple[float, float]:
        return self.loglik_single, self.loglik_mixture


def _threshold_floor(peak: float, threshold_db: float) -> float:
    return peak * 10 ** (-threshold_db / 10)


def detect_paths(cir: ImpulseResponse, threshold_db: float = DEFAULT_THRESHOLD_DB) -> MultipathProfile:
    """Strict local maxima of sample power within ``threshold_db`` of the peak."""
    if not threshold_db > 0:
        raise ValueError("threshold_db must be positive")
    power = np.ascontiguousarray(cir.power(), dtype=float)
    peak = power.max()
    if peak == 0:
        raise ValueError("cannot detect paths in an all-zero impulse response")
    idx = _backend.strict_local_maxima(power, _threshold_floor(peak, threshold_db))
    return MultipathProfile(cir.t0 + idx * cir.sample_period, power[idx], threshold_db)


def captured_power_fraction(cir: ImpulseResponse, threshold_db: float = DEFAULT_THRESHOLD_DB) -> float:
    power = cir.power()
    total = power.sum()
    if total == 0:
        raise ValueError("cannot threshold an all-zero impulse response")
    if math.isinf(threshold_db):
        return 1.0
    kept = power[power >= _threshold_floor(power.max(), threshold_db)].sum()
    return float(kept / total)


def rms_delay_spread(profile: MultipathProfile) -> float:
    if len(profile) == 0:
        raise ValueError("RMS delay spread of an empty profile")
    p = profile.powers
    # centring on the first arrival keeps the moment difference well conditioned
    t = profile.times - profile.times[0]
    w = p / p.sum()
    m1 = w @ t
    m2 = w @ (t * t)
    return float(math.sqrt(max(m2 - m1 * m1, 0.0)))


def fit_path_loss(points: Iterable[tuple[float, float]], d0: float = 1.0) -> PathLossFit:
    """Least-squares log-distance fit of path loss (dB, ``P_t - P_r``) vs distance (m)."""
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise ValueError("need at least two (distance, loss_db) points")
    d, loss = pts[:, 0], pts[:, 1]
    if np.any(d <= 0) or d0 <= 0:
        raise ValueError("distances must be positive")
    x = 10 * np.log10(d / d0)
    xc = x - x.mean()
    sxx = xc @ xc
    if sxx <= 1e-15 * max(1.0, float(x @ x)):
        raise ValueError("degenerate design: all distances are equal")
    alpha = float(xc @ (loss - loss.mean()) / sxx)
    pl_d0 = float(loss.mean() - alpha * x.mean())
    resid = loss - (pl_d0 + alpha * x)
    n = d.size
    stderr = math.sqrt(resid @ resid / (n - 2) / sxx) if n > 2 else math.nan
    resid.setflags(write=False)
    return PathLossFit(pl_d0, alpha, float(np.std(resid)), d0, resid, stderr)


def fit_decay_constant(profile: MultipathProfile, anchored: bool = False) -> DecayFit:
    """Least-squares exponential-decay fit of ``ln(p_n / p_0)`` against delay.

    By default the intercept is free, i.e. the average first-path power is
    estimated together with the slope. ``anchored=True`` forces the line
    through the first path (intercept zero).
    """
    if len(profile) < 2:
        raise ValueError("decay fit needs at least two paths")
    t = profile.times - profile.times[0]
    y = np.log(profile.powers / profile.powers[0])
    if anchored:
        slope = float(t @ y / (t @ t))
        intercept = 0.0
    else:
        tc = t - t.mean()
        slope = float(tc @ (y - y.mean()) / (tc @ tc))
        intercept = float(y.mean() - slope * t.mean())
    if not slope < 0:
        raise NonDecayingProfileError(f"fitted slope {slope:g} per second is not decaying")
    resid_db = 10 / math.log(10) * (y - (intercept + slope * t))
    return DecayFit(-1.0 / slope, float(math.sqrt(np.mean(resid_db ** 2))),
                    10 / math.log(10) * intercept)


# --- distribution fits -------------------------------------------------------

def _bracket_root(f, lo, hi, grow=10.0, limit=60):
    flo, fhi = f(lo), f(hi)
    for _ in range(limit):
        if flo < 0 < fhi:
            return lo, hi
        if flo >= 0:
            lo /= grow
            flo = f(lo)
        if fhi <= 0:
            hi *= grow
            fhi = f(hi)
    raise RuntimeError("could not bracket the shape estimate")


def _fit_gamma(x):
    n = x.size
    mean = x.mean()
    s = math.log(mean) - np.mean(np.log(x))
    if s <= 0:
        raise ValueError("zero variance")
    # profile score in the shape after concentrating out the scale
    score = lambda a: math.log(a) - special.digamma(a) - s  # noqa: E731
    lo, hi = _bracket_root(lambda a: -score(a), 0.5 / s * 0.5, 0.5 / s * 2.0 + 1.0)
    shape = optimize.brentq(lambda a: -score(a), lo, hi, xtol=1e-12, rtol=1e-14, maxiter=500)
    scale = mean / shape
    ll = float(np.sum((shape - 1) * np.log(x) - x / scale) - n * (shape * math.log(scale) + special.gammaln(shape)))
    return (shape, scale), ll


def _fit_weibull(x):
    n = x.size
    lx = np.log(x)
    z = np.log(x / x.max())
    mean_lx = lx.mean()

    def score(k):
        w = np.exp(k * z)
        return (w @ lx) / w.sum() - 1.0 / k - mean_lx

    lo, hi = _bracket_root(score, 0.1, 10.0)
    k = optimize.brentq(score, lo, hi, xtol=1e-12, rtol=1e-14, maxiter=500)
    zeta = float(x.max() * np.mean(np.exp(k * z)) ** (1.0 / k))
    ll = float(n * math.log(k / zeta) + (k - 1) * np.sum(lx - math.log(zeta)) - np.sum((x / zeta) ** k))
    return (zeta, k), ll


def fit_distribution(samples: Sequence[float], family: str) -> DistributionFit:
    """Maximum-likelihood fit of a gaussian, gamma or weibull distribution."""
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("need at least two samples")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite")
    if np.ptp(x) == 0:
        raise ValueError("zero variance")
    if family == "gaussian":
        mu, sigma = float(x.mean()), float(x.std())
        ll = float(-0.5 * x.size * (math.log(2 * math.pi * sigma ** 2) + 1))
        return DistributionFit(family, (mu, sigma), ll)
    if family not in ("gamma", "weibull"):
        raise ValueError(f"unknown family {family!r}")
    if np.any(x <= 0):
        raise ValueError(f"{family} fit needs positive samples")
    params, ll = _fit_gamma(x) if family == "gamma" else _fit_weibull(x)
    return DistributionFit(family, (float(params[0]), float(params[1])), ll)


# --- arrival process ---------------------------------------------------------

def _intervals_ns(profiles) -> np.ndarray:
    if isinstance(profiles, MultipathProfile):
        profiles = [profiles]
    parts = [np.diff(p.times) * 1e9 for p in profiles]
    return np.concatenate(parts) if parts else np.empty(0)


def mixture_loglik(x, lam1: float, lam2: float, weight: float) -> float:
    """Log-likelihood of intervals ``x`` (ns) under the exponential mixture."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        terms = np.stack([np.log(weight) + np.log(lam1) - lam1 * x,
                          np.log1p(-weight) + np.log(lam2) - lam2 * x])
    return float(np.sum(special.logsumexp(terms, axis=0)))


def _run_em(x, w, l1, l2, max_iter, tol):
    ll_prev = -math.inf
    n = x.size
    for it in range(1, max_iter + 1):
        nw, n1, n2, ll = _backend.em_exp_mixture_step(x, w, l1, l2)
        if ll - ll_prev < tol * n:
            # ll belongs to the current (w, l1, l2); the update is discarded
            return w, l1, l2, ll, True, it
        ll_prev = ll
        w, l1, l2 = nw, n1, n2
    ll = mixture_loglik(x, l1, l2, w)
    return w, l1, l2, ll, False, max_iter


def fit_interarrivals(x_ns, n_restarts: int = 8, max_iter: int = 500,
                      tol: float = 1e-9, seed: int = 0) -> ArrivalFit:
    """Single-Poisson and two-component mixture fits of inter-arrival times (ns).

    The mixture is fitted by EM from a median split of the log intervals
    plus ``n_restarts`` random starts; the best likelihood wins. ``tol`` is
    the per-interval log-likelihood improvement that ends a run.
    """
    x = np.ascontiguousarray(x_ns, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two inter-arrival times")
    if np.any(x <= 0):
        raise ValueError("inter-arrival times must be positive")
    n = x.size
    lam = 1.0 / x.mean()
    ll_single = n * math.log(lam) - lam * x.sum()

    med = np.median(np.log(x))
    short, long_ = x[np.log(x) <= med], x[np.log(x) > med]
    if long_.size == 0:
        starts = [(0.5, lam, lam)]
    else:
        starts = [(long_.size / n, 1.0 / long_.mean(), 1.0 / short.mean())]
    rng = np.random.default_rng(seed)
    for _ in range(n_restarts):
        starts.append((rng.uniform(0.001, 0.5),
                       lam * 10 ** rng.uniform(-1.5, 0.0),
                       lam * 10 ** rng.uniform(0.0, 0.5)))

    # the degenerate mixture is the single-Poisson solution: nested-model floor
    best = (0.0, lam, lam, ll_single, True, 0)
    any_converged = False
    for w0, l10, l20 in starts:
        res = _run_em(x, w0, l10, l20, max_iter, tol)
        any_converged |= res[4]
        if res[3] > best[3]:
            best = res
    w, l1, l2, ll, converged, iters = best
    if iters == 0:
        # the floor won; trust it only if some EM run actually settled
        converged = any_converged
    if l1 > l2:
        l1, l2, w = l2, l1, 1.0 - w
    if not converged:
        warnings.warn(f"EM hit the {max_iter}-iteration cap; returning the best iterate",
                      ConvergenceWarning, stacklevel=2)
    return ArrivalFit(float(lam), float(l1), float(l2), float(min(max(w, 0.0), 1.0)),
                      float(ll_single), float(ll), n, converged, iters)


def fit_arrivals(profiles, **kwargs) -> ArrivalFit:
    """Arrival-process fit of one profile, or of the pooled intervals of many."""
    x = _intervals_ns(profiles)
    if x.size < 2:
        raise ValueError("arrival fit needs at least three paths (two intervals)")
    return fit_interarrivals(x, **kwargs)


def rds_threshold_sweep(cirs: Sequence[ImpulseResponse], thresholds: Sequence[float]):
    """Mean path count and mean RDS over an ensemble for each threshold.

    Returns a list of ``(threshold_db, mean_path_count, mean_rds_seconds)``.
    """
    cirs = list(cirs)
    if not cirs or len(thresholds) == 0:
        raise ValueError("need at least one CIR and one threshold")
    rows = []
    for thr in thresholds:
        counts, spreads = [], []
        for cir in cirs:
            prof = detect_paths(cir, thr)
            counts.append(len(prof))
            spreads.append(rms_delay_spread(prof))
        rows.append((float(thr), float(np.mean(counts)), float(np.mean(spreads))))
    return rows


# --- measurement grids -------------------------------------------------------

# receive-antenna coordinate grids (cm) and transmitter position per scenario
_GRIDS = {
    "sc1": (np.linspace(15, 85, 8), np.linspace(5, 30, 6), (15.0, 30.0), (65.0, 15.0, 0.0)),
    "sc2": (np.linspace(15, 85, 8), np.linspace(5, 30, 6), (35.0, 140.0), (65.0, 15.0, 0.0)),
    "sc3": (np.linspace(15, 40, 6), np.linspace(5, 30, 6), (35.0, 140.0), (15.0, 15.0, 0.0)),
}


def measurement_distances(scenario: str) -> np.ndarray:
    """3-D Tx-Rx distances (m) of the receiver grid used for ``scenario``."""
    try:
        xs, ys, zs, tx = _GRIDS[scenario]
    except KeyError:
        raise ValueError(f"unknown scenario {scenario!r}; expected one of {sorted(_GRIDS)}") from None
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    d = np.sqrt((X - tx[0]) ** 2 + (Y - tx[1]) ** 2 + (Z - tx[2]) ** 2) / 100.0
    return d.ravel()
