"""Ordinary Kriging with a fitted spherical variogram."""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve
from scipy.optimize import least_squares
from scipy.spatial.distance import cdist, pdist

EPS_SILL = 1e-12
DEFAULT_BINS = 15


@dataclass(frozen=True)
class Variogram:
    """Spherical model: ``c0 + c (1.5 h/a - 0.5 (h/a)^3)`` for ``0 < h <= a``, ``c0 + c`` beyond, 0 at 0."""

    nugget: float
    psill: float
    range: float

    def __post_init__(self):
        if self.nugget < 0 or self.psill <= 0 or self.range <= 0:
            raise ValueError("variogram needs nugget >= 0, psill > 0, range > 0")

    @property
    def sill(self) -> float:
        return self.nugget + self.psill

    def __call__(self, h):
        return spherical(np.asarray(h, dtype=float), self.nugget, self.psill, self.range)


def spherical(h, nugget, psill, rng):
    r = np.minimum(h / rng, 1.0)
    g = nugget + psill * (1.5 * r - 0.5 * r**3)
    return np.where(h > 0, g, 0.0)


@dataclass(frozen=True)
class VariogramBins:
    lags: np.ndarray
    semivariance: np.ndarray
    counts: np.ndarray
    max_lag: float
    y_var: float

    def __len__(self):
        return len(self.lags)

    def rows(self):
        return list(zip(self.lags.tolist(), self.semivariance.tolist(), self.counts.tolist()))


def empirical_variogram(H, y, n_bins: int = DEFAULT_BINS) -> VariogramBins:
    """Binned semivariances over ``(0, max_lag]``, ``max_lag`` = half the largest pair distance."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    y = np.asarray(y, dtype=float)
    if len(y) < 3:
        raise ValueError("empirical variogram needs at least 3 samples")
    dist = pdist(H)
    if dist.max() <= 0:
        raise ValueError("all sample points coincide")
    i, j = np.triu_indices(len(y), k=1)
    sq = 0.5 * (y[i] - y[j]) ** 2
    max_lag = 0.5 * float(dist.max())
    edges = np.linspace(0.0, max_lag, n_bins + 1)
    inside = (dist > 0) & (dist <= max_lag)
    which = np.clip(np.searchsorted(edges, dist[inside], side="left") - 1, 0, n_bins - 1)
    counts = np.bincount(which, minlength=n_bins)
    sums = np.bincount(which, weights=sq[inside], minlength=n_bins)
    keep = counts > 0
    mids = 0.5 * (edges[:-1] + edges[1:])
    return VariogramBins(mids[keep], sums[keep] / counts[keep], counts[keep], max_lag,
                         float(np.var(y, ddof=1)))


def fit_spherical(bins: VariogramBins) -> Variogram:
    """Pair-count weighted least squares, multi-started from a 5x5x5 grid inside the bounds."""
    if len(bins) < 3:
        raise ValueError("spherical fit needs at least 3 non-empty bins")
    sbar = bins.y_var
    a_hi = 2.0 * bins.max_lag
    if sbar <= 0 or np.all(bins.semivariance == 0):
        return Variogram(0.0, EPS_SILL, a_hi)

    lags, gam = bins.lags, bins.semivariance
    sw = np.sqrt(bins.counts / bins.counts.sum())
    scale = sbar

    def resid(theta):
        return sw * (spherical(lags, theta[0], theta[1], theta[2]) - gam) / scale

    def jac(theta):
        _, c, a = theta
        r = np.minimum(lags / a, 1.0)
        inside = lags < a
        d_a = np.where(inside, c * (-1.5 * lags / a**2 + 1.5 * lags**3 / a**4), 0.0)
        J = np.stack([np.ones_like(lags), 1.5 * r - 0.5 * r**3, d_a], axis=1)
        return (sw / scale)[:, None] * J

    lb = np.array([0.0, EPS_SILL * sbar, 1e-9 * a_hi])
    ub = np.array([sbar, 2.0 * sbar, a_hi])
    frac = (np.arange(5) + 0.5) / 5.0
    best = None
    for f0, f1, f2 in itertools.product(frac, frac, frac):
        x0 = lb + np.array([f0, f1, f2]) * (ub - lb)
        sol = least_squares(resid, x0, jac=jac, bounds=(lb, ub), method="trf",
                            x_scale=ub - lb, xtol=1e-12, ftol=1e-14, gtol=1e-14, max_nfev=500)
        if best is None or sol.cost < best.cost - 1e-18:
            best = sol
    c0, c, a = best.x
    return Variogram(float(max(c0, 0.0)), float(max(c, lb[1])), float(a))


@dataclass(frozen=True)
class KrigingModel:
    H: np.ndarray            # ns x nd, standardised
    y: np.ndarray
    variogram: Variogram
    center: np.ndarray
    scale: np.ndarray
    lu: tuple = field(repr=False)
    dual: np.ndarray = field(repr=False)   # A^{-1} [y; 0]
    jitter: float = 0.0
    bins: VariogramBins | None = field(default=None, repr=False)
    n_merged: int = 0

    @property
    def ns(self) -> int:
        return self.H.shape[0]

    def standardize(self, h) -> np.ndarray:
        return (np.asarray(h, dtype=float) - self.center) / self.scale


def _dedupe(H, y):
    uniq, inv = np.unique(H, axis=0, return_inverse=True)
    inv = np.asarray(inv).reshape(-1)
    if len(uniq) == len(H):
        return H, y, 0
    counts = np.bincount(inv)
    ybar = np.bincount(inv, weights=y) / counts
    # preserve first-occurrence order so results do not depend on np.unique's sort
    first = np.full(len(uniq), len(H))
    np.minimum.at(first, inv, np.arange(len(H)))
    order = np.argsort(first)
    return uniq[order], ybar[order], len(H) - len(uniq)


def _ok_matrix(H, variogram):
    n = len(H)
    A = np.zeros((n + 1, n + 1))
    A[:n, :n] = variogram(cdist(H, H))
    A[:n, n] = 1.0
    A[n, :n] = 1.0
    return A


def _factor(A):
    with warnings.catch_warnings():
        warnings.simplefilter("error", LinAlgWarning)
        try:
            lu = lu_factor(A)
        except (LinAlgWarning, ValueError, np.linalg.LinAlgError):
            return None
    if not np.all(np.isfinite(lu[0])) or np.min(np.abs(np.diag(lu[0]))) == 0:
        return None
    return lu


def fit_ok(H, y, variogram: Variogram | None = None, center=None, scale=None,
           n_bins: int = DEFAULT_BINS) -> KrigingModel:
    """Fit an Ordinary Kriging interpolator.

    ``H`` holds physical inputs (rows); distances use ``(H - center) / scale``.
    Duplicate rows are merged with averaged targets. The variogram is fitted
    from the data unless given.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    y = np.asarray(y, dtype=float)
    nd = H.shape[1]
    center = np.zeros(nd) if center is None else np.asarray(center, dtype=float)
    scale = np.ones(nd) if scale is None else np.asarray(scale, dtype=float)
    Hs = (H - center) / scale
    Hs, y, merged = _dedupe(Hs, y)
    if merged:
        warnings.warn(f"merged {merged} duplicate training inputs (targets averaged)")
    if len(y) < 3:
        raise ValueError("Ordinary Kriging needs at least 3 distinct samples")

    bins = None
    if variogram is None:
        bins = empirical_variogram(Hs, y, n_bins)
        variogram = fit_spherical(bins)

    A = _ok_matrix(Hs, variogram)
    jitter = 0.0
    lu = _factor(A)
    if lu is None:
        # diag(Gamma) is identically 0 (gamma(0) = 0), so scale the jitter by the sill
        jitter = 1e-10 * variogram.sill
        A[np.arange(len(y)), np.arange(len(y))] += jitter
        lu = _factor(A)
        if lu is None:
            raise np.linalg.LinAlgError("Ordinary Kriging system is singular even after jitter")
    dual = lu_solve(lu, np.append(y, 0.0))
    return KrigingModel(Hs, y, variogram, center, scale, lu, dual, jitter, bins, merged)


def ok_weights(model: KrigingModel, h):
    """Kriging weights (n x ns) and Lagrange multipliers (n) for physical queries ``h``."""
    Q = np.atleast_2d(model.standardize(h))
    rhs = np.vstack([model.variogram(cdist(model.H, Q)), np.ones((1, len(Q)))])
    sol = lu_solve(model.lu, rhs)
    return sol[:-1].T, sol[-1], rhs[:-1].T


def predict(model: KrigingModel, h, return_variance: bool = True, chunk: int = 8192):
    """Kriging mean (and variance, floored at 0) at physical inputs ``h`` (one vector or rows)."""
    h = np.asarray(h, dtype=float)
    single = h.ndim == 1
    Q = np.atleast_2d(h)
    mean = np.empty(len(Q))
    var = np.empty(len(Q)) if return_variance else None
    for lo in range(0, len(Q), chunk):
        q = Q[lo:lo + chunk]
        if return_variance:
            w, mu, g = ok_weights(model, q)
            mean[lo:lo + chunk] = w @ model.y
            var[lo:lo + chunk] = np.maximum(np.sum(w * g, axis=1) + mu, 0.0)
        else:
            g = model.variogram(cdist(model.standardize(q), model.H))
            mean[lo:lo + chunk] = g @ model.dual[:-1] + model.dual[-1]
    if single:
        return (float(mean[0]), float(var[0])) if return_variance else float(mean[0])
    return (mean, var) if return_variance else mean


@dataclass(frozen=True)
class SurrogateBank:
    models: tuple[KrigingModel, ...]

    @property
    def k(self) -> int:
        return len(self.models)


def fit_bank(H, Z, center=None, scale=None, n_bins: int = DEFAULT_BINS) -> SurrogateBank:
    """One OK model per row of the ``k x ns`` score matrix ``Z``."""
    Z = np.atleast_2d(Z)
    return SurrogateBank(tuple(fit_ok(H, z, center=center, scale=scale, n_bins=n_bins) for z in Z))


def predict_bank(bank: SurrogateBank, H_query) -> np.ndarray:
    """Predicted scores, ``k x n``, for physical query rows."""
    Hq = np.atleast_2d(np.asarray(H_query, dtype=float))
    if Hq.shape[0] == 0:
        return np.empty((bank.k, 0))
    return np.vstack([predict(m, Hq, return_variance=False) for m in bank.models])
