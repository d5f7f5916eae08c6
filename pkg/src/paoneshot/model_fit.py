"""Parametric fits to estimated attachment functions, and asymptotic degree laws."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .estimators import AttachmentEstimate
from .net_core import DegreeHistogram, NumericError


@dataclass
class FitResult:
    form: str
    parameter: float
    two_sigma: float
    residual: float
    points: int
    intercept: float = float("nan")
    weighted: bool = False

    def __post_init__(self):
        if self.points < 2:
            raise NumericError(f"a fit needs at least 2 points, got {self.points}")

    def to_dict(self) -> dict:
        return {k: (None if isinstance(v, float) and not np.isfinite(v) else v)
                for k, v in asdict(self).items()}

    def report(self) -> str:
        symbol = {"PowerLaw": "alpha", "LogDamped": "beta", "Gamma": "gamma"}[self.form]
        return f"{symbol} = {self.parameter:.2f} ± {self.two_sigma:.2f}"


def _wls(x, y, w):
    """Weighted straight-line fit; returns coefficients, covariance, residual norm."""
    X = np.column_stack([np.ones_like(x), x])
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    r = (y - X @ coef) * sw
    rss = float(r @ r)
    n = len(x)
    if n > 2:
        cov = rss / (n - 2) * np.linalg.inv(X.T @ (X * w[:, None]))
    else:
        cov = np.full((2, 2), np.inf)
    return coef, cov, np.sqrt(rss)


def _fit_weights(est: AttachmentEstimate, mask, weighted: bool):
    n = int(mask.sum())
    if not weighted or est.sd is None:
        return np.ones(n), False
    sd = est.sd[mask]
    good = np.isfinite(sd) & (sd > 0)
    if not np.any(good):
        return np.ones(n), False
    w = np.empty(n)
    w[good] = 1.0 / sd[good] ** 2
    # zero or missing spread carries no information on precision
    w[~good] = np.median(w[good])
    return w, True


def _usable(est: AttachmentEstimate):
    x = est.centers()
    ok = (est.k >= 1) & np.isfinite(est.A_hat) & (est.A_hat > 0)
    ok &= np.array(["no_edges" not in f for f in est.flags], dtype=bool)
    return x, ok


def fit_alpha(est: AttachmentEstimate, weighted: bool = True) -> FitResult:
    """Fit ``A_k = C * k**alpha`` by (weighted) least squares in log-log space.

    Weights are ``1 / sd_k**2`` when the estimate carries spreads, else 1.
    ``two_sigma`` is twice the standard error of the slope.
    """
    x, ok = _usable(est)
    n = int(ok.sum())
    if n < 2:
        raise NumericError(f"need at least 2 usable points with k >= 1, got {n}")
    w, used_w = _fit_weights(est, ok, weighted)
    coef, cov, res = _wls(np.log(x[ok]), np.log(est.A_hat[ok]), w)
    return FitResult("PowerLaw", float(coef[1]), float(2 * np.sqrt(cov[1, 1])), float(res),
                     n, float(coef[0]), used_w)


def fit_beta(est: AttachmentEstimate, weighted: bool = False) -> FitResult:
    """Fit ``A_k = C * k / (1 + beta * log k)``.

    Uses the linearization ``k / A_k = a + b log k`` with a free intercept and
    reports ``beta = b / a``, which is invariant to the scale of ``A_hat``.
    The interval comes from the delta method.
    """
    x, ok = _usable(est)
    n = int(ok.sum())
    if n < 2:
        raise NumericError(f"need at least 2 usable points with k >= 1, got {n}")
    y = x[ok] / est.A_hat[ok]
    if weighted and est.sd is not None:
        w, used_w = _fit_weights(est, ok, True)
        # sd is on log A; propagate to k / A
        w = w / y ** 2
    else:
        w, used_w = np.ones(n), False
    coef, cov, res = _wls(np.log(x[ok]), y, w)
    a, b = coef
    if a == 0:
        raise NumericError("degenerate intercept in beta fit")
    beta = b / a
    g = np.array([-b / a ** 2, 1.0 / a])
    var = float(g @ cov @ g) if np.all(np.isfinite(cov)) else np.inf
    return FitResult("LogDamped", float(beta), float(2 * np.sqrt(max(var, 0.0))), float(res),
                     n, float(a), used_w)


def fit_gamma(h: DegreeHistogram, k_min: int) -> FitResult:
    """Power-law degree exponent by the continuous approximation to the discrete MLE.

    ``gamma = 1 + n / sum_i log(k_i / (k_min - 1/2))`` over nodes with
    ``k_i >= k_min``.
    """
    if k_min < 1:
        raise NumericError("k_min must be at least 1")
    ks, nk = h.arrays()
    sel = ks >= k_min
    n = int(nk[sel].sum())
    if n < 10:
        raise NumericError(f"need at least 10 nodes with degree >= {k_min}, got {n}")
    if np.all(ks[sel] == k_min):
        raise NumericError("every tail degree equals k_min; exponent is not identified")
    s = float(np.dot(nk[sel], np.log(ks[sel] / (k_min - 0.5))))
    gamma = 1.0 + n / s
    return FitResult("Gamma", gamma, 2.0 * (gamma - 1.0) / np.sqrt(n), 0.0, n)


# --- asymptotic degree distribution --------------------------------------------------

@dataclass
class AsymptoticDistribution:
    c: float
    p: float
    lam: float
    values: np.ndarray = field(repr=False)

    @property
    def k_max(self) -> int:
        return len(self.values) - 1


def asymptotic_pi(c: float, p: float, k_max: int) -> AsymptoticDistribution:
    """Limit of ``n_k(t) / (p t)`` for ``A_k = k + c`` under constant ``p``.

    ``pi_k = lam / (lam + k + c) * prod_{j<k} (j + c) / (lam + j + c)`` with
    ``lam = 1 + c p / (1 - p)``; the product is accumulated in log space.
    """
    if not c > 0:
        raise ValueError("c must be positive")
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    lam = 1.0 + c * p / (1.0 - p)
    k = np.arange(k_max + 1, dtype=np.float64)
    step = np.log(k + c) - np.log(lam + k + c)
    logprod = np.concatenate([[0.0], np.cumsum(step[:-1])])
    values = np.exp(np.log(lam) - np.log(lam + k + c) + logprod)
    return AsymptoticDistribution(c, p, lam, values)


def asymptotic_mu(A, p: float, k_max: int, lam: Optional[float] = None):
    """Limit of ``n_k(t) / (p t)`` for a general attachment function.

    Solves ``mu_k = (A_{k-1} mu_{k-1} - A_k mu_k) / lam + [k == 0]``.  Unless
    given, ``lam`` is fixed by ``lam (1 - p) / p = sum_k A_k mu_k`` on the
    truncated support ``0..k_max``.  Returns ``(lam, mu)``.
    """
    A = np.asarray(A.values(k_max + 1) if hasattr(A, "values") else A, dtype=np.float64)
    A = A[:k_max + 1]

    def mu_of(lv):
        logmu = np.empty(len(A))
        logmu[0] = np.log(lv) - np.log(lv + A[0])
        logmu[1:] = logmu[0] + np.cumsum(np.log(A[:-1]) - np.log(lv + A[1:]))
        return np.exp(logmu)

    if lam is None:
        target = (1.0 - p) / p

        def gap(lv):
            return float(np.dot(A, mu_of(lv))) - lv * target

        hi = 1.0
        while gap(hi) > 0:
            hi *= 2.0
        lam = brentq(gap, 1e-9, hi, xtol=1e-14, rtol=1e-14)
    return lam, mu_of(lam)
