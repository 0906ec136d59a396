"""Gamma approximation test.

The null distribution of ``n * dHSIC`` is approximated by a Gamma law whose
shape and scale match plug-in estimates of the null mean and variance of
the estimator. The approximation carries no finite-sample level guarantee
and is known to be anti-conservative for many variables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import Dataset
from .errors import DegenerateMoments, DegenerateSample, InputError, NonConvergence, SampleTooSmall
from .estimator import dhsic_statistic
from .kernels import GramStack, KernelSpec, gram_stack
from .resampling import TestOutcome

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


# ---------------------------------------------------------------------------
# Regularized incomplete gamma function
# ---------------------------------------------------------------------------


def _lower_series(a: float, x: float) -> float:
    # P(a, x) = x^a e^{-x} / Gamma(a+1) * sum_k x^k / ((a+1)...(a+k))
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise NonConvergence(f"incomplete gamma series did not converge (a={a}, x={x})")


def _upper_fraction(a: float, x: float) -> float:
    # Q(a, x) via the Legendre continued fraction, modified Lentz algorithm.
    b = x + 1.0 - a
    c = 1.0 / _TINY
    dd = 1.0 / b
    h = dd
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        dd = an * dd + b
        if abs(dd) < _TINY:
            dd = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        dd = 1.0 / dd
        delta = dd * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise NonConvergence(f"incomplete gamma continued fraction did not converge (a={a}, x={x})")


_LARGE_SHAPE = 1000.0
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS


def _log_stirling_gap(z: float) -> float:
    """``z (ln z - 1) - lgamma(z + 1)`` without cancellation (z >= 1000)."""
    z2 = z * z
    corr = (1.0 / 12.0 - (1.0 / 360.0 - 1.0 / (1260.0 * z2)) / z2) / z
    return -0.5 * math.log(2.0 * math.pi * z) - corr


def _large_shape(a: float, x: float) -> tuple:
    """``(P, Q)`` for large ``a`` by Gauss-Legendre quadrature of the density.

    The integral runs from ``x`` towards whichever tail is nearer, cut off
    about ten standard deviations from the mode where the integrand is
    negligible. The integrand is scaled by its value at the mode.
    """
    a1 = a - 1.0
    sd = math.sqrt(a1)
    if x > a1:
        xu = max(a1 + 11.5 * sd, x + 6.0 * sd)
    else:
        xu = max(0.0, min(a1 - 7.5 * sd, x - 5.0 * sd))
    u = ((x - a1) + (xu - x) * _GL_NODES) / a1
    vals = np.exp(a1 * (np.log1p(u) - u))
    part = float(np.dot(_GL_WEIGHTS, vals)) * (xu - x) * math.exp(_log_stirling_gap(a1))
    if x > a1:
        return 1.0 - part, part
    return -part, 1.0 + part


def gammainc_lower(a: float, x: float) -> float:
    """Regularized lower incomplete gamma function ``P(a, x)``.

    Power series below ``x = a + 1``, continued fraction above it, and
    quadrature for shapes of 1000 or more.
    """
    if a <= 0:
        raise InputError("shape must be positive")
    if x <= 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if a >= _LARGE_SHAPE:
        return min(1.0, max(0.0, _large_shape(a, x)[0]))
    if x < a + 1.0:
        return min(1.0, _lower_series(a, x))
    return max(0.0, 1.0 - _upper_fraction(a, x))


def gammainc_upper(a: float, x: float) -> float:
    """Regularized upper incomplete gamma function ``Q(a, x) = 1 - P(a, x)``."""
    if a <= 0:
        raise InputError("shape must be positive")
    if x <= 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if a >= _LARGE_SHAPE:
        return min(1.0, max(0.0, _large_shape(a, x)[1]))
    if x < a + 1.0:
        return max(0.0, 1.0 - _lower_series(a, x))
    return min(1.0, _upper_fraction(a, x))


def gamma_cdf(t: float, shape: float, scale: float) -> float:
    return gammainc_lower(shape, t / scale)


def gamma_sf(t: float, shape: float, scale: float) -> float:
    return gammainc_upper(shape, t / scale)


def gamma_quantile(shape: float, scale: float, q: float, tol: float = 1e-10) -> float:
    """Quantile of ``Gamma(shape, scale)`` at probability ``q``.

    Brackets the root of ``P(shape, x) - q`` and refines it with Newton steps,
    falling back to bisection whenever a step leaves the bracket. Stops when
    the step is below ``tol`` in absolute terms and near machine precision
    relative to ``x``.

    Raises
    ------
    NonConvergence
        If the iteration cap is reached first.
    """
    if not (shape > 0 and scale > 0):
        raise InputError("shape and scale must be positive")
    if not 0.0 < q < 1.0:
        raise InputError("q must lie in (0, 1)")

    def f(x):
        return gammainc_lower(shape, x) - q

    lo, hi = 0.0, max(2.0 * shape, 1.0)
    while f(hi) < 0.0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            raise NonConvergence("could not bracket the gamma quantile")
    lgam = math.lgamma(shape)
    x = min(max(shape, 0.5 * (lo + hi) * 1e-3), 0.5 * (lo + hi))
    for _ in range(1000):
        fx = f(x)
        if fx == 0.0:
            return x * scale
        if fx < 0.0:
            lo = x
        else:
            hi = x
        log_pdf = (shape - 1.0) * math.log(x) - x - lgam
        pdf = math.exp(log_pdf) if log_pdf > -700.0 else 0.0
        x_new = x - fx / pdf if pdf > 0.0 else math.nan
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        step = abs(x_new - x)
        if (step <= tol and step <= 4e-16 * x_new) or hi - lo <= 4e-16 * hi:
            return x_new * scale
        x = x_new
    raise NonConvergence(f"gamma quantile did not converge (shape={shape}, q={q})")


# ---------------------------------------------------------------------------
# Moment estimators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GammaParams:
    e0: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    mean_hat: float
    var_hat: float
    n: int

    @property
    def alpha_hat(self) -> float:
        """Shape ``E^2 / Var``."""
        return self.mean_hat ** 2 / self.var_hat

    @property
    def beta_hat(self) -> float:
        """Scale ``n Var / E``."""
        return self.n * self.var_hat / self.mean_hat


def moment_estimators(grams) -> tuple:
    """V-statistic estimates ``(e0, e1, e2)`` for each Gram matrix.

    ``e0 = sum K / n^2``, ``e1 = sum K^2 / n^2`` and
    ``e2 = sum_i (rowsum_i K)^2 / n^3``.
    """
    mats = list(grams)
    n = mats[0].shape[0]
    e0 = np.array([k.sum() / (n * n) for k in mats])
    e1 = np.array([(k * k).sum() / (n * n) for k in mats])
    e2 = np.array([(k.sum(axis=1) ** 2).sum() / float(n) ** 3 for k in mats])
    return e0, e1, e2


def _prod_except(v: np.ndarray, *skip: int) -> float:
    mask = np.ones(v.size, dtype=bool)
    mask[list(skip)] = False
    return float(np.prod(v[mask]))


def gamma_mean_hat(e0, d: int, n: int) -> float:
    """Leading-order null mean of dHSIC with ``e0`` plugged in."""
    e0 = np.asarray(e0, dtype=np.float64)
    leave_one = sum(_prod_except(e0, r) for r in range(d))
    return (1.0 - leave_one + (d - 1) * float(np.prod(e0))) / n


def _falling(n: int, start: int, stop: int) -> float:
    """``prod_{k=start}^{stop} (n - k)`` (1 for an empty range)."""
    out = 1.0
    for k in range(start, stop + 1):
        out *= n - k
    return out


def gamma_var_prefactor(d: int, n: int) -> float:
    """``2 (n-2d)!/n! * (n-2d)!/(n-4d+2)!`` as falling-factorial products."""
    if n < 4 * d - 2:
        raise SampleTooSmall(f"variance expansion needs n >= 4d - 2 = {4 * d - 2}, got n = {n}")
    return 2.0 * _falling(n, 2 * d, 4 * d - 3) / _falling(n, 0, 2 * d - 1)


def gamma_var_hat(e0, e1, e2, d: int, n: int) -> float:
    """Leading-order null variance of dHSIC with the plug-in moments."""
    e0 = np.asarray(e0, dtype=np.float64)
    e1 = np.asarray(e1, dtype=np.float64)
    e2 = np.asarray(e2, dtype=np.float64)
    e0sq = e0 * e0
    bracket = (
        float(np.prod(e1))
        + (d - 1) ** 2 * float(np.prod(e0sq))
        + 2 * (d - 1) * float(np.prod(e2))
        + sum(e1[j] * _prod_except(e0sq, j) for j in range(d))
        - 2 * sum(e1[j] * _prod_except(e2, j) for j in range(d))
        - 2 * (d - 1) * sum(e2[j] * _prod_except(e0sq, j) for j in range(d))
        + sum(e2[j] * e2[l] * _prod_except(e0sq, j, l) for j in range(d) for l in range(d) if j != l)
    )
    return gamma_var_prefactor(d, n) * bracket


def gamma_params(grams) -> GammaParams:
    mats = list(grams)
    d, n = len(mats), mats[0].shape[0]
    e0, e1, e2 = moment_estimators(mats)
    return GammaParams(e0, e1, e2, float(gamma_mean_hat(e0, d, n)), float(gamma_var_hat(e0, e1, e2, d, n)), n)


def gamma_test(
    dataset: Dataset,
    specs: Sequence[KernelSpec] | None = None,
    alpha: float = 0.05,
    grams: GramStack | None = None,
) -> TestOutcome:
    """Gamma approximation test of joint independence.

    Rejects iff ``n * dHSIC`` exceeds the ``1 - alpha`` quantile of
    ``Gamma(alpha_hat, beta_hat)``; the p-value is the Gamma upper tail at
    the statistic.

    Raises
    ------
    SampleTooSmall
        If ``n < 4d - 2``.
    DegenerateMoments
        If the estimated mean or variance is not strictly positive, or a
        median-heuristic bandwidth is undefined because a variable is
        constant.
    """
    if not 0.0 < alpha < 1.0:
        raise InputError("alpha must lie in (0, 1)")
    if grams is None:
        try:
            grams = gram_stack(dataset, specs)
        except DegenerateSample as exc:
            raise DegenerateMoments(f"null moments undefined for constant data: {exc}") from exc
    params = gamma_params(grams)
    if not (params.mean_hat > 0 and params.var_hat > 0):
        raise DegenerateMoments(
            f"estimated null mean {params.mean_hat:.3g} and variance {params.var_hat:.3g} must both be positive"
        )
    t_obs = dhsic_statistic(grams).scaled
    shape, scale = params.alpha_hat, params.beta_hat
    crit = gamma_quantile(shape, scale, 1.0 - alpha)
    p = gamma_sf(t_obs, shape, scale)
    return TestOutcome(
        method="gamma",
        statistic=float(t_obs),
        p_value=float(p),
        crit_value=float(crit),
        reject=bool(t_obs > crit),
        alpha=float(alpha),
        n=grams.n,
        d=grams.d,
        bandwidths=grams.bandwidths,
        details={"shape": float(shape), "scale": float(scale), "mean_hat": params.mean_hat, "var_hat": params.var_hat},
    )
