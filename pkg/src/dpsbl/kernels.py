"""Special functions and belief-distribution primitives shared by all estimators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Variances are floored here before any inversion to keep precision-weighted
# combines finite on degenerate inputs.
VAR_FLOOR = 1e-12

_ASYMPTOTIC_CUTOFF = 6.0
# Bernoulli-number coefficients of the asymptotic tail, in increasing powers of 1/x^2.
_TAIL = (
    1.0 / 12.0,
    1.0 / 120.0,
    1.0 / 252.0,
    1.0 / 240.0,
    1.0 / 132.0,
    691.0 / 32760.0,
    1.0 / 12.0,
)


def digamma(x):
    """Digamma function for x > 0, elementwise on arrays.

    Upward recurrence shifts the argument to >= 6, then an asymptotic
    expansion is applied; absolute error below 1e-10 on (0, inf).
    """
    arr = np.asarray(x, dtype=float)
    if arr.size and (not np.all(np.isfinite(arr)) or np.any(arr <= 0.0)):
        raise ValueError("digamma requires finite input > 0")
    z = np.array(arr, dtype=float, copy=True)
    acc = np.zeros_like(z)
    for _ in range(int(_ASYMPTOTIC_CUTOFF)):
        mask = z < _ASYMPTOTIC_CUTOFF
        if not mask.any():
            break
        acc[mask] -= 1.0 / z[mask]
        z[mask] += 1.0
    inv2 = 1.0 / (z * z)
    tail = _TAIL[-1]
    for coef in _TAIL[-2::-1]:
        tail = coef - inv2 * tail
    out = acc + np.log(z) - 0.5 / z - inv2 * tail
    if np.isscalar(x) or arr.ndim == 0:
        return float(out)
    return out


@dataclass
class GaussianBelief:
    """Complex Gaussian belief with mean and (elementwise) variance."""

    mean: complex | np.ndarray
    variance: float | np.ndarray


@dataclass
class GammaBelief:
    """Gamma belief parameterized by shape and rate."""

    shape: float | np.ndarray
    rate: float | np.ndarray

    @property
    def mean(self):
        return self.shape / self.rate

    @property
    def var(self):
        return self.shape / self.rate**2

    @property
    def mean_log(self):
        return digamma(self.shape) - np.log(self.rate)


@dataclass
class BetaStatistics:
    """Beta belief parameters of a stick-breaking fraction."""

    tau1: float | np.ndarray
    tau2: float | np.ndarray

    @property
    def mean_log(self):
        return digamma(self.tau1) - digamma(self.tau1 + self.tau2)

    @property
    def mean_log1m(self):
        return digamma(self.tau2) - digamma(self.tau1 + self.tau2)


def combine_means_vars(mean_a, var_a, mean_b, var_b):
    """Precision-weighted product of two Gaussian messages on raw arrays."""
    va = np.maximum(var_a, VAR_FLOOR)
    vb = np.maximum(var_b, VAR_FLOOR)
    var = 1.0 / (1.0 / va + 1.0 / vb)
    mean = var * (mean_a / va + mean_b / vb)
    return mean, var


def gaussian_combine(a: GaussianBelief, b: GaussianBelief) -> GaussianBelief:
    """Product of two Gaussian beliefs; raises on non-positive variance."""
    for g in (a, b):
        if np.any(np.asarray(g.variance) <= 0.0):
            raise ValueError("gaussian_combine requires strictly positive variances")
    mean, var = combine_means_vars(a.mean, a.variance, b.mean, b.variance)
    return GaussianBelief(mean=mean, variance=var)
