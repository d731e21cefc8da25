"""Quadrature oracles for the cumulant function, mean and covariance of the field.

All integrals run over the lag ``s = t - (source time)``.  A field started
from zero at time ``start`` only sees lags in ``(0, t - start)``; by default
the history is infinite and is cut where the kernel's exponential
certificate puts the remainder below ``TAIL_TOL``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .geometry import TWO_PI, normalize_angle
from .kernels import N_ANGLE_NODES, Kernel, KernelError
from .levy import _as_seed
from .simulate import VolatilityFieldSpec

__all__ = [
    "CovarianceQuery",
    "history_cutoff",
    "field_cumulant",
    "field_mean",
    "field_covariance",
    "covariance_matrix",
    "kernel_l2_squared",
    "vol_autocovariance",
    "TAIL_TOL",
]

TAIL_TOL = 1e-12
_QUAD = dict(limit=500, epsabs=1e-14, epsrel=1e-11)


@dataclass(frozen=True)
class CovarianceQuery:
    t: float
    t_prime: float
    theta: float
    theta_prime: float

    def __post_init__(self):
        object.__setattr__(self, "theta", float(normalize_angle(self.theta)))
        object.__setattr__(self, "theta_prime", float(normalize_angle(self.theta_prime)))


def history_cutoff(kernel: Kernel, power: int = 1) -> float:
    """Lag beyond which ``int |K|^power`` over the tail is below ``TAIL_TOL``."""
    g, M = kernel.gamma_decay * power, kernel.M ** power * TWO_PI
    return max(1.0, math.log(max(M / (g * TAIL_TOL), 1.0)) / g)


def _lag_quad(f: Callable[[float], float], upper: float, alpha: float, breaks=()) -> float:
    """``int_0^upper f(s) ds`` for ``f`` with an integrable ``s^(alpha-1)``-type singularity at 0."""
    a = min(1.0, upper)
    inner = [b for b in breaks if 0 < b < a]

    # on (0, a] substitute s = a x^p with p chosen so the singular power becomes smooth
    p = 1.0 / alpha

    def g(x):
        s = a * x ** p
        return f(s) * a * p * x ** (p - 1.0) if x > 0 else 0.0

    pts = [(b / a) ** alpha for b in inner]
    head, err1 = integrate.quad(g, 0.0, 1.0, points=pts or None, **_QUAD)
    tail = 0.0
    if upper > a:
        tail, _ = integrate.quad(f, a, upper, points=[b for b in breaks if a < b < upper] or None, **_QUAD)
    total = head + tail
    if not math.isfinite(total):
        raise KernelError("lag quadrature did not converge")
    return total


def _angles():
    return TWO_PI * np.arange(N_ANGLE_NODES) / N_ANGLE_NODES


def _sigma_fn(sigma):
    if callable(sigma):
        return sigma
    v = float(sigma)
    return lambda s, th: v


def field_cumulant(kernel: Kernel, quad, u: float, sigma=1.0, theta_h: float = 0.0,
                   horizon: float | None = None) -> complex:
    """``int_0^horizon int_0^2pi C(u K(s, h, xi) sigma(s, xi); L') dxi ds``.

    ``sigma`` is a constant or a function of ``(lag, xi)``.
    """
    seed = _as_seed(quad)
    if u == 0:
        return 0j
    sig = _sigma_fn(sigma)
    phi = _angles()
    w = TWO_PI / phi.size
    upper = history_cutoff(kernel) if horizon is None else float(horizon)

    def inner(s, part):
        c = seed.cumulant(u * kernel(s, theta_h, phi) * sig(s, phi))
        return float(np.sum(c.real if part == 0 else c.imag) * w)

    re = _lag_quad(lambda s: inner(s, 0), upper, kernel.alpha)
    im = _lag_quad(lambda s: inner(s, 1), upper, kernel.alpha)
    return complex(re, im)


def _vol_moments(vol: VolatilityFieldSpec | None) -> tuple[float, float]:
    vol = vol or VolatilityFieldSpec()
    return vol.stationary_mean, vol.second_moment


def field_mean(kernel: Kernel, quad, vol: VolatilityFieldSpec | None = None, theta_h: float = 0.0,
               horizon: float | None = None) -> float:
    """``E[L'] E[sigma] int_0^horizon int K(s, h, xi) dxi ds`` (infinite history by default)."""
    m = _as_seed(quad).mean
    if m == 0:
        return 0.0
    es, _ = _vol_moments(vol)
    upper = history_cutoff(kernel) if horizon is None else float(horizon)
    val = _lag_quad(lambda s: float(kernel.spatial_integral(s, theta_h)), upper, kernel.alpha)
    return m * es * val


def kernel_l2_squared(kernel: Kernel, theta_h: float = 0.0, horizon: float | None = None) -> float:
    """``int_0^horizon int_0^2pi K(s, h, xi)^2 dxi ds``."""
    phi = _angles()
    w = TWO_PI / phi.size
    upper = history_cutoff(kernel, 2) if horizon is None else float(horizon)
    return _lag_quad(lambda s: float(np.sum(kernel(s, theta_h, phi) ** 2) * w), upper,
                     2.0 * kernel.alpha - 1.0)


def vol_autocovariance(vol: VolatilityFieldSpec, lag) -> np.ndarray:
    """Stationary autocovariance of the spatially uniform volatility field."""
    lag = np.abs(np.asarray(lag, dtype=float))
    if vol.kind == "constant":
        return np.zeros_like(lag)
    v = vol.delta / vol.gamma ** 3
    return v * np.exp(-vol.kappa * lag) / (2.0 * TWO_PI * vol.kappa)


def field_covariance(kernel: Kernel, quad, vol: VolatilityFieldSpec | None,
                     query: CovarianceQuery, start: float | None = None) -> float:
    """Covariance of the field at ``(t, theta)`` and ``(t', theta')``.

    First term ``V[L'] E[sigma^2] int int K K' dxi ds``.  Second term
    ``E[L']^2 int int int int K K' varrho`` which vanishes for centred seeds
    or constant volatility.  ``start`` is the time the field was started
    from zero (``None`` for an infinite history).
    """
    seed = _as_seed(quad)
    vol = vol or VolatilityFieldSpec()
    # order the points so that the second is the later one
    if query.t_prime >= query.t:
        t1, h1, t2, h2 = query.t, query.theta, query.t_prime, query.theta_prime
    else:
        t1, h1, t2, h2 = query.t_prime, query.theta_prime, query.t, query.theta
    d = t2 - t1
    if start is None:
        upper = history_cutoff(kernel, 2)
    else:
        if start >= t1:
            return 0.0
        upper = t1 - start
    _, es2 = _vol_moments(vol)
    phi = _angles()
    w = TWO_PI / phi.size

    def prod(s):
        return float(np.sum(kernel(s, h1, phi) * kernel(s + d, h2, phi)) * w)

    power = 2.0 * kernel.alpha - 1.0 if d == 0 else kernel.alpha
    first = seed.variance * es2 * _lag_quad(prod, upper, power, breaks=(d,) if d > 0 else ())
    m = seed.mean
    second = 0.0
    if m != 0 and vol.kind != "constant":
        second = m * m * _second_term(kernel, vol, h1, h2, d, upper)
    return first + second


def _second_term(kernel, vol, h1, h2, d, upper) -> float:
    # spatially uniform volatility: only the spatial integrals of K enter
    k1 = lambda a: float(kernel.spatial_integral(a, h1))
    k2 = lambda b: float(kernel.spatial_integral(b, h2))
    rho = lambda a, b: float(vol_autocovariance(vol, a + d - b))
    upper2 = upper + d
    val, _ = integrate.dblquad(
        lambda b, a: k1(a) * k2(b) * rho(a, b), 0.0, upper, 0.0, upper2, epsabs=1e-10, epsrel=1e-8
    )
    return val


def covariance_matrix(kernel: Kernel, quad, vol, points, start: float | None = None) -> np.ndarray:
    """Covariance over a list of ``(t, theta)`` points."""
    n = len(points)
    C = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            q = CovarianceQuery(points[i][0], points[j][0], points[i][1], points[j][1])
            C[i, j] = C[j, i] = field_covariance(kernel, quad, vol, q, start=start)
    return C
