"""Futures, within-day spreads and spread options by Monte Carlo; Bachelier implied vols.

The spot field is ``S_t(h) = s0(t, h) + Y_t(h)`` with ``Y`` the ambit field
started from zero at time 0, so pricing is always from ``tau0 = 0``.
Interest rates are zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .geometry import TWO_PI, AngularSet
from .kernels import Kernel
from .levy import CharacteristicQuadruplet, DomainError, EsscherTilt, _as_seed, esscher_tilt
from .moments import field_mean
from .simulate import DEFAULT_CHUNK, FieldSimulator, SimulationGrid, VolatilityFieldSpec

__all__ = [
    "ConfigurationError",
    "InversionError",
    "SpreadSpec",
    "FuturesSpec",
    "OptionQuote",
    "PricingModel",
    "futures_price_mc",
    "futures_mean_analytic",
    "spread_kernel_integrals",
    "spread_payoffs",
    "spread_price_mc",
    "spread_option_mc",
    "option_chain",
    "bachelier_price",
    "bachelier_vega",
    "bachelier_iv",
    "iv_influence",
    "mc_mean",
]


class ConfigurationError(ValueError):
    """Contract window or grid is inconsistent."""


class InversionError(ArithmeticError):
    """Implied-volatility inversion impossible for the given price."""


@dataclass(frozen=True)
class SpreadSpec:
    tau1: float
    tau2: float
    H1: AngularSet
    H2: AngularSet
    tau0: float = 0.0

    def __post_init__(self):
        if not self.tau0 <= self.tau1 < self.tau2:
            raise ConfigurationError("need tau0 <= tau1 < tau2")
        if self.H1.measure <= 0 or self.H2.measure <= 0:
            raise ConfigurationError("H1 and H2 must be nonempty")

    @classmethod
    def peak_offpeak(cls, tau1: float = 1.0, tau2: float = 2.0) -> "SpreadSpec":
        """Peak ``[2pi/3, 5pi/3]`` against its complement."""
        peak = AngularSet(((TWO_PI / 3, 5 * math.pi / 3),))
        return cls(tau1, tau2, peak, peak.complement())


@dataclass(frozen=True)
class FuturesSpec:
    tau1: float
    tau2: float
    strike: float = 0.0
    tau0: float = 0.0

    def __post_init__(self):
        if not self.tau0 <= self.tau1 < self.tau2:
            raise ConfigurationError("need tau0 <= tau1 < tau2")


@dataclass(frozen=True)
class OptionQuote:
    strike: float
    price: float
    stderr: float
    implied_vol: float | None = None
    iv_stderr: float | None = None


@dataclass(frozen=True)
class PricingModel:
    """Everything needed to simulate the spot field under the pricing measure.

    ``seasonal`` is a constant or a function ``s0(t, theta)`` added to the
    simulated field.  ``tilt`` is applied to the quadruplet before simulation.
    """

    kernel: Kernel
    quad: CharacteristicQuadruplet
    grid: SimulationGrid
    vol: VolatilityFieldSpec = field(default_factory=VolatilityFieldSpec)
    seasonal: float | Callable = 0.0
    tilt: EsscherTilt | None = None

    @property
    def pricing_quad(self) -> CharacteristicQuadruplet:
        q = self.quad if isinstance(self.quad, CharacteristicQuadruplet) else CharacteristicQuadruplet(self.quad)
        return esscher_tilt(q, self.tilt) if self.tilt is not None else q

    def simulator(self) -> FieldSimulator:
        if self.tilt is not None and self.vol.kind != "constant":
            # the tilt acts on L; with random sigma the tilted drift would be state dependent
            raise DomainError("Esscher tilting is supported with constant volatility only")
        centred, m = _as_seed(self.pricing_quad).centered()
        grid = self.grid if self.grid.burn_in is not None else _fresh(self.grid)
        return FieldSimulator(self.kernel, centred, self.vol, grid, drift=m)

    def seasonal_values(self, times: np.ndarray, angles: np.ndarray) -> np.ndarray:
        if callable(self.seasonal):
            return np.asarray(self.seasonal(times[:, None], angles[None, :]), dtype=float)
        return np.full((times.size, angles.size), float(self.seasonal))


def _fresh(grid: SimulationGrid) -> SimulationGrid:
    from dataclasses import replace

    return replace(grid, burn_in=0.0)


def _window(grid: SimulationGrid, tau1: float, tau2: float) -> tuple[int, int]:
    """Row indices of ``tau1`` and ``tau2`` among the recorded times ``dt, 2dt, ..., J dt``."""
    a, b = tau1 / grid.dt, tau2 / grid.dt
    ia, ib = int(round(a)), int(round(b))
    if abs(a - ia) > 1e-6 or abs(b - ib) > 1e-6:
        raise ConfigurationError("settlement window must lie on the time grid")
    if ia < 1 or ib > grid.J:
        raise ConfigurationError(
            f"window [{tau1}, {tau2}] not covered by recorded times [{grid.dt}, {grid.J * grid.dt}]"
        )
    return ia - 1, ib - 1


def _time_trapezoid(n: int, dt: float) -> np.ndarray:
    w = np.full(n, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def mc_mean(samples: np.ndarray) -> tuple[float, float]:
    """Sample mean and its standard error (pairwise summation)."""
    x = np.asarray(samples, dtype=float)
    n = x.size
    m = float(np.sum(x) / n)
    se = float(np.sqrt(np.sum((x - m) ** 2) / (n - 1) / n)) if n > 1 else float("nan")
    return m, se


def _pathwise(model: PricingModel, tau1: float, tau2: float, space_w: np.ndarray, paths: int,
              threads: int, chunk_size: int) -> np.ndarray:
    """``int_tau1^tau2 sum_l space_w[l] S_t(theta_l) dt`` for every path."""
    sim = model.simulator()
    g = sim.grid
    i0, i1 = _window(g, tau1, tau2)
    tw = _time_trapezoid(i1 - i0 + 1, g.dt)
    times = g.record_times()[i0 : i1 + 1]
    base = float(tw @ model.seasonal_values(times, g.angles) @ space_w)
    out = []
    for ch in sim.chunks(paths, threads, chunk_size):
        win = ch.fields[:, i0 : i1 + 1, :]
        out.append(np.einsum("pjl,j,l->p", win, tw, space_w) + base)
    return np.concatenate(out)


def futures_price_mc(model: PricingModel, spec: FuturesSpec, paths: int, threads: int = 1,
                     chunk_size: int = DEFAULT_CHUNK) -> tuple[float, float]:
    """``1/(2 pi (tau2 - tau1)) int int E[S_t(phi)] dphi dt - P`` with its standard error."""
    if spec.tau0 != 0:
        raise ConfigurationError("only tau0 = 0 is supported")
    H = model.grid.H
    vals = _pathwise(model, spec.tau1, spec.tau2, np.full(H, 1.0 / H), paths, threads, chunk_size)
    m, se = mc_mean(vals / (spec.tau2 - spec.tau1))
    return m - spec.strike, se


def futures_mean_analytic(model: PricingModel, spec: FuturesSpec, n_time: int = 16) -> float:
    """Model futures value from the moments oracle (field started at 0, constant volatility)."""
    grid = model.grid
    burn = grid.burn_in or 0.0
    H = grid.H
    x, w = np.polynomial.legendre.leggauss(n_time)
    half = 0.5 * (spec.tau2 - spec.tau1)
    ts, w = spec.tau1 + half * (x + 1.0), half * w
    quad = model.pricing_quad
    vals = np.array([
        np.mean([field_mean(model.kernel, quad, model.vol, th, horizon=t + burn) for th in grid.angles])
        for t in ts
    ])
    season = model.seasonal_values(ts, grid.angles).mean(axis=1)
    return float(w @ (vals + season) / (spec.tau2 - spec.tau1)) - spec.strike


def _gauss_legendre_on(aset: AngularSet, n: int = 64):
    x, w = np.polynomial.legendre.leggauss(n)
    nodes, weights = [], []
    for a, b in aset.intervals:
        nodes.append(0.5 * (b - a) * x + 0.5 * (a + b))
        weights.append(0.5 * (b - a) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def spread_kernel_integrals(kernel: Kernel, H1: AngularSet, H2: AngularSet, t_lag: float, theta_xi: float) -> float:
    """``int_H1 K(t, phi, xi) dphi - int_H2 K(t, phi, xi) dphi`` by Gauss-Legendre per interval."""
    if not t_lag > 0:
        raise DomainError("t_lag must be > 0")
    if H1 == H2:
        return 0.0
    total = 0.0
    for sign, aset in ((1.0, H1), (-1.0, H2)):
        x, w = _gauss_legendre_on(aset)
        total += sign * float(w @ kernel(t_lag, x, theta_xi))
    return total


def spread_payoffs(model: PricingModel, spec: SpreadSpec, paths: int, threads: int = 1,
                   chunk_size: int = DEFAULT_CHUNK) -> np.ndarray:
    """Pathwise ``X = int_tau1^tau2 [int_H1 S - int_H2 S] dt`` (midpoint rule in angle)."""
    if spec.tau0 != 0:
        raise ConfigurationError("only tau0 = 0 is supported")
    H = model.grid.H
    w = spec.H1.cell_weights(H) - spec.H2.cell_weights(H)
    return _pathwise(model, spec.tau1, spec.tau2, w, paths, threads, chunk_size)


def spread_price_mc(model: PricingModel, spec: SpreadSpec, paths: int, threads: int = 1,
                    chunk_size: int = DEFAULT_CHUNK) -> tuple[float, float]:
    return mc_mean(spread_payoffs(model, spec, paths, threads, chunk_size))


# --- Bachelier -------------------------------------------------------------------------


def _phi(x):
    return np.exp(-0.5 * x * x) / math.sqrt(TWO_PI)


def _Phi(x):
    return special.ndtr(x)


def bachelier_price(forward: float, strike: float, maturity: float, vol: float) -> float:
    """Call price ``(F - P) Phi(d) + vol sqrt(T) phi(d)``, ``d = (F - P) / (vol sqrt(T))``."""
    s = vol * math.sqrt(maturity)
    if s <= 0:
        return max(forward - strike, 0.0)
    d = (forward - strike) / s
    return float((forward - strike) * _Phi(d) + s * _phi(d))


def bachelier_vega(forward: float, strike: float, maturity: float, vol: float) -> float:
    s = vol * math.sqrt(maturity)
    return float(math.sqrt(maturity) * _phi((forward - strike) / s))


def bachelier_iv(price: float, forward: float, strike: float, maturity: float, tol: float = 1e-10) -> float:
    """Invert the Bachelier call formula by bracketed Newton (bisection fallback)."""
    if not maturity > 0:
        raise InversionError("maturity must be > 0")
    intrinsic = max(forward - strike, 0.0)
    if not (math.isfinite(price) and price > intrinsic):
        raise InversionError(
            f"price {price:.6g} outside the no-arbitrage range (intrinsic {intrinsic:.6g}, inf)"
        )
    f = lambda v: bachelier_price(forward, strike, maturity, v) - price
    lo, hi = 0.0, max(price, abs(forward - strike), 1e-12) / math.sqrt(maturity)
    while f(hi) < 0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e12:
            raise InversionError("could not bracket the implied volatility")
    v = 0.5 * (lo + hi)
    for _ in range(200):
        fv = f(v)
        # converged checks come before moving v, so a root hit exactly is returned as is
        if abs(fv) <= tol * tol * max(price, 1e-300):
            return v
        if fv > 0:
            hi = v
        else:
            lo = v
        if hi - lo <= tol * v:
            return v
        vega = bachelier_vega(forward, strike, maturity, v)
        step = v - fv / vega if vega > 0 else None
        v = step if step is not None and lo < step < hi else 0.5 * (lo + hi)
    return v


def iv_influence(payoffs: np.ndarray, strike: float, maturity: float):
    """Implied vol from MC data plus per-path influence values for its standard error.

    The forward is the MC mean of the spread; the delta method gives
    ``psi_i = ((X_i - P)^+ - C - Phi(d) (X_i - F)) / vega``.
    """
    X = np.asarray(payoffs, dtype=float)
    pay = np.maximum(X - strike, 0.0)
    F, C = float(np.mean(X)), float(np.mean(pay))
    iv = bachelier_iv(C, F, strike, maturity)
    s = iv * math.sqrt(maturity)
    d = (F - strike) / s
    vega = bachelier_vega(F, strike, maturity, iv)
    psi = ((pay - C) - _Phi(d) * (X - F)) / vega
    return iv, psi


def spread_option_mc(payoffs_or_model, spec: SpreadSpec | None = None, strike: float = 0.0,
                     paths: int | None = None, maturity: float | None = None, **kw) -> OptionQuote:
    """Call on the spread; pass either simulated payoffs or a model plus spec."""
    if isinstance(payoffs_or_model, PricingModel):
        X = spread_payoffs(payoffs_or_model, spec, paths, **kw)
    else:
        X = np.asarray(payoffs_or_model, dtype=float)
    return option_chain(X, [strike], maturity if maturity is not None else (spec.tau1 if spec else None))[0]


def option_chain(payoffs: np.ndarray, strikes: Sequence[float], maturity: float | None) -> list[OptionQuote]:
    """Quotes on common random numbers; IVs use the MC forward and ``maturity`` (None skips IVs)."""
    X = np.asarray(payoffs, dtype=float)
    quotes = []
    for P in strikes:
        price, se = mc_mean(np.maximum(X - P, 0.0))
        iv = iv_se = None
        if maturity is not None:
            try:
                iv, psi = iv_influence(X, P, maturity)
                iv_se = float(np.std(psi, ddof=1) / math.sqrt(X.size))
            except InversionError:
                iv = iv_se = None
        quotes.append(OptionQuote(float(P), price, se, iv, iv_se))
    return quotes
