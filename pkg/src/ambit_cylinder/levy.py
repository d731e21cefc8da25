"""Lévy seeds and Lévy bases on the cylinder.

A Lévy basis ``L`` with Riemannian intensity is characterised by its seed
``L'``: for any bounded set ``A`` of area ``a``, ``C(u; L(A)) = a * C(u; L')``.
Three seed families are supported (Gaussian, NIG, inverse Gaussian).  All
cumulants use the characteristic convention ``C(u) = log E[exp(i u X)]``;
``cgf(q) = C(-i q) = log E[exp(q X)]`` is the moment-generating version.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import ClassVar, Union

import numpy as np

__all__ = [
    "DomainError",
    "MomentConditionError",
    "GaussianSeed",
    "NIGSeed",
    "InverseGaussianSeed",
    "LevySeed",
    "CharacteristicQuadruplet",
    "EsscherTilt",
    "seed_cumulant",
    "seed_mean",
    "seed_variance",
    "sample_patch",
    "esscher_tilt",
    "sample_inverse_gaussian",
    "nig_mean_zero_location",
]


class DomainError(ValueError):
    """Argument outside the domain where a quantity is defined."""


class MomentConditionError(DomainError):
    """Exponential moment required by an Esscher tilt does not exist."""


def sample_inverse_gaussian(mean, shape, rng: np.random.Generator, size=None) -> np.ndarray:
    """Draw IG(mean, shape) variates (Michael, Schucany & Haas).

    The small root is taken as ``mean**2 / big_root`` which avoids the
    cancellation of the textbook formula when ``shape`` is tiny, the regime
    of small noise cells.
    """
    mean = np.asarray(mean, dtype=float)
    shape = np.asarray(shape, dtype=float)
    size = np.broadcast_shapes(mean.shape, shape.shape) if size is None else size
    y = rng.standard_normal(size) ** 2
    u = rng.random(size)
    my = mean * y
    big = mean + mean * my / (2.0 * shape) + (mean / (2.0 * shape)) * np.sqrt(4.0 * shape * my + my * my)
    small = mean * mean / big
    return np.where(u <= mean / (mean + small), small, big)


class _Seed:
    family: ClassVar[str]

    def cumulant(self, u):
        raise NotImplementedError

    def cgf(self, q):
        """``log E[exp(q L')]`` for real (or complex) ``q`` in the strip."""
        return self.cumulant(-1j * np.asarray(q, dtype=complex))

    @property
    def mean(self) -> float:
        raise NotImplementedError

    @property
    def variance(self) -> float:
        raise NotImplementedError

    @property
    def second_moment(self) -> float:
        return self.variance + self.mean ** 2

    def sample(self, area, rng: np.random.Generator, size=None) -> np.ndarray:
        raise NotImplementedError

    def centered(self) -> tuple["_Seed", float]:
        """Return ``(seed with mean zero, removed mean)``."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        d = {"family": self.family}
        d.update(self.__dict__)
        return d


@dataclass(frozen=True)
class GaussianSeed(_Seed):
    """Gaussian seed ``N(drift, sigma2)``; the basis has ``L(A) ~ N(a*drift, a*sigma2)``."""

    sigma2: float
    drift: float = 0.0
    family: ClassVar[str] = "gaussian"

    def __post_init__(self):
        if not self.sigma2 >= 0:
            raise DomainError(f"Gaussian variance must be >= 0, got {self.sigma2}")

    def cumulant(self, u):
        u = np.asarray(u, dtype=complex)
        return 1j * u * self.drift - 0.5 * self.sigma2 * u * u

    @property
    def mean(self) -> float:
        return self.drift

    @property
    def variance(self) -> float:
        return self.sigma2

    def sample(self, area, rng, size=None):
        area = np.asarray(area, dtype=float)
        z = rng.standard_normal(np.broadcast_shapes(area.shape) if size is None else size)
        return area * self.drift + np.sqrt(area * self.sigma2) * z

    def centered(self):
        return replace(self, drift=0.0), self.drift


@dataclass(frozen=True)
class NIGSeed(_Seed):
    """Normal inverse Gaussian seed NIG(alpha, beta, mu, delta).

    ``C(u) = i u mu + delta (sqrt(alpha^2 - beta^2) - sqrt(alpha^2 - (beta + i u)^2))``.
    """

    alpha: float
    beta: float
    mu: float
    delta: float
    family: ClassVar[str] = "nig"

    def __post_init__(self):
        if not (self.delta > 0 and abs(self.beta) < self.alpha):
            raise DomainError(
                f"NIG needs delta > 0 and |beta| < alpha, got alpha={self.alpha}, "
                f"beta={self.beta}, delta={self.delta}"
            )

    @property
    def _g(self) -> float:
        return math.sqrt(self.alpha ** 2 - self.beta ** 2)

    def cumulant(self, u):
        u = np.asarray(u, dtype=complex)
        if np.any(np.abs(self.beta - u.imag) >= self.alpha):
            raise DomainError("u outside the NIG strip |beta - Im u| < alpha")
        b = self.beta + 1j * u
        return 1j * u * self.mu + self.delta * (self._g - np.sqrt(self.alpha ** 2 - b * b))

    @property
    def mean(self) -> float:
        return self.mu + self.delta * self.beta / self._g

    @property
    def variance(self) -> float:
        return self.delta * self.alpha ** 2 / self._g ** 3

    def sample(self, area, rng, size=None):
        area = np.asarray(area, dtype=float)
        shp = area.shape if size is None else size
        out = np.zeros(shp)
        a = np.broadcast_to(area, shp)
        pos = a > 0
        if np.any(pos):
            ad = a[pos] * self.delta
            y = sample_inverse_gaussian(ad / self._g, ad * ad, rng)
            z = rng.standard_normal(y.shape)
            out[pos] = a[pos] * self.mu + self.beta * y + np.sqrt(y) * z
        return out

    def centered(self):
        m = self.mean
        return replace(self, mu=self.mu - m), m


@dataclass(frozen=True)
class InverseGaussianSeed(_Seed):
    """Inverse Gaussian seed IG(delta, gamma): mean delta/gamma, variance delta/gamma^3.

    ``C(u) = delta*gamma - delta*sqrt(gamma^2 - 2 i u)``; over a set of area
    ``a`` the basis is IG(a*delta, gamma).
    """

    delta: float
    gamma: float
    family: ClassVar[str] = "inverse_gaussian"

    def __post_init__(self):
        if not (self.delta > 0 and self.gamma > 0):
            raise DomainError(f"IG needs delta, gamma > 0, got {self.delta}, {self.gamma}")

    def cumulant(self, u):
        u = np.asarray(u, dtype=complex)
        if np.any(u.imag <= -0.5 * self.gamma ** 2):
            raise DomainError("u outside the IG strip Im u > -gamma^2/2")
        return self.delta * self.gamma - self.delta * np.sqrt(self.gamma ** 2 - 2j * u)

    @property
    def mean(self) -> float:
        return self.delta / self.gamma

    @property
    def variance(self) -> float:
        return self.delta / self.gamma ** 3

    def sample(self, area, rng, size=None):
        area = np.asarray(area, dtype=float)
        shp = area.shape if size is None else size
        out = np.zeros(shp)
        a = np.broadcast_to(area, shp)
        pos = a > 0
        if np.any(pos):
            ad = a[pos] * self.delta
            out[pos] = sample_inverse_gaussian(ad / self.gamma, ad * ad, rng)
        return out

    def centered(self):
        raise DomainError("an inverse Gaussian seed is positive and cannot be centred")


LevySeed = Union[GaussianSeed, NIGSeed, InverseGaussianSeed]


def nig_mean_zero_location(alpha: float, beta: float, delta: float) -> float:
    """Location ``mu`` giving an NIG seed with mean zero."""
    return -delta * beta / math.sqrt(alpha ** 2 - beta ** 2)


@dataclass(frozen=True)
class CharacteristicQuadruplet:
    """Seed plus intensity measure; the intensity is always the cylinder area."""

    seed: LevySeed
    intensity: str = "lambda_C"

    def __post_init__(self):
        if self.intensity != "lambda_C":
            raise DomainError("only the cylinder Riemannian measure is supported as intensity")

    def cumulant(self, u, area: float = 1.0):
        return area * self.seed.cumulant(u)


@dataclass(frozen=True)
class EsscherTilt:
    q: float


def _as_seed(obj) -> LevySeed:
    return obj.seed if isinstance(obj, CharacteristicQuadruplet) else obj


def seed_cumulant(seed, u):
    return _as_seed(seed).cumulant(u)


def seed_mean(seed) -> float:
    return _as_seed(seed).mean


def seed_variance(seed) -> float:
    return _as_seed(seed).variance


def sample_patch(quad, area, rng: np.random.Generator, size=None):
    """Exact draw(s) of ``L(A)`` for sets of the given area(s)."""
    if np.any(np.asarray(area) < 0):
        raise DomainError("area must be non-negative")
    out = _as_seed(quad).sample(area, rng, size=size)
    if np.ndim(out) == 0:
        return float(out)
    return out


def esscher_tilt(quad: CharacteristicQuadruplet, tilt: EsscherTilt) -> CharacteristicQuadruplet:
    """Exponentially tilt the Lévy measure by ``exp(q x)``.

    Gaussian: the drift moves by ``q * sigma2``.  NIG: closed under tilting,
    ``beta -> beta + q``.  IG: ``gamma -> sqrt(gamma^2 - 2 q)``.
    """
    seed, q = quad.seed, float(tilt.q)
    if q == 0.0:
        return quad
    if isinstance(seed, GaussianSeed):
        new = replace(seed, drift=seed.drift + q * seed.sigma2)
    elif isinstance(seed, NIGSeed):
        if abs(seed.beta + q) >= seed.alpha:
            raise MomentConditionError(
                f"|beta + q| = {abs(seed.beta + q)} >= alpha = {seed.alpha}: "
                "the tilted exponential moment does not exist"
            )
        new = replace(seed, beta=seed.beta + q)
    elif isinstance(seed, InverseGaussianSeed):
        if 2 * q >= seed.gamma ** 2:
            raise MomentConditionError(f"IG tilt needs q < gamma^2/2 = {seed.gamma ** 2 / 2}")
        new = replace(seed, gamma=math.sqrt(seed.gamma ** 2 - 2 * q))
    else:  # pragma: no cover
        raise TypeError(f"unknown seed {seed!r}")
    return CharacteristicQuadruplet(new, quad.intensity)


def seed_from_dict(d: dict) -> LevySeed:
    d = dict(d)
    fam = d.pop("family", None)
    if fam == "gaussian":
        return GaussianSeed(**d)
    if fam == "nig":
        if d.get("mu") == "mean_zero":
            d["mu"] = nig_mean_zero_location(d["alpha"], d["beta"], d["delta"])
        return NIGSeed(**d)
    if fam == "inverse_gaussian":
        return InverseGaussianSeed(**d)
    raise DomainError(f"unknown seed family {fam!r}")
