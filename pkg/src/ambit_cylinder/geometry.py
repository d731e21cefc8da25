"""Cylinder index set R x S^1 and its Riemannian (product Lebesgue) measure.

A point on the cylinder is a time ``t`` (years) and an angle ``theta`` in
``(0, 2*pi]``.  Delivery period ``d`` of ``H`` daily periods sits at angle
``2*pi*d/H``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi

__all__ = [
    "TWO_PI",
    "normalize_angle",
    "circle_param",
    "angular_distance",
    "delivery_angle",
    "CylinderPoint",
    "CylinderPatch",
    "AngularSet",
    "riemannian_area",
]


def normalize_angle(theta):
    """Map angles into ``(0, 2*pi]``; works elementwise on arrays."""
    r = np.mod(theta, TWO_PI)
    r = np.where(r == 0.0, TWO_PI, r)
    if np.ndim(r) == 0:
        return float(r)
    return r


def circle_param(theta):
    """Point ``(cos theta, sin theta)`` on the unit circle."""
    return np.cos(theta), np.sin(theta)


def angular_distance(a, b):
    """Geodesic distance on the unit circle, in ``[0, pi]``."""
    d = np.mod(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)), TWO_PI)
    out = np.minimum(d, TWO_PI - d)
    if np.ndim(out) == 0:
        return float(out)
    return out


def delivery_angle(d, H: int):
    """Angle of delivery period ``d`` (1-based) out of ``H`` per day."""
    return normalize_angle(TWO_PI * np.asarray(d, dtype=float) / H)


@dataclass(frozen=True)
class CylinderPoint:
    t: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", normalize_angle(float(self.theta)))

    @property
    def xyz(self) -> tuple[float, float, float]:
        c, s = circle_param(self.theta)
        return (self.t, float(c), float(s))


@dataclass(frozen=True)
class CylinderPatch:
    """Rectangle ``[t_lo, t_hi] x [theta_lo, theta_hi]`` on the cylinder.

    Angular bounds are kept raw (not wrapped) so that a patch may straddle
    the seam at ``2*pi``; only the extent ``theta_hi - theta_lo`` matters
    for the measure.
    """

    t_lo: float
    t_hi: float
    theta_lo: float
    theta_hi: float

    def __post_init__(self):
        if self.t_hi < self.t_lo:
            raise ValueError(f"t_hi={self.t_hi} < t_lo={self.t_lo}")
        extent = self.theta_hi - self.theta_lo
        if extent < 0 or extent > TWO_PI * (1 + 1e-12):
            raise ValueError(f"angular extent {extent} outside [0, 2*pi]")

    def rotated(self, c: float) -> "CylinderPatch":
        lo = normalize_angle(self.theta_lo + c)
        return CylinderPatch(self.t_lo, self.t_hi, lo, lo + (self.theta_hi - self.theta_lo))

    def split_time(self, n: int) -> list["CylinderPatch"]:
        edges = np.linspace(self.t_lo, self.t_hi, n + 1)
        return [CylinderPatch(a, b, self.theta_lo, self.theta_hi) for a, b in zip(edges[:-1], edges[1:])]

    def split_angle(self, n: int) -> list["CylinderPatch"]:
        edges = np.linspace(self.theta_lo, self.theta_hi, n + 1)
        return [CylinderPatch(self.t_lo, self.t_hi, a, b) for a, b in zip(edges[:-1], edges[1:])]


def riemannian_area(patch: CylinderPatch) -> float:
    """Measure of a patch; the metric determinant on the unit cylinder is 1."""
    return (patch.t_hi - patch.t_lo) * (patch.theta_hi - patch.theta_lo)


def _wrap_interval(lo: float, hi: float) -> list[tuple[float, float]]:
    """Split an interval of length <= 2*pi into pieces inside [0, 2*pi]."""
    length = hi - lo
    if length <= 0:
        return []
    if length >= TWO_PI:
        return [(0.0, TWO_PI)]
    a = float(np.mod(lo, TWO_PI))
    b = a + length
    if b <= TWO_PI:
        return [(a, b)]
    return [(a, TWO_PI), (0.0, b - TWO_PI)]


@dataclass(frozen=True)
class AngularSet:
    """Finite union of disjoint angular intervals inside ``(0, 2*pi]``.

    Endpoints are treated as measure-zero; open/closed distinctions
    (``(0, 2pi/3)`` vs ``[2pi/3, 5pi/3]``) do not affect any integral.
    """

    intervals: tuple[tuple[float, float], ...] = field(default_factory=tuple)

    def __post_init__(self):
        pieces: list[tuple[float, float]] = []
        for lo, hi in self.intervals:
            if hi < lo:
                raise ValueError(f"interval ({lo}, {hi}) has hi < lo")
            pieces.extend(_wrap_interval(float(lo), float(hi)))
        pieces.sort()
        for (a0, b0), (a1, b1) in zip(pieces[:-1], pieces[1:]):
            if a1 < b0 - 1e-12:
                raise ValueError(f"intervals overlap: ({a0}, {b0}) and ({a1}, {b1})")
        object.__setattr__(self, "intervals", tuple(pieces))

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]]) -> "AngularSet":
        return cls(tuple((float(a), float(b)) for a, b in pairs))

    @classmethod
    def full(cls) -> "AngularSet":
        return cls(((0.0, TWO_PI),))

    def complement(self) -> "AngularSet":
        out, cur = [], 0.0
        for a, b in self.intervals:
            if a > cur:
                out.append((cur, a))
            cur = max(cur, b)
        if cur < TWO_PI:
            out.append((cur, TWO_PI))
        return AngularSet(tuple(out))

    @property
    def measure(self) -> float:
        return float(sum(b - a for a, b in self.intervals))

    def contains(self, theta) -> np.ndarray:
        th = np.asarray(normalize_angle(theta), dtype=float)
        hit = np.zeros(th.shape, dtype=bool)
        for a, b in self.intervals:
            hit |= (th > a) & (th <= b)
        return hit

    def overlap(self, lo: float, hi: float) -> float:
        """Measure of ``self`` intersected with the arc ``[lo, hi]``."""
        total = 0.0
        for a, b in _wrap_interval(lo, hi):
            for c, d in self.intervals:
                total += max(0.0, min(b, d) - max(a, c))
        return total

    def cell_weights(self, H: int) -> np.ndarray:
        """Midpoint-rule weights for integrating over the set with ``H`` output angles.

        Output angle ``2*pi*l/H`` represents the arc of width ``2*pi/H``
        centred on it; its weight is the measure of that arc inside the set.
        The weights of a set and its complement sum to ``2*pi/H`` each.
        """
        width = TWO_PI / H
        centres = TWO_PI * np.arange(1, H + 1) / H
        return np.array([self.overlap(c - width / 2, c + width / 2) for c in centres])
