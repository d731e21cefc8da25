"""Kernel families on the cylinder and their circle-Fourier / Laplace transforms.

Conventions used throughout the package:

* ``fourier_coeff(t, h, n) = (1/2pi) * int_0^{2pi} exp(-i n phi) K(t, h, phi) dphi``
  so that ``K(t, h, xi) = sum_n fourier_coeff(t, h, n) * exp(i n xi)``;
* ``laplace_fourier(z, h, n) = int_0^inf exp(-z t) fourier_coeff(t, h, n) dt``.

With these, the Bromwich integral on ``Re z = z_r`` reconstructs the kernel as
``(1/2pi) sum_n int laplace_fourier(z_r + i y, h, n) exp((z_r + i y) t) dy * exp(i n xi)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from .geometry import TWO_PI
from .levy import DomainError

__all__ = [
    "KernelError",
    "Kernel",
    "GammaCardioidKernel",
    "SemiParametricKernel",
    "CallableKernel",
    "gamma_kernel",
    "cardioid_density",
    "laguerre",
    "laguerre_laplace",
    "kernel_eval",
    "fourier_coeff",
    "laplace_fourier",
    "laplace_fourier_quad",
    "project_kernel",
    "l2_kernel_distance",
    "l2_norm",
    "kernel_from_dict",
    "T_MIN",
    "talbot_invert",
    "laplace_roundtrip_residual",
    "fourier_roundtrip_residual",
]

T_MIN = 1e-3  # start of the grid on which the exponential-domination certificate is checked
N_TIME_NODES = 128
N_ANGLE_NODES = 256


class KernelError(ArithmeticError):
    """Numerical failure while integrating or projecting a kernel."""


def gamma_kernel(t, alpha: float, beta: float):
    """Null-spatial gamma kernel ``t^(alpha-1) exp(-beta t)``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("gamma kernel is only defined for t > 0")
    out = t ** (alpha - 1.0) * np.exp(-beta * t)
    return float(out) if out.ndim == 0 else out


def laguerre(k: int, alpha: float, x):
    """Generalised Laguerre polynomial ``L_k^(alpha)(x)`` by the three-term recurrence."""
    if k < 0:
        raise ValueError("k must be >= 0")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if k == 0:
        return prev if prev.ndim else float(prev)
    cur = 1.0 + alpha - x
    for m in range(1, k):
        prev, cur = cur, ((2 * m + 1 + alpha - x) * cur - (m + alpha) * prev) / (m + 1)
    return cur if cur.ndim else float(cur)


def _laguerre_all(n: int, alpha: float, x: np.ndarray) -> np.ndarray:
    """Rows ``L_0..L_n`` evaluated at ``x``; shape ``(n + 1,) + x.shape``."""
    x = np.asarray(x, dtype=float)
    out = np.empty((n + 1,) + x.shape)
    out[0] = 1.0
    if n >= 1:
        out[1] = 1.0 + alpha - x
    for m in range(1, n):
        out[m + 1] = ((2 * m + 1 + alpha - x) * out[m] - (m + alpha) * out[m - 1]) / (m + 1)
    return out


def laguerre_laplace(k: int, alpha: float, z):
    """Laplace transform of ``t^(alpha-1) exp(-t/2) L_k^(alpha)(t)`` (Re z > -1/2)."""
    z = np.asarray(z, dtype=complex)
    s = z + 0.5
    total = np.zeros_like(z)
    for m in range(k + 1):
        coef = (-1) ** m * math.exp(
            math.lgamma(k + alpha + 1) - math.lgamma(k - m + 1) - math.lgamma(alpha + m + 1)
            - math.lgamma(m + 1) + math.lgamma(alpha + m)
        )
        total = total + coef * s ** (-(alpha + m))
    return total


def cardioid_density(t, theta_h, theta_xi, beta_w: float = 1.0):
    """Cardioid spatial density ``(1 + w(t) cos(theta_xi - theta_h)) / 2pi`` with ``w = 1 - exp(-beta_w t)``."""
    w = 1.0 - np.exp(-beta_w * np.asarray(t, dtype=float))
    return (1.0 + w * np.cos(np.asarray(theta_xi) - np.asarray(theta_h))) / TWO_PI


def _trapz_nodes(n: int = N_ANGLE_NODES) -> np.ndarray:
    return TWO_PI * np.arange(n) / n


class Kernel:
    """Stationary kernel ``K(t, theta_h, theta_xi)`` for lags ``t > 0``.

    Subclasses provide ``_eval``; the closed-form transforms are optional and
    fall back to quadrature.
    """

    alpha: float
    #: exponential rate in the certificate ``|K| <= M exp(-gamma_decay t)``
    gamma_decay: float
    #: prefactor of the certificate, valid for ``t >= T_MIN``
    M: float
    #: ``Re z`` must exceed ``-abscissa`` for the Laplace transform to converge
    abscissa: float
    #: exponential rate governing ``K^2`` decay, used to scale time quadrature
    l2_rate: float
    fourier_support: tuple[int, ...] | None = None

    def _eval(self, t, th, xi):
        raise NotImplementedError

    def __call__(self, t, theta_h, theta_xi):
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise DomainError("kernel lag must be > 0")
        return self._eval(t, np.asarray(theta_h, dtype=float), np.asarray(theta_xi, dtype=float))

    # default transforms by quadrature -------------------------------------------------
    def fourier_coeff(self, t, theta_h, n: int):
        t = np.asarray(t, dtype=float)
        phi = _trapz_nodes()
        vals = self(t[..., None], np.asarray(theta_h, dtype=float)[..., None], phi)
        return np.mean(vals * np.exp(-1j * n * phi), axis=-1)

    def laplace_fourier(self, z, theta_h, n: int, continued: bool = False):
        """Laplace transform of ``t -> fourier_coeff(t, theta_h, n)``.

        ``continued=True`` evaluates the closed form's analytic continuation
        left of the abscissa (not available for quadrature-only kernels).
        """
        z = np.asarray(z, dtype=complex)
        if continued:
            raise DomainError("no closed form to continue for this kernel")
        self._check_abscissa(z)
        flat = [laplace_fourier_quad(self, zz, float(theta_h), n) for zz in z.ravel()]
        return np.asarray(flat).reshape(z.shape)

    def spatial_integral(self, t, theta_h):
        """``int_0^{2pi} K(t, theta_h, xi) dxi``."""
        return (TWO_PI * self.fourier_coeff(t, theta_h, 0)).real

    def _check_abscissa(self, z):
        if np.any(np.real(z) <= -self.abscissa):
            raise DomainError(f"Re z must exceed -{self.abscissa} for the Laplace transform")

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class GammaCardioidKernel(Kernel):
    """Gamma kernel with angle-dependent mean reversion and a cardioid spatial law.

    ``K(t, h, xi) = t^(alpha-1) exp(-eta(h) t) (1 + w(t) cos(xi - h)) / 2pi``
    where ``eta(theta) = sum_k eta_cos[k] cos(k theta)`` and either
    ``w(t) = 1 - exp(-beta_w t)`` or, if ``w_const`` is given, ``w = w_const``.
    The default ``eta_cos = (2, 1)`` is ``eta(theta) = 2 - cos(pi - theta)``.
    """

    alpha: float = 0.75
    eta_cos: tuple[float, ...] = (2.0, 1.0)
    beta_w: float = 1.0
    w_const: float | None = None
    fourier_support: tuple[int, ...] = (-1, 0, 1)

    def __post_init__(self):
        if not 0.5 < self.alpha <= 1.0:
            raise DomainError(f"alpha must lie in (1/2, 1], got {self.alpha}")
        object.__setattr__(self, "eta_cos", tuple(float(c) for c in self.eta_cos))
        if self.eta_min <= 0:
            raise DomainError("eta must be strictly positive on the circle")
        if self.w_const is not None and not abs(self.w_const) < 1:
            raise DomainError("|w| must be < 1")
        if self.w_const is None and not self.beta_w > 0:
            raise DomainError("beta_w must be > 0")

    def eta(self, theta):
        theta = np.asarray(theta, dtype=float)
        out = np.zeros_like(theta)
        for k, c in enumerate(self.eta_cos):
            out = out + c * np.cos(k * theta)
        return out

    @cached_property
    def eta_min(self) -> float:
        grid = TWO_PI * np.arange(1, 4097) / 4096
        return float(np.min(self.eta(grid)))

    @property
    def gamma_decay(self) -> float:
        return self.eta_min

    @property
    def abscissa(self) -> float:
        return self.eta_min

    @property
    def l2_rate(self) -> float:
        return self.eta_min

    @property
    def M(self) -> float:
        # t^(alpha-1) <= T_MIN^(alpha-1) on [T_MIN, inf) and J <= 1/pi
        return T_MIN ** (self.alpha - 1.0) / math.pi

    def w(self, t):
        t = np.asarray(t, dtype=float)
        if self.w_const is not None:
            return np.full_like(t, self.w_const)
        return -np.expm1(-self.beta_w * t)

    def _eval(self, t, th, xi):
        base = t ** (self.alpha - 1.0) * np.exp(-self.eta(th) * t)
        return base * (1.0 + self.w(t) * np.cos(xi - th)) / TWO_PI

    def fourier_coeff(self, t, theta_h, n: int):
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise DomainError("kernel lag must be > 0")
        th = np.asarray(theta_h, dtype=float)
        base = t ** (self.alpha - 1.0) * np.exp(-self.eta(th) * t) / TWO_PI
        if n == 0:
            return base + 0j
        if abs(n) == 1:
            return base * self.w(t) * np.exp(-1j * n * th) / 2.0
        return np.zeros(np.broadcast_shapes(t.shape, th.shape), dtype=complex)

    def laplace_fourier(self, z, theta_h, n: int, continued: bool = False):
        z = np.asarray(z, dtype=complex)
        if not continued:
            self._check_abscissa(z)
        th = np.asarray(theta_h, dtype=float)
        eta = self.eta(th)
        g = math.gamma(self.alpha)
        if n == 0:
            return g / TWO_PI * (eta + z) ** (-self.alpha)
        if abs(n) == 1:
            phase = np.exp(-1j * n * th) * g / (2 * TWO_PI)
            if self.w_const is not None:
                return phase * self.w_const * (eta + z) ** (-self.alpha)
            return phase * ((eta + z) ** (-self.alpha) - (eta + z + self.beta_w) ** (-self.alpha))
        return np.zeros(np.broadcast_shapes(z.shape, th.shape), dtype=complex)

    def spatial_integral(self, t, theta_h):
        t = np.asarray(t, dtype=float)
        return t ** (self.alpha - 1.0) * np.exp(-self.eta(theta_h) * t)

    def to_dict(self) -> dict:
        d = {"family": "gamma_cardioid", "alpha": self.alpha, "eta_cos": list(self.eta_cos),
             "beta_w": self.beta_w}
        if self.w_const is not None:
            d["w_const"] = self.w_const
        return d


def _angular_basis(order: int, theta) -> np.ndarray:
    """Real Fourier basis ``1, sin(theta), cos(theta), ..., sin(n theta), cos(n theta)`` on the last axis."""
    theta = np.asarray(theta, dtype=float)
    cols = [np.ones_like(theta)]
    for k in range(1, order + 1):
        cols.append(np.sin(k * theta))
        cols.append(np.cos(k * theta))
    return np.stack(cols, axis=-1)


def _angular_basis_fourier(order: int, n: int) -> np.ndarray:
    """``(1/2pi) int exp(-i n theta) g_b(theta) dtheta`` for every basis function ``g_b``."""
    out = np.zeros(2 * order + 1, dtype=complex)
    if n == 0:
        out[0] = 1.0
    k = abs(n)
    if 1 <= k <= order:
        out[2 * k - 1] = -0.5j * np.sign(n)  # sin
        out[2 * k] = 0.5  # cos
    return out


def _angular_norms(order: int) -> np.ndarray:
    return np.array([TWO_PI] + [math.pi] * (2 * order))


@dataclass(frozen=True, eq=False)
class SemiParametricKernel(Kernel):
    """Laguerre x Fourier x Fourier kernel.

    ``K(t, h, xi) = sum_{j,a,b} coeffs[j, a, b] f_j(t) g_a(h) g_b(xi)`` with
    ``f_j(t) = t^(alpha-1) exp(-t/2) L_j^(alpha)(t)`` and ``g`` the real
    Fourier basis ``1, sin k., cos k.`` up to ``order``.  A separable kernel
    is the special case ``coeffs = time (x) u (x) v``, see :meth:`from_factors`.
    """

    alpha: float
    coeffs: np.ndarray
    gamma_decay: float = 0.25

    def __post_init__(self):
        if not self.alpha > 0.5:
            raise DomainError(f"alpha must be > 1/2, got {self.alpha}")
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 3 or c.shape[1] != c.shape[2] or c.shape[1] % 2 != 1:
            raise ValueError(f"coeffs must have shape (n_t, 2n+1, 2n+1), got {c.shape}")
        if not 0 < self.gamma_decay < 0.5:
            raise DomainError("gamma_decay must lie in (0, 1/2) for the Laguerre basis")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_factors(cls, alpha, time_coeffs, out_sin, out_cos, src_sin, src_cos, **kw) -> "SemiParametricKernel":
        """Separable kernel ``K1(t) K2(h) K3(xi)`` from the five coefficient sequences (index 0..n).

        ``out_*`` weight the output-angle harmonics and ``src_*`` the source-angle
        ones; the sine entry at index 0 is ignored.
        """
        time_coeffs = np.asarray(time_coeffs, dtype=float)
        n = len(time_coeffs) - 1
        for arr in (out_sin, out_cos, src_sin, src_cos):
            if len(arr) != n + 1:
                raise ValueError("all coefficient sequences must have length n + 1")

        def spatial(s, c):
            v = [c[0]]
            for k in range(1, n + 1):
                v += [s[k], c[k]]
            return np.asarray(v, dtype=float)

        u, v = spatial(out_sin, out_cos), spatial(src_sin, src_cos)
        return cls(alpha, np.einsum("j,a,b->jab", time_coeffs, u, v), **kw)

    @property
    def time_order(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def order(self) -> int:
        return (self.coeffs.shape[1] - 1) // 2

    @property
    def fourier_support(self) -> tuple[int, ...]:
        return tuple(range(-self.order, self.order + 1))

    @property
    def abscissa(self) -> float:
        return 0.5

    @property
    def l2_rate(self) -> float:
        return 0.5

    def time_basis(self, t) -> np.ndarray:
        """``f_j(t)`` stacked on the last axis."""
        t = np.asarray(t, dtype=float)
        lag = _laguerre_all(self.time_order, self.alpha, t)
        return np.moveaxis(lag, 0, -1) * (t ** (self.alpha - 1.0) * np.exp(-0.5 * t))[..., None]

    @cached_property
    def M(self) -> float:
        t = np.geomspace(T_MIN, 400.0, 20001)
        absc = np.abs(self.coeffs).sum(axis=(1, 2))
        env = (np.abs(self.time_basis(t)) @ absc) * np.exp(self.gamma_decay * t)
        return float(1.05 * env.max())

    def _eval(self, t, th, xi):
        return np.einsum(
            "...j,...a,...b,jab->...",
            self.time_basis(t),
            _angular_basis(self.order, th),
            _angular_basis(self.order, xi),
            self.coeffs,
            optimize=True,
        )

    def tensor_values(self, t, phi) -> np.ndarray:
        """Values on the product grid ``t x phi x phi``; shape ``(len(t), len(phi), len(phi))``."""
        G = _angular_basis(self.order, phi)
        return np.einsum("ij,ka,lb,jab->ikl", self.time_basis(t), G, G, self.coeffs, optimize=True)

    def _spatial_fourier(self, theta_h, n: int):
        gb = _angular_basis_fourier(self.order, n)
        ga = _angular_basis(self.order, theta_h)
        # (..., j)
        return np.einsum("...a,jab,b->...j", ga, self.coeffs, gb)

    def fourier_coeff(self, t, theta_h, n: int):
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise DomainError("kernel lag must be > 0")
        if abs(n) > self.order:
            return np.zeros(np.broadcast_shapes(t.shape, np.shape(theta_h)), dtype=complex)
        return np.sum(self.time_basis(t) * self._spatial_fourier(theta_h, n), axis=-1)

    def laplace_fourier(self, z, theta_h, n: int, continued: bool = False):
        z = np.asarray(z, dtype=complex)
        if not continued:
            self._check_abscissa(z)
        shape = np.broadcast_shapes(z.shape, np.shape(theta_h))
        if abs(n) > self.order:
            return np.zeros(shape, dtype=complex)
        sf = self._spatial_fourier(theta_h, n)
        lap = np.stack([laguerre_laplace(j, self.alpha, z) for j in range(self.time_order + 1)], axis=-1)
        return np.sum(lap * sf, axis=-1)

    def to_dict(self) -> dict:
        return {"family": "semi_parametric", "alpha": self.alpha, "coeffs": self.coeffs.tolist(),
                "gamma_decay": self.gamma_decay}


@dataclass(frozen=True, eq=False)
class CallableKernel(Kernel):
    """Kernel given by an arbitrary vectorised function; transforms by quadrature."""

    func: Callable
    alpha: float = 1.0
    gamma_decay: float = 1.0
    M: float = 1.0
    fourier_support: tuple[int, ...] | None = None

    @property
    def abscissa(self) -> float:
        return self.gamma_decay

    @property
    def l2_rate(self) -> float:
        return self.gamma_decay

    def _eval(self, t, th, xi):
        return self.func(t, th, xi)


def kernel_eval(kernel: Kernel, t, theta_h, theta_xi):
    return kernel(t, theta_h, theta_xi)


def fourier_coeff(kernel: Kernel, t, theta_h, n: int):
    return kernel.fourier_coeff(t, theta_h, n)


def laplace_fourier(kernel: Kernel, z, theta_h, n: int):
    return kernel.laplace_fourier(z, theta_h, n)


def laplace_roundtrip_residual(kernel: Kernel, theta_h: float, n: int, times=(0.1, 0.5, 1.0, 2.0)) -> float:
    """Max deviation between the Talbot inverse of the transform and the Fourier coefficient."""
    F = lambda z: kernel.laplace_fourier(z, theta_h, n, continued=True)
    return max(abs(talbot_invert(F, t) - complex(kernel.fourier_coeff(t, theta_h, n))) for t in times)


def fourier_roundtrip_residual(kernel: Kernel, t: float, theta_h: float, theta_xi, n_max: int) -> float:
    """Max deviation between the truncated Fourier series and the kernel at ``theta_xi`` points."""
    xi = np.atleast_1d(np.asarray(theta_xi, dtype=float))
    series = sum(kernel.fourier_coeff(t, theta_h, n) * np.exp(1j * n * xi) for n in range(-n_max, n_max + 1))
    return float(np.max(np.abs(series - kernel(t, theta_h, xi))))


def laplace_fourier_quad(kernel: Kernel, z: complex, theta_h: float, n: int) -> complex:
    """Adaptive-quadrature Laplace transform of the n-th Fourier coefficient.

    Uses trapezoid Fourier coefficients (not the kernel's closed form), so it
    is an independent check of :meth:`Kernel.laplace_fourier`.
    """
    z = complex(z)
    if z.real <= -kernel.abscissa:
        raise DomainError("z beyond the Laplace abscissa")
    phi = _trapz_nodes()
    wave = np.exp(-1j * n * phi)

    def coeff(t):
        return np.mean(kernel(t, theta_h, phi) * wave)

    a = kernel.alpha

    def part(t, which):
        v = np.exp(-z * t) * coeff(t)
        return v.real if which == 0 else v.imag

    # beyond t_end the integrand is below exp(-40) relative to its scale
    t_end = 1.0 + 40.0 / (kernel.abscissa + z.real)
    out = []
    for which in (0, 1):
        # the t^(alpha-1) singularity is carried by the algebraic weight on [0, 1]
        head, _ = integrate.quad(lambda t: part(max(t, 1e-300), which) * max(t, 1e-300) ** (1.0 - a), 0.0, 1.0,
                                 weight="alg", wvar=(a - 1.0, 0.0), limit=200,
                                 epsabs=1e-13, epsrel=1e-11)
        tail, _ = integrate.quad(lambda t: part(t, which), 1.0, t_end, limit=400,
                                 epsabs=1e-13, epsrel=1e-11)
        out.append(head + tail)
    return complex(out[0], out[1])


# --- L2 geometry on R+ x circle x circle --------------------------------------------


@dataclass(frozen=True)
class _Grid3:
    t: np.ndarray
    wt: np.ndarray  # weights including the removed t-power and exponential
    phi: np.ndarray
    wphi: float


def _time_rule(power: float, rate: float, n: int = N_TIME_NODES):
    """Nodes/weights for ``int_0^inf g(t) dt`` when ``g ~ t^power exp(-rate t) * smooth``."""
    x, w = special.roots_genlaguerre(n, power)
    # the rule already carries x^power e^{-x}; divide it out for a plain integral in t
    return x / rate, w * np.exp(x - power * np.log(x)) / rate


def _grid(alpha: float, rate: float) -> _Grid3:
    t, wt = _time_rule(2.0 * alpha - 2.0, rate)
    return _Grid3(t, wt, _trapz_nodes(), TWO_PI / N_ANGLE_NODES)


def _eval_on_grid(kernel: Kernel, g: _Grid3) -> np.ndarray:
    if isinstance(kernel, SemiParametricKernel):
        return kernel.tensor_values(g.t, g.phi)
    return kernel(g.t[:, None, None], g.phi[None, :, None], g.phi[None, None, :])


def l2_norm(kernel: Kernel) -> float:
    g = _grid(kernel.alpha, 2.0 * kernel.l2_rate)
    vals = _eval_on_grid(kernel, g)
    return float(math.sqrt(np.einsum("i,ijk->", g.wt, vals ** 2) * g.wphi ** 2))


def l2_kernel_distance(Ka: Kernel, Kb: Kernel) -> float:
    """``L^2(R+ x circle x circle)`` distance by Gauss-Laguerre x trapezoid quadrature."""
    if Ka is Kb:
        return 0.0
    g = _grid(min(Ka.alpha, Kb.alpha), 2.0 * min(Ka.l2_rate, Kb.l2_rate))
    diff = _eval_on_grid(Ka, g) - _eval_on_grid(Kb, g)
    val = np.einsum("i,ijk->", g.wt, diff ** 2) * g.wphi ** 2
    return float(math.sqrt(max(val, 0.0)))


def project_kernel(target: Kernel, order: int, alpha: float | None = None) -> SemiParametricKernel:
    """Orthogonal L2 projection onto the Laguerre x Fourier x Fourier span of the given order.

    The time functions ``t^(alpha-1) exp(-t/2) L_j^(alpha)`` are not mutually
    orthogonal in ``L^2(R+)``, so the time coefficients solve the Gram system
    (computed exactly by generalised Gauss-Laguerre); the angular factors are
    orthogonal and only need normalising.
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    alpha = target.alpha if alpha is None else float(alpha)
    rate = target.l2_rate + 0.5
    t, wt = _time_rule(alpha + target.alpha - 2.0, rate)
    phi = _trapz_nodes()
    wphi = TWO_PI / phi.size

    probe = SemiParametricKernel(alpha, np.zeros((order + 1, 2 * order + 1, 2 * order + 1)))
    F = probe.time_basis(t)  # (nt, J)
    G = _angular_basis(order, phi)  # (nphi, A)
    if isinstance(target, SemiParametricKernel):
        vals = target.tensor_values(t, phi)
    else:
        vals = target(t[:, None, None], phi[None, :, None], phi[None, None, :])
    if not np.all(np.isfinite(vals)):
        raise KernelError("target kernel is not finite on the quadrature grid")
    raw = np.einsum("i,ij,ikl,ka,lb->jab", wt, F, vals, G, G, optimize=True) * wphi ** 2

    tg, wg = _time_rule(2.0 * alpha - 2.0, 1.0)
    Fg = probe.time_basis(tg)
    gram = np.einsum("i,ij,ik->jk", wg, Fg, Fg)
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1e12:
        raise KernelError(f"time Gram matrix ill-conditioned (cond={cond:.3g}) at order {order}")
    norms = _angular_norms(order)
    coeffs = np.linalg.solve(gram, raw.reshape(order + 1, -1)).reshape(raw.shape)
    coeffs = coeffs / norms[None, :, None] / norms[None, None, :]
    return SemiParametricKernel(alpha, coeffs)


def kernel_from_dict(d: dict) -> Kernel:
    d = dict(d)
    fam = d.pop("family", None)
    if fam is None:
        raise KeyError("kernel.family")
    if fam == "gamma_cardioid":
        if "eta_cos" in d:
            d["eta_cos"] = tuple(d["eta_cos"])
        return GammaCardioidKernel(**d)
    if fam == "semi_parametric":
        if "coeffs" in d:
            return SemiParametricKernel(d["alpha"], np.asarray(d["coeffs"], dtype=float),
                                        **({"gamma_decay": d["gamma_decay"]} if "gamma_decay" in d else {}))
        return SemiParametricKernel.from_factors(d["alpha"], d["time_coeffs"], d["out_sin"], d["out_cos"],
                                                 d["src_sin"], d["src_cos"])
    raise DomainError(f"unknown kernel family {fam!r}")


def talbot_invert(F: Callable, t: float, M: int = 32) -> complex:
    """Numerical inverse Laplace transform by the fixed Talbot contour.

    ``F`` may be the transform of a complex-valued function; its real and
    imaginary parts are inverted separately via ``F(conj z)``.
    """
    if not t > 0:
        raise DomainError("t must be > 0")
    r = 2.0 * M / (5.0 * t)
    theta = np.pi * np.arange(1, M) / M
    cot = 1.0 / np.tan(theta)
    s = r * theta * (cot + 1j)
    sig = theta + (theta * cot - 1.0) * cot
    nodes = np.concatenate(([r + 0j], s))
    vals = np.asarray(F(nodes), dtype=complex)
    vals_c = np.conj(np.asarray(F(np.conj(nodes)), dtype=complex))
    out = []
    for G in (0.5 * (vals + vals_c), (vals - vals_c) / 2j):
        head = 0.5 * np.exp(r * t) * G[0].real
        body = np.sum((np.exp(t * s) * G[1:] * (1.0 + 1j * sig)).real)
        out.append(r / M * (head + body))
    return complex(out[0], out[1])
