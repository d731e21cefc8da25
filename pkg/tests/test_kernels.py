import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from ambit_cylinder.geometry import TWO_PI
from ambit_cylinder.kernels import (
    CallableKernel,
    GammaCardioidKernel,
    KernelError,
    SemiParametricKernel,
    T_MIN,
    fourier_roundtrip_residual,
    gamma_kernel,
    kernel_from_dict,
    l2_kernel_distance,
    l2_norm,
    laguerre,
    laguerre_laplace,
    laplace_fourier_quad,
    laplace_roundtrip_residual,
    project_kernel,
    talbot_invert,
)
from ambit_cylinder.levy import DomainError


def semi_order3():
    return SemiParametricKernel.from_factors(
        0.75, [1, 0.4, 0, 0], [0, 0.2, 0, 0.1], [1, 0.3, 0, 0], [0, 0.5, 0, 0.2], [1, 0.5, 0.3, 0.2]
    )


# --- elementary functions -------------------------------------------------------------


def test_gamma_kernel_examples():
    assert gamma_kernel(1.0, 1.0, 1.0) == pytest.approx(math.exp(-1), rel=1e-15)
    assert gamma_kernel(1.0, 0.75, 1.0) == pytest.approx(math.exp(-1), rel=1e-15)
    ref = math.exp(-0.25 * math.log(0.25) - 0.25)
    assert gamma_kernel(0.25, 0.75, 1.0) == pytest.approx(ref, rel=1e-14)
    with pytest.raises(DomainError):
        gamma_kernel(0.0, 0.75, 1.0)


def test_cardioid_examples():
    k = GammaCardioidKernel(alpha=1.0, eta_cos=(1.0,))
    expected = math.exp(math.log(math.exp(-1)) + math.log1p(1 - math.exp(-1)) - math.log(TWO_PI))
    assert k(1.0, 0.4, 0.4) == pytest.approx(expected, rel=1e-14)
    assert k(1.0, 0.4, 0.4) == pytest.approx(0.09556, abs=1e-5)
    # w -> 0 gives the uniform density, w -> 1 the peak 1/pi
    k0 = GammaCardioidKernel(alpha=1.0, eta_cos=(1.0,), w_const=0.0)
    assert np.allclose(k0(1.0, 0.3, np.linspace(0, 6, 7)) * math.e, 1 / TWO_PI, rtol=1e-14)
    k1 = GammaCardioidKernel(alpha=1.0, eta_cos=(1.0,), w_const=1 - 1e-15)
    assert k1(1.0, 2.0, 2.0) * math.e == pytest.approx(1 / math.pi, rel=1e-12)
    with pytest.raises(DomainError):
        k(0.0, 0.1, 0.1)


def test_default_eta_matches_reference_form():
    k = GammaCardioidKernel()
    th = np.linspace(0, TWO_PI, 9)
    assert np.allclose(k.eta(th), 2 - np.cos(math.pi - th), atol=1e-15)


def test_semi_parametric_order_zero_is_basis_function():
    k = SemiParametricKernel.from_factors(0.8, [1], [0], [1], [0], [1])
    t = np.array([0.1, 1.0, 3.0])
    assert np.allclose(k(t, 0.3, 1.2), t ** -0.2 * np.exp(-t / 2), rtol=1e-14)


@given(st.floats(0.01, 10), st.floats(0, 7), st.floats(0, 7), st.floats(-20, 20))
def test_isotropy_under_rotation(t, h, xi, c):
    k = GammaCardioidKernel(alpha=0.75, eta_cos=(1.5,))
    assert k(t, h + c, xi + c) == pytest.approx(k(t, h, xi), rel=1e-12)


def test_laguerre_examples_and_scipy():
    x = np.linspace(0, 12, 25)
    assert np.all(laguerre(0, 0.7, x) == 1)
    assert np.allclose(laguerre(1, 0.7, x), 1.7 - x)
    for k in range(9):
        assert np.allclose(laguerre(k, 0.75, x), special.eval_genlaguerre(k, 0.75, x), rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("a", [-0.25, 0.5, 0.75, 1.0])
def test_laguerre_orthogonality(a):
    x, w = special.roots_genlaguerre(40, a)
    L = np.array([laguerre(k, a, x) for k in range(9)])
    gram = (L * w) @ L.T
    expected = np.diag([math.exp(math.lgamma(k + a + 1) - math.lgamma(k + 1)) for k in range(9)])
    assert np.allclose(gram, expected, atol=1e-8, rtol=0)


def test_laguerre_laplace_against_quadrature():
    a = 0.75
    for k in range(4):
        for z in (0.3, 1.0 + 2.0j):
            f = lambda t, part: (np.exp(-z * t) * t ** (a - 1) * np.exp(-t / 2) * laguerre(k, a, t))
            re, _ = integrate.quad(lambda t: f(t, 0).real, 0, np.inf, limit=300)
            im, _ = integrate.quad(lambda t: f(t, 0).imag, 0, np.inf, limit=300)
            assert laguerre_laplace(k, a, z) == pytest.approx(complex(re, im), abs=1e-7)


# --- transforms -----------------------------------------------------------------------


def test_cardioid_fourier_coefficients():
    k = GammaCardioidKernel(alpha=0.75)
    t, h = 0.7, 1.1
    c0 = k.fourier_coeff(t, h, 0)
    assert c0 == pytest.approx(t ** -0.25 * math.exp(-k.eta(h) * t) / TWO_PI, rel=1e-14)
    for n in (2, -2, 3, 7):
        assert k.fourier_coeff(t, h, n) == 0
    # closed form versus the generic trapezoid fallback
    generic = CallableKernel(lambda t, a, b: k(t, a, b), alpha=0.75, gamma_decay=k.gamma_decay)
    for n in (-1, 0, 1, 2):
        assert generic.fourier_coeff(t, h, n) == pytest.approx(complex(k.fourier_coeff(t, h, n)), abs=1e-14)


@given(st.floats(0.01, 5), st.floats(0, 7), st.integers(-4, 4))
@settings(max_examples=50)
def test_fourier_conjugate_symmetry(t, h, n):
    for k in (GammaCardioidKernel(), semi_order3()):
        assert complex(k.fourier_coeff(t, h, -n)) == pytest.approx(np.conj(k.fourier_coeff(t, h, n)), abs=1e-13)


@pytest.mark.parametrize("z", [0.0, 0.3, -0.5 + 3.0j, 2.0 - 7.0j])
@pytest.mark.parametrize("n", [0, 1, -1])
def test_cardioid_laplace_closed_form_vs_quadrature(z, n):
    k = GammaCardioidKernel(alpha=0.75)
    h = 0.9
    closed = complex(k.laplace_fourier(z, h, n))
    quad = laplace_fourier_quad(k, z, h, n)
    assert closed == pytest.approx(quad, abs=1e-6)
    g = math.gamma(0.75)
    eta = k.eta(h)
    if n == 0:
        assert closed == pytest.approx(g / TWO_PI * (eta + z) ** -0.75, rel=1e-12)
    else:
        ref = np.exp(-1j * n * h) * g / (2 * TWO_PI) * ((eta + z) ** -0.75 - (eta + z + 1.0) ** -0.75)
        assert closed == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("z", [0.1, -0.2 + 1.5j])
@pytest.mark.parametrize("n", [0, 2, -3])
def test_semi_parametric_laplace_vs_quadrature(z, n):
    k = semi_order3()
    assert complex(k.laplace_fourier(z, 0.4, n)) == pytest.approx(laplace_fourier_quad(k, z, 0.4, n), abs=1e-6)


def test_laplace_abscissa_enforced():
    k = GammaCardioidKernel()
    with pytest.raises(DomainError):
        k.laplace_fourier(-1.5, 0.0, 0)


def test_laplace_real_axis_monotone():
    k = GammaCardioidKernel()
    z = np.linspace(-0.9, 5, 30)
    v = k.laplace_fourier(z, 0.3, 0)
    assert np.allclose(v.imag, 0)
    assert np.all(np.diff(v.real) < 0)


def test_talbot_against_mpmath():
    F = lambda s: 1.0 / (s + 1.0) ** 0.75
    for t in (0.1, 0.5, 2.0):
        ref = float(mpmath.invertlaplace(lambda s: 1 / (s + 1) ** mpmath.mpf(0.75), t, method="talbot"))
        assert talbot_invert(F, t).real == pytest.approx(ref, rel=1e-9)
        assert ref == pytest.approx(t ** -0.25 * math.exp(-t) / math.gamma(0.75), rel=1e-12)


@pytest.mark.parametrize("kernel", [GammaCardioidKernel(), GammaCardioidKernel(alpha=1.0), semi_order3()],
                         ids=["cardioid", "cardioid_a1", "semi3"])
def test_round_trips(kernel):
    n_max = max(kernel.fourier_support)
    xi = np.linspace(0, TWO_PI, 41)
    for t in (0.1, 0.5, 1.0, 2.0):
        for h in (0.2, 2.5):
            assert fourier_roundtrip_residual(kernel, t, h, xi, n_max) < 1e-10
    for n in range(n_max + 1):
        for h in (0.2, 2.5):
            assert laplace_roundtrip_residual(kernel, h, n) < 1e-4


@pytest.mark.parametrize("kernel", [GammaCardioidKernel(), GammaCardioidKernel(alpha=0.55, eta_cos=(1.0, 0.5)),
                                    semi_order3()], ids=["cardioid", "cardioid_low", "semi3"])
def test_exponential_certificate(kernel):
    t = np.geomspace(T_MIN, 50, 400)
    phi = np.linspace(0, TWO_PI, 33)
    vals = np.abs(kernel(t[:, None, None], phi[None, :, None], phi[None, None, :]))
    bound = kernel.M * np.exp(-kernel.gamma_decay * t)
    assert np.all(vals <= bound[:, None, None])


@pytest.mark.parametrize("alpha", [0.55, 0.75, 1.0])
def test_square_integrable_closed_form(alpha):
    # eta = 1, w = 1 - e^{-t}: int J^2 dxi = (1 + w^2 / 2) / 2pi, then gamma integrals in t
    k = GammaCardioidKernel(alpha=alpha, eta_cos=(1.0,))
    p = 2 * alpha - 1
    exact = math.gamma(p) * (1.5 * 2.0 ** -p - 3.0 ** -p + 0.5 * 4.0 ** -p)
    assert l2_norm(k) ** 2 == pytest.approx(exact, rel=1e-8)


# --- projection -----------------------------------------------------------------------


def test_projection_of_basis_member():
    a = 0.75
    target = CallableKernel(lambda t, h, xi: t ** (a - 1) * np.exp(-t / 2) + 0 * h * xi,
                            alpha=a, gamma_decay=0.5)
    p = project_kernel(target, 0)
    assert p.coeffs[0, 0, 0] > 0
    assert p.coeffs[0, 0, 0] == pytest.approx(1.0, rel=1e-10)
    p2 = project_kernel(target, 2)
    odd = [1, 3]  # sine slots
    assert np.allclose(p2.coeffs[:, odd, :], 0, atol=1e-12)
    assert np.allclose(p2.coeffs[:, :, odd], 0, atol=1e-12)


def test_projection_of_separable_cardioid_drops_high_harmonics():
    target = GammaCardioidKernel(alpha=0.75, eta_cos=(1.0,), w_const=0.6)
    p = project_kernel(target, 3)
    # slots 3..6 hold harmonics 2 and 3
    assert np.allclose(p.coeffs[:, :, 3:], 0, atol=1e-12)
    assert np.allclose(p.coeffs[:, 3:, :], 0, atol=1e-12)


def test_projection_is_idempotent_on_own_span():
    k = semi_order3()
    p = project_kernel(k, 3)
    assert np.allclose(p.coeffs, k.coeffs, atol=1e-10)
    assert l2_kernel_distance(k, p) < 1e-10


def test_projection_error_decreasing_and_pythagorean():
    target = GammaCardioidKernel()
    norm2 = l2_norm(target) ** 2
    errs = []
    for n in range(7):
        p = project_kernel(target, n)
        e = l2_kernel_distance(target, p)
        # orthogonal projection: ||P K||^2 + ||K - P K||^2 = ||K||^2
        assert l2_norm(p) ** 2 + e ** 2 == pytest.approx(norm2, rel=1e-6)
        errs.append(e)
    assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))


def test_l2_distance_properties():
    k = GammaCardioidKernel()
    assert l2_kernel_distance(k, k) == 0.0
    rng = np.random.default_rng(0)
    ks = [SemiParametricKernel(0.75, rng.normal(size=(3, 5, 5))) for _ in range(3)]
    d = lambda a, b: l2_kernel_distance(a, b)
    assert d(ks[0], ks[2]) <= d(ks[0], ks[1]) + d(ks[1], ks[2]) + 1e-12
    assert d(ks[0], ks[1]) == pytest.approx(d(ks[1], ks[0]), rel=1e-12)


def test_kernel_from_dict_round_trip():
    for k in (GammaCardioidKernel(alpha=0.8, eta_cos=(1.5, 0.5)), semi_order3()):
        k2 = kernel_from_dict(k.to_dict())
        assert k2(0.7, 0.3, 2.0) == pytest.approx(k(0.7, 0.3, 2.0), rel=1e-14)
    with pytest.raises(KeyError):
        kernel_from_dict({"alpha": 0.7})
    with pytest.raises(DomainError):
        kernel_from_dict({"family": "spline"})


def test_parameter_validation():
    with pytest.raises(DomainError):
        GammaCardioidKernel(alpha=0.5)
    with pytest.raises(DomainError):
        GammaCardioidKernel(eta_cos=(1.0, 2.0))
    with pytest.raises(ValueError):
        SemiParametricKernel(0.75, np.zeros((2, 2, 2)))


def test_non_finite_target_raises():
    bad = CallableKernel(lambda t, h, xi: np.full(np.broadcast(t, h, xi).shape, np.nan), alpha=0.75)
    with pytest.raises(KernelError):
        project_kernel(bad, 1)
