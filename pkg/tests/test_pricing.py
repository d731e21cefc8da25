import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ambit_cylinder.geometry import TWO_PI, AngularSet
from ambit_cylinder.kernels import CallableKernel, GammaCardioidKernel
from ambit_cylinder.levy import CharacteristicQuadruplet, DomainError, EsscherTilt, GaussianSeed, NIGSeed, nig_mean_zero_location
from ambit_cylinder.pricing import (
    ConfigurationError,
    FuturesSpec,
    InversionError,
    PricingModel,
    SpreadSpec,
    bachelier_iv,
    bachelier_price,
    futures_mean_analytic,
    futures_price_mc,
    iv_influence,
    mc_mean,
    option_chain,
    spread_kernel_integrals,
    spread_option_mc,
    spread_payoffs,
    spread_price_mc,
)
from ambit_cylinder.simulate import SimulationGrid, VolatilityFieldSpec

STRIKES = np.linspace(-0.05, 0.05, 11)


def grid(**kw):
    base = dict(dt=0.02, J=100, H=6, M_cells=12, z_range=20.0, dz=0.1, seed=9)
    base.update(kw)
    return SimulationGrid(**base)


def nig_model(**kw):
    nig = NIGSeed(0.5, 0.25, nig_mean_zero_location(0.5, 0.25, 0.25), 0.25)
    return PricingModel(GammaCardioidKernel(), CharacteristicQuadruplet(nig), grid(**kw),
                        VolatilityFieldSpec("exp_ig"))


@pytest.fixture(scope="module")
def payoffs():
    return spread_payoffs(nig_model(), SpreadSpec.peak_offpeak(), 400)


# --- Bachelier ------------------------------------------------------------------------


def test_bachelier_atm():
    v = 0.123
    assert bachelier_iv(v, 0.3, 0.3, 1.0) == pytest.approx(v * math.sqrt(TWO_PI), rel=1e-10)
    assert bachelier_price(0.3, 0.3, 1.0, 0.5) == pytest.approx(0.5 / math.sqrt(TWO_PI), rel=1e-14)


def test_bachelier_round_trip():
    rng = np.random.default_rng(0)
    for _ in range(20):
        F, P = rng.normal(0, 0.2, 2)
        T, s = rng.uniform(0.1, 3.0), rng.uniform(0.01, 1.0)
        p = bachelier_price(F, P, T, s)
        iv = bachelier_iv(p, F, P, T)
        assert bachelier_price(F, P, T, iv) == pytest.approx(p, rel=1e-8, abs=1e-14)


@given(st.floats(0.101, 2.0), st.floats(0.101, 2.0))
def test_bachelier_iv_monotone(p1, p2):
    if p1 == p2:
        return
    lo, hi = sorted((p1, p2))
    assert bachelier_iv(lo, 0.1, 0.0, 1.0) < bachelier_iv(hi, 0.1, 0.0, 1.0)


@pytest.mark.parametrize("price", [0.05, 0.1, -1.0, float("nan")])
def test_bachelier_outside_envelope(price):
    with pytest.raises(InversionError):
        bachelier_iv(price, 0.2, 0.1, 1.0)


def test_iv_influence_centred():
    X = np.random.default_rng(1).normal(0.0, 0.3, 5000)
    iv, psi = iv_influence(X, 0.02, 1.0)
    assert abs(psi.mean()) < 1e-10
    assert iv == pytest.approx(0.3, abs=4 * psi.std() / math.sqrt(X.size))


# --- kernel integrals -----------------------------------------------------------------


def test_spread_kernel_integrals_examples():
    k = GammaCardioidKernel()
    A = AngularSet.from_pairs([(1.0, 2.5)])
    assert spread_kernel_integrals(k, A, A, 0.5, 0.3) == 0.0
    flat = CallableKernel(lambda t, h, xi: np.exp(-t) + 0 * h * xi, alpha=1.0)
    B = AngularSet.from_pairs([(4.0, 5.5)])
    assert spread_kernel_integrals(flat, A, B, 0.5, 0.3) == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(DomainError):
        spread_kernel_integrals(k, A, B, 0.0, 0.3)


def test_spread_kernel_integrals_against_closed_form():
    # int_a^b K dphi for the cardioid with w = 1 - e^{-t}
    k = GammaCardioidKernel(alpha=1.0, eta_cos=(1.0,))
    A, B = AngularSet.from_pairs([(1.0, 2.5)]), AngularSet.from_pairs([(4.0, 5.0)])
    t, xi = 0.4, 0.7
    w = 1 - math.exp(-t)

    def part(a, b):
        # eta is constant, so the h-dependence sits in the cosine only
        return math.exp(-t) * ((b - a) + w * (math.sin(b - xi) - math.sin(a - xi))) / TWO_PI

    assert spread_kernel_integrals(k, A, B, t, xi) == pytest.approx(part(1.0, 2.5) - part(4.0, 5.0), rel=1e-12)


# --- spreads and options --------------------------------------------------------------


def test_spread_identical_sets_zero_pathwise():
    A = AngularSet.from_pairs([(1.0, 3.0)])
    X = spread_payoffs(nig_model(), SpreadSpec(1.0, 2.0, A, A), 20)
    assert np.all(X == 0)


def test_spread_sign_flip():
    spec = SpreadSpec.peak_offpeak()
    swapped = SpreadSpec(1.0, 2.0, spec.H2, spec.H1)
    m = nig_model()
    assert np.array_equal(spread_payoffs(m, swapped, 30), -spread_payoffs(m, spec, 30))


def test_spread_centred_price(payoffs):
    m, se = mc_mean(payoffs)
    assert abs(m) < 3 * se


def test_spread_spec_validation():
    A = AngularSet.from_pairs([(1.0, 3.0)])
    with pytest.raises(ConfigurationError):
        SpreadSpec(2.0, 1.0, A, A.complement())
    with pytest.raises(ConfigurationError):
        SpreadSpec(1.0, 2.0, A, AngularSet())
    with pytest.raises(ConfigurationError):
        spread_price_mc(nig_model(), SpreadSpec(1.0, 2.5, A, A.complement()), 10)


def test_option_strike_sweep_shape(payoffs):
    quotes = option_chain(payoffs, STRIKES, 1.0)
    p = np.array([q.price for q in quotes])
    assert np.all(np.diff(p) <= 0)
    assert np.all(np.diff(p, 2) >= -1e-15)
    for q in quotes:
        assert q.implied_vol > 0 and q.iv_stderr > 0


def test_put_call_parity_pathwise(payoffs):
    for P in STRIKES:
        call, put = np.maximum(payoffs - P, 0), np.maximum(P - payoffs, 0)
        assert np.allclose(call - put, payoffs - P, atol=1e-15)


def test_option_deep_limits(payoffs):
    sd = payoffs.std()
    spread, _ = mc_mean(payoffs)
    deep_in = spread_option_mc(payoffs, strike=-10 * sd)
    assert abs(deep_in.price - (spread + 10 * sd)) < 3 * deep_in.stderr + 1e-12
    deep_out = spread_option_mc(payoffs, strike=10 * sd)
    assert deep_out.price <= 3 * deep_out.stderr


# --- futures --------------------------------------------------------------------------


def test_futures_centred_and_seasonal():
    m = nig_model()
    fs = FuturesSpec(1.0, 2.0, strike=0.1)
    price, se = futures_price_mc(m, fs, 200)
    assert abs(price + 0.1) < 3 * se
    season = lambda t, th: 0.5 + 0.2 * np.cos(th) + 0.1 * t
    base = PricingModel(m.kernel, m.quad, m.grid, m.vol, seasonal=season)
    shifted = futures_price_mc(base, FuturesSpec(1.0, 2.0), 200)[0] - futures_price_mc(m, FuturesSpec(1.0, 2.0), 200)[0]
    # the cosine averages out over the six output angles; the time mean of 0.1 t on [1, 2] is 0.15
    assert shifted == pytest.approx(0.65, abs=1e-12)


def test_futures_window_outside_grid():
    with pytest.raises(ConfigurationError):
        futures_price_mc(nig_model(J=60), FuturesSpec(1.0, 2.0), 10)
    with pytest.raises(ConfigurationError):
        futures_price_mc(nig_model(), FuturesSpec(1.0, 2.01), 10)


def test_futures_analytic_matches_mc_with_drift():
    k = GammaCardioidKernel(alpha=1.0, eta_cos=(1.0,))
    m = PricingModel(k, CharacteristicQuadruplet(GaussianSeed(0.5, drift=0.4)), grid(dt=0.01, J=200, z_range=100.0, dz=0.25))
    mc, se = futures_price_mc(m, FuturesSpec(1.0, 2.0), 300)
    an = futures_mean_analytic(m, FuturesSpec(1.0, 2.0))
    # field started at 0: 0.4 * (1 - e^{-t}) averaged over [1, 2]
    exact = 0.4 * (1 - (math.exp(-1) - math.exp(-2)))
    assert an == pytest.approx(exact, rel=1e-9)
    assert abs(mc - an) < 3 * se + 0.01 * an


def test_tilt_requires_constant_volatility():
    m = nig_model()
    tilted = PricingModel(m.kernel, m.quad, m.grid, m.vol, tilt=EsscherTilt(0.1))
    with pytest.raises(DomainError):
        tilted.simulator()


def test_pricing_is_deterministic():
    spec = SpreadSpec.peak_offpeak()
    a = spread_payoffs(nig_model(), spec, 25)
    b = spread_payoffs(nig_model(), spec, 25)
    assert np.array_equal(a, b)
