import math

import mpmath
import numpy as np
import pytest

from thermocloak.special import (
    EULER_GAMMA,
    bessel_jy,
    green2d,
    green3d,
    hankel0_h1,
    hankel1_h1,
    integrated_rate,
    kernel_log_derivative,
    rate_frequency,
    rate_time,
)


def _mp_hankel(order, z):
    # J + iY cancels badly for large Im z; use the K-function form there
    with mpmath.workdps(40):
        w = mpmath.mpc(z.real, z.imag)
        if z.imag > 0:
            return complex(2 / (mpmath.pi * 1j) * (-1j) ** order * mpmath.besselk(order, -1j * w))
        return complex(mpmath.hankel1(order, w))


def mp_h0(z):
    return _mp_hankel(0, complex(z))


def mp_h1(z):
    return _mp_hankel(1, complex(z))


def test_value_at_one():
    h = hankel0_h1(1.0)
    assert h.real == pytest.approx(0.7651976866, abs=1e-10)
    assert h.imag == pytest.approx(0.0882569642, abs=1e-10)


def test_euler_gamma_constant():
    assert EULER_GAMMA == pytest.approx(float(mpmath.euler), rel=1e-16)


SERIES_PHASES = [0.0, 0.25 * np.pi, -0.25 * np.pi, -0.45 * np.pi, 0.75 * np.pi, 0.95 * np.pi]


@pytest.mark.parametrize("r", [0.05, 0.5, 1.0, 3.0, 6.5, 8.0])
@pytest.mark.parametrize("phase", SERIES_PHASES)
def test_series_regime_against_mpmath(r, phase):
    z = r * np.exp(1j * phase)
    assert abs(hankel0_h1(z) - mp_h0(z)) <= 1e-10 * abs(mp_h0(z))
    assert abs(hankel1_h1(z) - mp_h1(z)) <= 1e-10 * abs(mp_h1(z))


@pytest.mark.parametrize("r", [2.0, 6.5, 8.0])
def test_series_near_imaginary_axis(r):
    # J0 and Y0 grow like exp(|Im z|) while H0 decays: cancellation costs digits
    z = r * np.exp(0.5j * np.pi)
    assert abs(hankel0_h1(z) - mp_h0(z)) <= 1e-9 * abs(mp_h0(z))


@pytest.mark.parametrize("r", [8.5, 12.0, 30.0, 200.0])
@pytest.mark.parametrize("phase", [0.0, 0.25 * np.pi, 0.5 * np.pi, 0.9 * np.pi])
def test_asymptotic_regime_against_mpmath(r, phase):
    z = r * np.exp(1j * phase)
    assert abs(hankel0_h1(z) - mp_h0(z)) <= 1e-8 * abs(mp_h0(z))


@pytest.mark.parametrize("r", [8.5, 12.0, 200.0])
@pytest.mark.parametrize("phase", [-0.3 * np.pi, -0.45 * np.pi])
def test_asymptotic_lower_half_plane(r, phase):
    # the recessive second-kind term switched on across the Stokes line limits the expansion
    z = r * np.exp(1j * phase)
    assert abs(hankel0_h1(z) - mp_h0(z)) <= 5e-8 * abs(mp_h0(z))


def test_regimes_agree_on_crossover_annulus():
    rng = np.random.default_rng(0)
    z = rng.uniform(7, 9, 200) * np.exp(1j * rng.uniform(0.0, 0.95 * np.pi, 200))
    s = hankel0_h1(z, method="series")
    a = hankel0_h1(z, method="asymptotic")
    assert np.max(np.abs(s - a) / np.abs(s)) <= 1e-7


def test_small_argument_limit():
    for z in (1e-6, 1e-8, 1e-10):
        lead = hankel0_h1(z) - (2j / np.pi) * np.log(z / 2)
        assert abs(lead - (1 + 2j * EULER_GAMMA / np.pi)) <= 1e-9


def test_large_argument_leading_term():
    z = 50.0
    h = hankel0_h1(z)
    lead = np.sqrt(2 / (np.pi * z)) * np.exp(1j * (z - np.pi / 4))
    assert abs(h - lead) <= 0.01 * abs(h)
    # the opposite phase shift is a different function entirely
    wrong = np.sqrt(2 / (np.pi * z)) * np.exp(1j * (z + np.pi / 4))
    assert abs(h - wrong) > 0.5 * abs(h)


def test_wronskian():
    x = np.linspace(0.1, 8.0, 200)
    j0, y0, j1, y1 = bessel_jy(x)
    # J0' = -J1, Y0' = -Y1
    w = j0 * (-y1) - (-j1) * y0
    assert np.max(np.abs(w - 2 / (np.pi * x)) / (2 / (np.pi * x))) <= 1e-10


@pytest.mark.parametrize("z", [-1.0, 0.0, -3.0 + 0j])
def test_branch_cut_rejected(z):
    with pytest.raises(ValueError):
        hankel0_h1(z)


def test_green3d():
    assert green3d(0.0, 1.0) == pytest.approx(1 / (4 * np.pi))
    k = np.exp(0.25j * np.pi)
    expected = np.exp(1j * 2 * k) / (8 * np.pi)
    assert abs(green3d(k, 2.0) - expected) <= 1e-14
    r = np.linspace(0.2, 5, 20)
    assert np.allclose(np.abs(green3d(k, r)), np.exp(-k.imag * r) / (4 * np.pi * r), rtol=1e-14)
    with pytest.raises(ValueError):
        green3d(k, 0.0)


def test_green2d_matches_mpmath():
    k = 0.7 * np.exp(0.25j * np.pi)
    assert abs(green2d(k, 1.3) - 0.25j * mp_h0(1.3 * k)) <= 1e-12


@pytest.mark.parametrize("dimension", [2, 3])
def test_kernel_log_derivative(dimension):
    k = 0.4 * np.exp(0.25j * np.pi)
    r = 3.0
    if dimension == 3:
        f = lambda s: mpmath.exp(1j * k * s) / s  # noqa: E731
    else:
        f = lambda s: mpmath.hankel1(0, k * s)  # noqa: E731
    expected = complex(mpmath.diff(f, r) / f(r))
    assert abs(kernel_log_derivative(k, r, dimension) - expected) <= 1e-10


def test_rate_frequency_values():
    assert rate_frequency(0.05, 16.0, 3) == pytest.approx(0.05 * math.exp(-1.0), rel=1e-15)
    assert rate_frequency(0.1, 4.0, 2) == pytest.approx(math.exp(-0.5) / math.log(10.0), rel=1e-15)
    assert rate_frequency(0.1, 4.0, 2) == pytest.approx(0.263413, abs=1e-6)
    assert rate_frequency(0.01, 0.25, 2) == pytest.approx(0.23138, abs=1e-5)


def test_rate_frequency_branch_point():
    below = rate_frequency(0.1, np.nextafter(0.5, 0), 2)
    at = rate_frequency(0.1, 0.5, 2)
    assert 0 < below < np.inf and 0 < at < np.inf


def test_rate_time_values():
    assert rate_time(0.05, 3) == 0.05
    assert rate_time(math.exp(-2.0), 2) == pytest.approx(0.5)
    assert rate_time(0.01, 2) == pytest.approx(0.21715, abs=1e-5)
    with pytest.raises(ValueError):
        rate_time(0.5, 2)


def test_integrated_rate_3d_closed_form():
    # s = sqrt(omega): eps * int_0^inf (2 s + 2) exp(-s/4) ds = eps * (2*16 + 2*4)
    for eps in (0.3, 0.05, 0.001):
        assert integrated_rate(eps, 3) == pytest.approx(40.0 * eps, rel=1e-8)


def test_integrated_rate_2d_against_mpmath():
    eps = 0.01

    def integrand(w):
        return (1 + w**-0.5) * (
            abs(mpmath.log(w) / mpmath.log(w * eps)) if w < 0.5 else mpmath.exp(-mpmath.sqrt(w) / 4) / abs(math.log(eps))
        )

    ref = float(mpmath.quad(integrand, [0, 0.5, 10, mpmath.inf]))
    assert integrated_rate(eps, 2) == pytest.approx(ref, rel=1e-8)


def test_integrated_rate_2d_tracks_time_envelope():
    ratios = [integrated_rate(e, 2) / rate_time(e, 2) for e in (0.1, 0.01, 0.001)]
    assert max(ratios) / min(ratios) < 1.1


def test_integrated_rate_shrinks_with_eps_3d():
    vals = [integrated_rate(e, 3) for e in (0.4, 0.1, 0.01, 0.001)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
