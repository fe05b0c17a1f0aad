"""Hankel functions, Helmholtz kernels and the visibility envelopes.

The order-zero Hankel function of the first kind is evaluated from the
ascending series of J0 and Y0 for ``|z| <= 8`` and from Hankel's asymptotic
expansion beyond.  Order one is evaluated the same way; it is needed for the
logarithmic derivative of the 2D outgoing kernel.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate

EULER_GAMMA = 0.57721566490153286061
SERIES_RADIUS = 8.0

_SERIES_TERMS = 64
_ASYMPTOTIC_TERMS = 40


def _as_complex(z):
    z = np.asarray(z, dtype=complex)
    on_cut = (z.imag == 0.0) & (z.real <= 0.0)
    if np.any(on_cut):
        raise ValueError("Hankel function argument on the branch cut (-inf, 0]")
    return z


def _bessel_series(z):
    """J0, Y0, J1, Y1 by their ascending series (principal branch of log)."""
    q = -(z * z) / 4.0
    log_term = np.log(z / 2.0) + EULER_GAMMA

    term0 = np.ones_like(z)  # (-z^2/4)^k / (k!)^2
    term1 = np.ones_like(z)  # (-z^2/4)^k / (k! (k+1)!)
    j0 = term0.copy()
    j1_sum = term1.copy()
    y0_sum = np.zeros_like(z)
    # psi(k+1) + psi(k+2) with psi(n+1) = -gamma + H_n
    harmonic = 0.0
    y1_sum = (2.0 * -EULER_GAMMA + 1.0) * term1
    for k in range(1, _SERIES_TERMS):
        term0 = term0 * q / (k * k)
        term1 = term1 * q / (k * (k + 1))
        harmonic += 1.0 / k
        j0 = j0 + term0
        j1_sum = j1_sum + term1
        y0_sum = y0_sum - harmonic * term0
        psi_sum = 2.0 * (harmonic - EULER_GAMMA) + 1.0 / (k + 1)
        y1_sum = y1_sum + psi_sum * term1
        if np.all(np.abs(term0) * max(harmonic, 1.0) < 1e-17 * np.maximum(np.abs(j0), 1e-300)) and np.all(
            np.abs(term1) < 1e-17 * np.maximum(np.abs(j1_sum), 1e-300)
        ):
            break
    half = z / 2.0
    j1 = half * j1_sum
    y0 = (2.0 / np.pi) * (log_term * j0 + y0_sum)
    y1 = (2.0 / np.pi) * np.log(half) * j1 - 2.0 / (np.pi * z) - half * y1_sum / np.pi
    return j0, y0, j1, y1


def _hankel_asymptotic(z, order):
    """Hankel's expansion, truncated at its smallest term."""
    mu = 4.0 * order * order
    phase = z - order * np.pi / 2.0 - np.pi / 4.0
    total = np.ones_like(z)
    coeff = np.ones_like(z)  # i^k a_k(order) / z^k
    prev = np.full(z.shape, np.inf)
    active = np.ones(z.shape, dtype=bool)
    for k in range(1, _ASYMPTOTIC_TERMS):
        coeff = coeff * 1j * (mu - (2 * k - 1) ** 2) / (k * 8.0 * z)
        size = np.abs(coeff)
        stopping = active & (size >= prev)
        # half the first omitted term: crude converging factor
        total = np.where(stopping, total + 0.5 * coeff, total)
        active &= ~stopping
        total = np.where(active, total + coeff, total)
        prev = np.where(active, size, prev)
        if not np.any(active):
            break
    return np.sqrt(2.0 / (np.pi * z)) * np.exp(1j * phase) * total


def _hankel(z, order, method):
    z = _as_complex(z)
    if method == "series":
        mask = np.ones(z.shape, dtype=bool)
    elif method == "asymptotic":
        mask = np.zeros(z.shape, dtype=bool)
    elif method == "auto":
        mask = np.abs(z) <= SERIES_RADIUS
    else:
        raise ValueError(f"unknown method {method!r}")
    out = np.empty(z.shape, dtype=complex)
    if np.any(mask):
        j0, y0, j1, y1 = _bessel_series(z[mask])
        out[mask] = j0 + 1j * y0 if order == 0 else j1 + 1j * y1
    if np.any(~mask):
        out[~mask] = _hankel_asymptotic(z[~mask], order)
    return out if out.ndim else out[()]


def hankel0_h1(z, method="auto"):
    """Hankel function of the first kind, order zero.

    ``method`` forces one regime ("series" or "asymptotic"); "auto" switches at
    ``|z| = 8``.  Raises ``ValueError`` for arguments on ``(-inf, 0]``.
    """
    return _hankel(z, 0, method)


def hankel1_h1(z, method="auto"):
    """Order-one Hankel function of the first kind; ``d/dz H0 = -H1``."""
    return _hankel(z, 1, method)


def bessel_jy(x):
    """Return ``(J0, Y0, J1, Y1)`` from the ascending series."""
    return _bessel_series(_as_complex(x))


def green3d(k, r):
    """Outgoing 3D Helmholtz kernel ``exp(ikr) / (4 pi r)``."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("green3d requires r > 0")
    out = np.exp(1j * k * r) / (4.0 * np.pi * r)
    return out if out.ndim else out[()]


def green2d(k, r):
    """Outgoing 2D Helmholtz kernel ``(i/4) H0(kr)``."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("green2d requires r > 0")
    return 0.25j * hankel0_h1(k * r)


def decay_wavenumber(omega_scaled):
    """``k = exp(i pi/4) sqrt(omega_scaled)``; Im k > 0 so kernels decay."""
    return np.exp(0.25j * np.pi) * np.sqrt(omega_scaled)


def kernel_log_derivative(k, r, dimension):
    """d/dr log of the outgoing radial kernel at radius ``r``."""
    if dimension == 3:
        return 1j * k - 1.0 / r
    if dimension == 2:
        z = k * r
        return -k * hankel1_h1(z) / hankel0_h1(z)
    raise ValueError("dimension must be 2 or 3")


def rate_frequency(epsilon, omega, dimension):
    """Per-frequency visibility envelope e(eps, omega, d).

    For d = 2 and omega < 1/2 the ratio ``ln(omega) / ln(omega eps)`` is
    returned in absolute value (both logs are negative there).
    """
    _check_epsilon(epsilon)
    if omega <= 0:
        raise ValueError("omega must be positive")
    decay = math.exp(-math.sqrt(omega) / 4.0)
    if dimension == 3:
        return epsilon * decay
    if dimension == 2:
        if omega >= 0.5:
            return decay / abs(math.log(epsilon))
        return abs(math.log(omega) / math.log(omega * epsilon))
    raise ValueError("dimension must be 2 or 3")


def rate_time(epsilon, dimension):
    """Time-domain visibility envelope e(eps, d): eps in 3D, 1/|ln eps| in 2D."""
    _check_epsilon(epsilon)
    if dimension == 3:
        return float(epsilon)
    if dimension == 2:
        return 1.0 / abs(math.log(epsilon))
    raise ValueError("dimension must be 2 or 3")


def integrated_rate(epsilon, dimension):
    """Integral over omega > 0 of ``(1 + omega^-1/2) e(eps, omega, d)``.

    The part beyond omega = 1/2 is integrated in closed form after the
    substitution ``s = sqrt(omega)``; the 2D log branch on (0, 1/2) goes
    through adaptive quadrature in the same variable.
    """
    _check_epsilon(epsilon)
    # 2 * int_a^inf (s + 1) exp(-s/4) ds
    def tail(a):
        return 2.0 * math.exp(-a / 4.0) * (4.0 * a + 20.0)

    if dimension == 3:
        return epsilon * tail(0.0)
    if dimension != 2:
        raise ValueError("dimension must be 2 or 3")
    split = math.sqrt(0.5)

    def low(s):
        if s == 0.0:
            return 2.0
        w = s * s
        return 2.0 * (s + 1.0) * abs(math.log(w) / math.log(w * epsilon))

    value, err = integrate.quad(low, 0.0, split, epsabs=1e-13, epsrel=1e-11, limit=200)
    if not np.isfinite(value) or err > 1e-8 * max(abs(value), 1.0):
        raise RuntimeError(f"quadrature did not converge (estimate {value}, error {err})")
    return value + tail(split) / abs(math.log(epsilon))


def _check_epsilon(epsilon):
    if not 0.0 < epsilon < 0.5:
        raise ValueError(f"epsilon must lie in (0, 1/2), got {epsilon}")
