"""Fourier pipeline between time-domain and frequency-domain solutions.

Convention: ``phi_hat(omega) = (2 pi)^-1/2 int phi(t) exp(i omega t) dt``.  For
real fields the inverse is ``u(t) = 2 (2 pi)^-1/2 Re int_0^inf u_hat exp(-i omega t) d omega``.
Integrals against the oscillatory factor use Filon-type weights: the
non-oscillatory factor is interpolated piecewise linearly and the product is
integrated exactly, so large ``omega t`` costs no accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import exp1

from thermocloak.fem import (
    Factorization,
    exterior_norms,
    extend,
    load_vector,
    mass_matrix,
    restrict,
    stiffness_matrix,
)
from thermocloak.heat import TimeSeriesField, VisibilityCurve

SQRT_2PI = math.sqrt(2.0 * math.pi)
_SERIES_THETA = 0.5


def omega_grid(omega_max=256.0, omega_min=1e-5, n=400):
    """``0`` followed by ``n`` geometrically spaced frequencies in ``[omega_min, omega_max]``.

    Transforms of heat-type solutions are smooth in ``log omega``; the
    oscillation in ``t`` is handled exactly by the Filon weights.
    """
    if not (0 < omega_min < omega_max) or n < 2:
        raise ValueError("need 0 < omega_min < omega_max and n >= 2")
    return np.concatenate([[0.0], np.geomspace(omega_min, omega_max, n)])


def _moments(theta):
    """``int_0^1 (1-s) e^{-i theta s} ds`` and ``int_0^1 s e^{-i theta s} ds``."""
    theta = np.asarray(theta, dtype=float)
    small = np.abs(theta) < _SERIES_THETA
    th = np.where(small, 1.0, theta)
    e = np.exp(-1j * th)
    m1 = 1j * e / th + (e - 1.0) / th**2
    m0 = (1.0 - e) / (1j * th) - m1
    if small.any():
        z = -1j * theta[small]
        s0 = np.zeros_like(z)
        s1 = np.zeros_like(z)
        term = np.ones_like(z)
        for n in range(16):
            s0 += term / ((n + 1) * (n + 2))
            s1 += term / (n + 2)
            term = term * z / (n + 1)
        m0[small] = s0
        m1[small] = s1
    return m0, m1


def filon_weights(nodes, t, sign=-1):
    """Weights ``W[k, j]`` with ``sum_j W[k, j] f_j = int f(x) exp(sign i x t_k) dx``.

    ``f`` is the piecewise linear interpolant of its values at ``nodes``.
    """
    nodes = np.asarray(nodes, dtype=float)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if nodes.ndim != 1 or nodes.size < 2 or np.any(np.diff(nodes) <= 0):
        raise ValueError("quadrature nodes must be strictly increasing")
    a = nodes[:-1]
    h = np.diff(nodes)
    theta = t[:, None] * h[None, :]
    m0, m1 = _moments(theta)
    phase = np.exp(-1j * t[:, None] * a[None, :])
    left = h * phase * m0
    right = h * phase * m1
    w = np.zeros((t.size, nodes.size), dtype=complex)
    w[:, :-1] += left
    w[:, 1:] += right
    # hat functions are real, so the e^{+ixt} weights are the conjugates
    return w if sign < 0 else np.conj(w)


@dataclass
class FrequencySamples:
    """Transform samples.

    ``dt``, ``t0`` and ``size`` are set when the samples come from a uniform time
    window (the discrete transform); the round trip back to the window is then exact.
    """

    omegas: np.ndarray
    values: np.ndarray
    dt: float | None = None
    t0: float = 0.0
    size: int | None = None

    @property
    def discrete(self):
        return self.dt is not None


def time_to_frequency(times, values, omegas=None):
    """Forward transform of ``values[k, ...]`` sampled at ``times[k]``; the signal is zero outside.

    Without ``omegas`` the samples must be uniform and the discrete transform
    ``dt (2 pi)^-1/2 sum_n s_n exp(i omega_k t_n)`` is returned on the FFT grid
    ``omega_k = 2 pi k / (N dt)`` (negative frequencies included); it is
    unitary, so Parseval holds to rounding.  Sampling at cell midpoints
    ``t_n = (n + 1/2) dt`` makes it a second-order midpoint rule.  With
    ``omegas`` the piecewise linear interpolant is transformed exactly.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values)
    if times.size == 0 or values.shape[0] == 0:
        raise ValueError("empty signal")
    if values.shape[0] != times.size:
        raise ValueError("one sample per time required")
    if omegas is not None:
        omegas = np.asarray(omegas, dtype=float)
        if times.size < 2:
            raise ValueError("need at least two samples")
        w = filon_weights(times, omegas, sign=+1)
        return FrequencySamples(omegas, np.tensordot(w, values, axes=(1, 0)) / SQRT_2PI)
    n = times.size
    dt = float(times[1] - times[0]) if n > 1 else 1.0
    if n > 1 and not np.allclose(np.diff(times), dt, rtol=1e-9, atol=0.0):
        raise ValueError("the discrete transform needs uniform sampling")
    om = 2.0 * np.pi * np.fft.fftfreq(n, dt)
    phase = np.exp(1j * om * times[0]).reshape((-1,) + (1,) * (values.ndim - 1))
    hat = dt * n * np.fft.ifft(values, axis=0) * phase / SQRT_2PI
    return FrequencySamples(om, hat, dt, float(times[0]), n)


def frequency_to_time(samples, values=None, times=None, tail=True):
    """Inverse transform.

    ``frequency_to_time(samples)`` inverts a discrete transform back onto its
    time window.  ``frequency_to_time(omegas, values, times)`` evaluates
    ``2 (2 pi)^-1/2 Re int_0^inf u_hat exp(-i omega t) d omega`` for a real field
    whose transform is sampled on ``0 = omega_0 < ... < omega_max``; with
    ``tail`` the decay ``c / (-i omega)`` fitted at ``omega_max`` is integrated
    analytically beyond the last sample (for ``t > 0``).
    """
    if isinstance(samples, FrequencySamples):
        if values is not None or times is not None:
            raise ValueError("pass either FrequencySamples alone or omegas, values and times")
        if not samples.discrete:
            raise ValueError("only discrete transforms can be inverted onto their window")
        phase = np.exp(-1j * samples.omegas * samples.t0).reshape((-1,) + (1,) * (samples.values.ndim - 1))
        spec = samples.values * phase * SQRT_2PI / samples.dt
        return np.fft.fft(spec, axis=0) / samples.size
    omegas = np.asarray(samples, dtype=float)
    values = np.asarray(values)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if omegas[0] != 0.0:
        raise ValueError("frequency samples must start at omega = 0")
    w = filon_weights(omegas, times, sign=-1)
    integral = np.tensordot(w, values, axes=(1, 0))
    if tail:
        om = omegas[-1]
        c = values[-1] * (-1j * om)
        pos = times > 0
        e1 = np.zeros(times.shape, dtype=complex)
        e1[pos] = exp1(1j * om * times[pos])
        integral = integral + 1j * e1.reshape((-1,) + (1,) * (values.ndim - 1)) * c[None]
    return 2.0 * np.real(integral) / SQRT_2PI


def frequency_response(field, grid, src, u0, omegas, lumped=True):
    """Transforms ``u_hat(omega)`` of the time-domain solution at each frequency.

    Solves ``(K - i omega M_rho) u_hat = s_hat(omega) G + M_rho u0 / sqrt(2 pi)``.
    """
    omegas = np.asarray(omegas, dtype=float)
    g = load_vector(grid, src.nodal(grid), lumped=lumped)
    if np.any(g):
        transform = getattr(src.envelope, "transform", None)
        if transform is None:
            raise ValueError("source envelope has no closed-form transform")
        s_hat = np.asarray(transform(omegas), dtype=complex)
    else:
        s_hat = np.zeros(omegas.size, dtype=complex)
    stiff = restrict(grid, stiffness_matrix(grid, field.tensor))
    mass = restrict(grid, mass_matrix(grid, field.density, lumped=lumped))
    m_u0 = mass @ np.asarray(u0, dtype=float)[grid.interior] / SQRT_2PI
    out = np.zeros((omegas.size, grid.num_nodes), dtype=complex)
    for k, om in enumerate(omegas):
        rhs = s_hat[k] * g + m_u0
        out[k] = extend(grid, Factorization((stiff - 1j * om * mass).tocsc()).solve(rhs))
    return out


def synthesize_time_solution(field, grid, src, u0, times, omegas=None):
    """Time-domain solution assembled from frequency solves."""
    omegas = omega_grid() if omegas is None else np.asarray(omegas, dtype=float)
    u_hat = frequency_response(field, grid, src, u0, omegas)
    values = frequency_to_time(omegas, u_hat, times)
    return TimeSeriesField(np.asarray(times, dtype=float), values, 1)


@dataclass
class SpectralVisibility:
    curve: VisibilityCurve
    bound_L2: float
    bound_H1: float
    omegas: np.ndarray
    spectrum_L2: np.ndarray
    spectrum_H1: np.ndarray


def visibility_via_frequency_integral(field_cloak, field_homog, grid, src, u0, times, omegas=None, r_obs=2.0):
    """Synthesized visibility curve plus the time-uniform bound ``2 (2 pi)^-1/2 int ||w_hat|| d omega``.

    ``w_hat`` is the difference of the two frequency responses; the bound uses
    the trapezoidal rule on the sampled band only.
    """
    omegas = omega_grid() if omegas is None else np.asarray(omegas, dtype=float)
    diff = frequency_response(field_cloak, grid, src, u0, omegas) - frequency_response(
        field_homog, grid, src, u0, omegas
    )
    spec = np.array([exterior_norms(d, grid, r_obs) for d in diff])
    fields = frequency_to_time(omegas, diff, times)
    norms = np.array([exterior_norms(f, grid, r_obs) for f in fields])
    curve = VisibilityCurve(np.asarray(times, dtype=float), norms[:, 0], norms[:, 1])
    b2 = 2.0 * np.trapezoid(spec[:, 0], omegas) / SQRT_2PI
    b1 = 2.0 * np.trapezoid(spec[:, 1], omegas) / SQRT_2PI
    return SpectralVisibility(curve, float(b2), float(b1), omegas, spec[:, 0], spec[:, 1])
