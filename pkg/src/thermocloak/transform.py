"""Blow-up map, generic radial/linear maps and pushforwards of coefficients.

Points are arrays whose last axis is the spatial dimension, so a single point
has shape ``(d,)`` and a batch ``(..., d)``.  Jacobians come back with shape
``(..., d, d)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

DEGENERATE_DET = 1e-14


class DegenerateJacobianError(ValueError):
    """Raised when |det grad F| drops below ``DEGENERATE_DET``."""


def _points(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        raise ValueError("points need a trailing spatial axis")
    return x


def _radius(x):
    return np.linalg.norm(x, axis=-1)


def _radial_jacobian(x, radial_slope, tangential_stretch):
    """Jacobian of ``x -> f(|x|) x/|x|`` given f'(r) and f(r)/r at each point."""
    d = x.shape[-1]
    r = _radius(x)
    safe = np.where(r > 0, r, 1.0)
    xhat = x / safe[..., None]
    proj = xhat[..., :, None] * xhat[..., None, :]
    eye = np.eye(d)
    jac = radial_slope[..., None, None] * proj + tangential_stretch[..., None, None] * (eye - proj)
    # at the origin the radial map is a pure scaling
    at_origin = r == 0
    if np.any(at_origin):
        jac[at_origin] = tangential_stretch[at_origin][..., None, None] * eye
    return jac


@dataclass(frozen=True)
class BlowupMap:
    """Radial map sending B_eps onto B_1 and fixing everything outside B_2.

    On ``eps <= |x| < 2`` the radius is mapped affinely,
    ``f(r) = (2 - 2 eps)/(2 - eps) + r/(2 - eps)``; inside ``B_eps`` the map is
    ``x / eps``.  On the interfaces ``|x| = eps`` and ``|x| = 2`` the outer
    branch is used.
    """

    epsilon: float
    dimension: int = 2

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 0.5:
            raise ValueError(f"epsilon must lie in (0, 1/2], got {self.epsilon}")
        if self.dimension not in (2, 3):
            raise ValueError("dimension must be 2 or 3")

    @property
    def slope(self):
        return 1.0 / (2.0 - self.epsilon)

    def profile(self, r):
        """Image radius f(r) for every branch."""
        r = np.asarray(r, dtype=float)
        eps = self.epsilon
        middle = (2.0 - 2.0 * eps) / (2.0 - eps) + r / (2.0 - eps)
        return np.where(r >= 2.0, r, np.where(r >= eps, middle, r / eps))

    def inverse_profile(self, s):
        s = np.asarray(s, dtype=float)
        eps = self.epsilon
        middle = (2.0 - eps) * s - (2.0 - 2.0 * eps)
        return np.where(s >= 2.0, s, np.where(s >= 1.0, middle, s * eps))

    def forward(self, x):
        x = _points(x)
        r = _radius(x)
        scale = np.where(r > 0, self.profile(r) / np.where(r > 0, r, 1.0), 1.0 / self.epsilon)
        return x * scale[..., None]

    def inverse(self, y):
        y = _points(y)
        s = _radius(y)
        scale = np.where(s > 0, self.inverse_profile(s) / np.where(s > 0, s, 1.0), self.epsilon)
        return y * scale[..., None]

    def jacobian(self, x):
        x = _points(x)
        r = _radius(x)
        eps = self.epsilon
        safe = np.where(r > 0, r, 1.0)
        slope = np.where(r >= 2.0, 1.0, np.where(r >= eps, self.slope, 1.0 / eps))
        stretch = np.where(r > 0, self.profile(r) / safe, 1.0 / eps)
        return _radial_jacobian(x, slope, stretch)

    def region(self, x):
        """0 inside B_eps, 1 in the affine shell, 2 outside B_2 (outer-side rule)."""
        r = _radius(_points(x))
        return np.where(r >= 2.0, 2, np.where(r >= self.epsilon, 1, 0))


class RadialMap:
    """Smooth radial map ``x -> f(|x|) x/|x|`` built from a profile and its derivative.

    The inverse profile is found by Newton iteration unless supplied.
    """

    def __init__(self, profile: Callable, derivative: Callable, inverse_profile: Callable | None = None):
        self._f = profile
        self._df = derivative
        self._finv = inverse_profile

    def _invert(self, s):
        if self._finv is not None:
            return self._finv(s)
        r = np.array(s, dtype=float, copy=True)
        for _ in range(100):
            step = (self._f(r) - s) / self._df(r)
            r -= step
            if np.all(np.abs(step) <= 1e-15 * np.maximum(np.abs(r), 1.0)):
                break
        return r

    def forward(self, x):
        x = _points(x)
        r = _radius(x)
        safe = np.where(r > 0, r, 1.0)
        scale = np.where(r > 0, self._f(safe) / safe, self._df(0.0))
        return x * scale[..., None]

    def inverse(self, y):
        y = _points(y)
        s = _radius(y)
        safe = np.where(s > 0, s, 1.0)
        scale = np.where(s > 0, self._invert(safe) / safe, 1.0 / self._df(0.0))
        return y * scale[..., None]

    def jacobian(self, x):
        x = _points(x)
        r = _radius(x)
        safe = np.where(r > 0, r, 1.0)
        slope = np.asarray(self._df(safe), dtype=float) * np.ones_like(r)
        stretch = np.where(r > 0, self._f(safe) / safe, self._df(0.0))
        return _radial_jacobian(x, slope, stretch)


@dataclass(frozen=True)
class LinearMap:
    """``x -> M x`` for an invertible matrix ``M``."""

    matrix: np.ndarray

    def forward(self, x):
        return _points(x) @ np.asarray(self.matrix).T

    def inverse(self, y):
        return np.linalg.solve(self.matrix, _points(y)[..., None])[..., 0]

    def jacobian(self, x):
        x = _points(x)
        return np.broadcast_to(np.asarray(self.matrix, dtype=float), x.shape[:-1] + (x.shape[-1],) * 2).copy()


def scaling_map(factor, dimension):
    """``x -> factor * x``."""
    return LinearMap(factor * np.eye(dimension))


@dataclass(frozen=True)
class ComposedMap:
    """``outer o inner``."""

    inner: object
    outer: object

    def forward(self, x):
        return self.outer.forward(self.inner.forward(x))

    def inverse(self, y):
        return self.inner.inverse(self.outer.inverse(y))

    def jacobian(self, x):
        return self.outer.jacobian(self.inner.forward(x)) @ self.inner.jacobian(x)


def forward_map(x, m):
    return m.forward(x)


def inverse_map(y, m):
    return m.inverse(y)


def jacobian(x, m):
    return m.jacobian(x)


def finite_difference_jacobian(func, x, step=1e-6):
    """Central-difference Jacobian of ``func`` at ``x`` (test oracle)."""
    x = _points(x)
    d = x.shape[-1]
    cols = []
    for j in range(d):
        e = np.zeros(d)
        e[j] = step
        cols.append((func(x + e) - func(x - e)) / (2.0 * step))
    return np.stack(cols, axis=-1)


def _evaluate(field, x):
    if callable(field):
        return np.asarray(field(x), dtype=float)
    return np.asarray(field, dtype=float)


def _jacobian_at_preimage(mapping, y):
    x = mapping.inverse(y)
    jac = mapping.jacobian(x)
    det = np.abs(np.linalg.det(jac))
    if np.any(det < DEGENERATE_DET):
        raise DegenerateJacobianError(f"|det grad F| = {det.min():.3e} below {DEGENERATE_DET}")
    return x, jac, det


def push_forward_tensor(tensor, mapping):
    """Return ``y -> grad F A grad F^T / |det grad F|`` evaluated at ``x = F^-1(y)``.

    ``tensor`` is either a constant matrix or a callable of points returning
    ``(..., d, d)`` arrays.
    """

    def pushed(y):
        y = _points(y)
        x, jac, det = _jacobian_at_preimage(mapping, y)
        a = np.broadcast_to(_evaluate(tensor, x), jac.shape)
        out = jac @ a @ np.swapaxes(jac, -1, -2) / det[..., None, None]
        return 0.5 * (out + np.swapaxes(out, -1, -2))

    return pushed


def push_forward_density(density, mapping):
    """Return ``y -> rho(x) / |det grad F(x)|`` with ``x = F^-1(y)``."""

    def pushed(y):
        y = _points(y)
        x, _, det = _jacobian_at_preimage(mapping, y)
        return np.broadcast_to(_evaluate(density, x), det.shape) / det

    return pushed
