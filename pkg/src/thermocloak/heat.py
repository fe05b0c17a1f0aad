"""Time stepping for ``d/dt(rho u) - div(A grad u) = s(t) g(x)`` with u = 0 on the boundary."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from thermocloak.fem import (
    Factorization,
    exterior_norms,
    load_vector,
    mass_matrix,
    restrict,
    check_tensor,
    stiffness_matrix,
    extend,
)
from thermocloak.grids import RadialGrid

SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class TimeGrid:
    t_final: float
    dt: float

    def __post_init__(self):
        if not (self.t_final > 0 and self.dt > 0):
            raise ValueError("t_final and dt must be positive")
        if abs(self.steps * self.dt - self.t_final) > 1e-12:
            raise ValueError(f"dt={self.dt} does not divide t_final={self.t_final}")

    @property
    def steps(self):
        return int(round(self.t_final / self.dt))

    @property
    def times(self):
        return np.arange(self.steps + 1) * self.dt


@dataclass(frozen=True)
class BoxEnvelope:
    """Indicator of ``[0, duration]``; ``inf`` gives a switched-on steady source."""

    duration: float = math.inf

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return ((t >= 0) & (t <= self.duration)).astype(float)

    def transform(self, omega):
        if not math.isfinite(self.duration):
            raise ValueError("a steady source has no Fourier transform")
        omega = np.asarray(omega, dtype=float)
        small = np.abs(omega * self.duration) < 1e-8
        safe = np.where(small, 1.0, omega)
        val = (np.exp(1j * safe * self.duration) - 1.0) / (1j * safe)
        return np.where(small, self.duration + 0.5j * omega * self.duration**2, val) / SQRT_2PI

    @property
    def tag(self):
        return f"box{self.duration:g}"


@dataclass(frozen=True)
class ExpEnvelope:
    """``exp(-rate t)`` for ``t >= 0``."""

    rate: float = 1.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t >= 0, np.exp(-self.rate * np.maximum(t, 0.0)), 0.0)

    def transform(self, omega):
        return 1.0 / (SQRT_2PI * (self.rate - 1j * np.asarray(omega, dtype=float)))

    @property
    def tag(self):
        return f"exp{self.rate:g}"


@dataclass(frozen=True)
class GaussianBump:
    """``exp(-|x - center|^2 / (2 width^2))``; on radial grids a shell at ``|center|``."""

    center: tuple = (3.0, 0.0)
    width: float = 0.3

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        c = np.zeros(points.shape[-1])
        c[: len(self.center)] = self.center[: points.shape[-1]]
        return np.exp(-np.sum((points - c) ** 2, axis=-1) / (2.0 * self.width**2))

    def radial(self, r):
        rc = float(np.linalg.norm(self.center))
        return np.exp(-((np.asarray(r) - rc) ** 2) / (2.0 * self.width**2))


@dataclass(frozen=True)
class SourceSpec:
    """Separable source ``s(t) g(x)``; ``g`` is zeroed on nodes with ``|x| <= exclusion_radius``."""

    profile: Callable = field(default_factory=GaussianBump)
    envelope: Callable = field(default_factory=BoxEnvelope)
    exclusion_radius: float | None = 2.0

    def nodal(self, grid):
        if isinstance(grid, RadialGrid):
            if hasattr(self.profile, "radial"):
                g = np.asarray(self.profile.radial(grid.radii), dtype=float)
            else:
                pts = np.zeros((grid.num_nodes, grid.dimension))
                pts[:, 0] = grid.radii
                g = np.asarray(self.profile(pts), dtype=float)
        else:
            g = np.asarray(self.profile(grid.nodes), dtype=float)
        g = g.copy()
        if self.exclusion_radius is not None:
            g[grid.node_radius <= self.exclusion_radius] = 0.0
        g[grid.boundary_mask] = 0.0
        return g

    @property
    def tag(self):
        return getattr(self.envelope, "tag", "custom")


def zero_source():
    return SourceSpec(lambda p: np.zeros(np.shape(p)[:-1]), BoxEnvelope(), None)


@dataclass
class TimeSeriesField:
    times: np.ndarray
    values: np.ndarray
    stride: int

    def at(self, t):
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9:
            raise KeyError(f"no snapshot stored at t={t}")
        return self.values[i]


SCHEMES = {"implicit-euler": 1.0, "crank-nicolson": 0.5}


def march(field, grid, tg, src, u0, scheme="implicit-euler", lumped=True):
    """Yield ``(step, t, u)`` for step 0..N; ``u`` is the full nodal array."""
    theta = SCHEMES.get(scheme)
    if theta is None:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {sorted(SCHEMES)}")
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (grid.num_nodes,) or not np.all(np.isfinite(u0)):
        raise ValueError("initial data must be a finite nodal array")
    check_tensor(field.tensor)
    stiff = restrict(grid, stiffness_matrix(grid, field.tensor))
    mass = restrict(grid, mass_matrix(grid, field.density, lumped=lumped))
    dt = tg.dt
    lhs = Factorization(mass / dt + theta * stiff)
    explicit = mass / dt - (1.0 - theta) * stiff
    g = load_vector(grid, src.nodal(grid), lumped=lumped)
    u = u0[grid.interior].copy()
    s_prev = float(src.envelope(0.0))
    yield 0, 0.0, extend(grid, u)
    for n in range(1, tg.steps + 1):
        t = n * dt
        s_next = float(src.envelope(t))
        rhs = explicit @ u + (theta * s_next + (1.0 - theta) * s_prev) * g
        u = lhs.solve(rhs)
        s_prev = s_next
        yield n, t, extend(grid, u)


def solve_parabolic(field, grid, tg, src, u0, scheme="implicit-euler", stride=1, lumped=True):
    """Time-march and keep every ``stride``-th snapshot (``stride`` must divide the step count)."""
    if stride < 1 or tg.steps % stride:
        raise ValueError("stride must divide the number of steps")
    times, snaps = [], []
    for n, t, u in march(field, grid, tg, src, u0, scheme, lumped):
        if n % stride == 0:
            times.append(t)
            snaps.append(u)
    return TimeSeriesField(np.asarray(times), np.asarray(snaps), stride)


def stationary_solution(field, grid, src):
    """Solve ``-div(A grad u) = g`` for the spatial profile of ``src``."""
    from thermocloak.fem import SparseSystem, solve_sparse

    stiff = restrict(grid, stiffness_matrix(grid, field.tensor))
    g = load_vector(grid, src.nodal(grid))
    return extend(grid, solve_sparse(SparseSystem(stiff, g)))


@dataclass
class VisibilityCurve:
    times: np.ndarray
    errL2: np.ndarray
    errH1: np.ndarray
    final_difference: np.ndarray | None = None

    @property
    def sup_L2(self):
        return float(np.max(self.errL2))

    @property
    def sup_H1(self):
        return float(np.max(self.errH1))

    def rows(self):
        return list(zip(self.times.tolist(), self.errL2.tolist(), self.errH1.tolist()))


def visibility_time_domain(
    field_cloak, field_homog, grid, tg, src, u0, r_obs=2.0, scheme="implicit-euler", reference=None
):
    """Exterior norms of ``u_cloak - u_homog`` over ``|x| >= r_obs`` at every step.

    ``reference`` may hold the homogeneous run (every step, from ``solve_parabolic``)
    so that sweeps over epsilon march the homogeneous medium only once.
    """
    if field_cloak.num_cells != grid.num_cells or field_homog.num_cells != grid.num_cells:
        raise ValueError("both media must live on the given grid")
    if r_obs < 2.0:
        raise ValueError("observation radius must be at least 2")
    if reference is None:
        homog = march(field_homog, grid, tg, src, u0, scheme)
    else:
        if reference.stride != 1 or reference.times.size != tg.steps + 1:
            raise ValueError("reference run must store every step")
        homog = ((n, t, u) for n, (t, u) in enumerate(zip(reference.times, reference.values)))
    times, l2, h1 = [], [], []
    for (_, t, uc), (_, _, uh) in zip(march(field_cloak, grid, tg, src, u0, scheme), homog):
        a, b = exterior_norms(uc - uh, grid, r_obs)
        times.append(t)
        l2.append(a)
        h1.append(b)
    return VisibilityCurve(np.asarray(times), np.asarray(l2), np.asarray(h1), uc - uh)
