"""Frequency-domain problems ``div(A grad v) + i omega rho v = g`` and the radial exterior solver."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from thermocloak import special
from thermocloak.fem import (
    Factorization,
    SolverError,
    SparseSystem,
    assemble_operator,
    exterior_norms,
    extend,
    load_vector,
    mass_matrix,
    norm_L2,
    solve_sparse,
    stiffness_matrix,
)
from thermocloak.grids import RadialGrid


class IllConditionedError(RuntimeError):
    """The exterior profile under- or overflows for the requested parameters."""


def solve_frequency(field, grid, omega, g, lumped=True):
    """Nodal solution of ``div(A grad v) + i omega rho v = g`` with v = 0 on the boundary.

    Discretely ``(K - i omega M_rho) v = -b`` with ``b`` the load of ``g``.
    """
    if not omega > 0:
        raise ValueError("omega must be positive")
    matrix = assemble_operator(field, grid, shift=1j * omega, lumped=lumped)
    rhs = -load_vector(grid, g, lumped=lumped).astype(complex)
    try:
        v = solve_sparse(SparseSystem(matrix, rhs))
    except SolverError as exc:
        raise SolverError(f"frequency solve failed at omega={omega:g}: {exc}", exc.residual) from exc
    return extend(grid, v)


@dataclass
class FrequencyRecord:
    epsilon: float | None
    omega: float
    errL2: float
    errH1: float
    envelope: float | None
    g_norm: float

    @property
    def bound_factor(self):
        """``e(eps, omega, d) (1 + omega^-1/2) ||g||``; the constant C is fitted separately."""
        if self.envelope is None:
            return None
        return self.envelope * (1.0 + self.omega**-0.5) * self.g_norm


def visibility_frequency(field_cloak, field_homog, grid, omega, g, r_obs=2.0, epsilon=None, homog_solution=None):
    """Exterior norms of ``v_cloak - v_homog`` on ``|x| >= r_obs``.

    ``homog_solution`` may carry a precomputed homogeneous solve on the same grid.
    """
    if field_cloak.num_cells != grid.num_cells or field_homog.num_cells != grid.num_cells:
        raise ValueError("both media must live on the given grid")
    v_c = solve_frequency(field_cloak, grid, omega, g)
    v_h = solve_frequency(field_homog, grid, omega, g) if homog_solution is None else homog_solution
    l2, h1 = exterior_norms(v_c - v_h, grid, r_obs)
    d = grid.dimension
    env = special.rate_frequency(epsilon, omega, d) if epsilon is not None else None
    return FrequencyRecord(epsilon, omega, l2, h1, env, norm_L2(g, grid))


@dataclass
class RadialProfile:
    radii: np.ndarray
    values: np.ndarray
    wavenumber: complex
    dimension: int

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return np.interp(r, self.radii, self.values.real) + 1j * np.interp(r, self.radii, self.values.imag)

    def exact(self, r, boundary_value=None):
        """Closed-form outgoing solution with the same value at r = 1."""
        bv = self.values[0] if boundary_value is None else boundary_value
        return exterior_kernel_solution(self.wavenumber, r, self.dimension, bv)


def exterior_kernel_solution(k, r, dimension, boundary_value=1.0):
    """``bv * K(k r) / K(k)`` for the outgoing kernel K of dimension d."""
    r = np.asarray(r, dtype=float)
    if dimension == 3:
        return boundary_value * np.exp(1j * k * (r - 1.0)) / r
    return boundary_value * special.hankel0_h1(k * r) / special.hankel0_h1(k)


def solve_radial_exterior(omega_scaled, boundary_value, R_max, dimension=3, spacing=2.5e-4, sample_radii=()):
    """Solve ``v'' + (d-1)/r v' + i omega_scaled v = 0`` on ``(1, R_max)``.

    Dirichlet data at r = 1; at ``R_max`` the Robin condition ``v'/v`` equal to
    the log-derivative of the outgoing kernel (exact truncation).  Linear
    elements on a log-uniform mesh with relative spacing ``spacing``; every
    radius in ``sample_radii`` becomes a node.
    """
    if not omega_scaled > 0:
        raise ValueError("omega_scaled must be positive")
    if not R_max > 1:
        raise ValueError("R_max must exceed 1")
    k = complex(special.decay_wavenumber(omega_scaled))
    if k.imag * (R_max - 1.0) > 600.0:
        raise IllConditionedError(
            f"exterior profile decays by exp(-{k.imag * (R_max - 1):.0f}) across (1, R_max); reduce R_max or omega"
        )
    breaks = sorted({1.0, float(R_max), *(float(s) for s in sample_radii if 1.0 < s < R_max)})
    pieces = [np.array([1.0])]
    for a, b in zip(breaks[:-1], breaks[1:]):
        n = max(2, int(math.ceil(math.log(b / a) / math.log1p(spacing))))
        pieces.append(a * (b / a) ** (np.arange(1, n + 1) / n))
    radii = np.concatenate(pieces)
    grid = RadialGrid(radii, dimension)
    ones = np.ones(grid.num_cells)
    tensor = np.ones((grid.num_cells, dimension, dimension))
    system = (stiffness_matrix(grid, tensor) - 1j * omega_scaled * mass_matrix(grid, ones, lumped=False)).tolil()
    lam = complex(special.kernel_log_derivative(k, R_max, dimension))
    system[-1, -1] -= grid.sphere_area * R_max ** (dimension - 1) * lam
    system = system.tocsr()
    if boundary_value == 0:
        return RadialProfile(radii, np.zeros(radii.size, dtype=complex), k, dimension)
    a = system[1:, 1:]
    rhs = -np.asarray(system[1:, 0].todense()).ravel() * boundary_value
    interior = Factorization(a).solve(rhs)
    values = np.concatenate([[boundary_value], interior]).astype(complex)
    if not np.all(np.isfinite(values)):
        raise IllConditionedError("non-finite exterior profile")
    return RadialProfile(radii, values, k, dimension)
