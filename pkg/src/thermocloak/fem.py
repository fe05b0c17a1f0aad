"""Galerkin assembly, sparse solves, discrete norms and field I/O.

Both grid types share one vocabulary: ``grid.cells`` lists element node
indices, ``grid.interior`` the unknowns left after eliminating homogeneous
Dirichlet nodes.  2D uses bilinear quads (stiffness by 2x2 Gauss points, mass
by the 2x2 vertex rule, i.e. lumped); radial grids use linear elements with the
``|S^{d-1}| r^{d-1}`` weight integrated exactly.  Norms always integrate the
finite element function exactly.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from thermocloak.grids import Grid2D, RadialGrid

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10


class SolverError(RuntimeError):
    """A linear solve failed or missed its residual target."""

    def __init__(self, message, residual=None):
        super().__init__(message if residual is None else f"{message} (relative residual {residual:.3e})")
        self.residual = residual


class AssemblyError(ValueError):
    """Coefficients cannot produce a well-posed operator."""


# Reference bilinear element on [0,1]^2, nodes (0,0), (1,0), (1,1), (0,1).
_CORNERS = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def _q1_reference():
    g = 0.5 * (1.0 + np.array([-1.0, 1.0]) / np.sqrt(3.0))
    kxx = np.zeros((4, 4))
    kyy = np.zeros((4, 4))
    kxy = np.zeros((4, 4))
    mass = np.zeros((4, 4))
    for xi in g:
        for eta in g:
            sx = 2.0 * _CORNERS[:, 0] - 1.0
            sy = 2.0 * _CORNERS[:, 1] - 1.0
            nval = (1 - _CORNERS[:, 0] + sx * xi) * (1 - _CORNERS[:, 1] + sy * eta)
            dx = sx * (1 - _CORNERS[:, 1] + sy * eta)
            dy = sy * (1 - _CORNERS[:, 0] + sx * xi)
            w = 0.25
            kxx += w * np.outer(dx, dx)
            kyy += w * np.outer(dy, dy)
            kxy += w * np.outer(dx, dy)
            mass += w * np.outer(nval, nval)
    return kxx, kyy, kxy, mass


Q1_KXX, Q1_KYY, Q1_KXY, Q1_MASS = _q1_reference()
Q1_LAPLACE = Q1_KXX + Q1_KYY

_GAUSS3 = np.polynomial.legendre.leggauss(3)


def _as_grid_array(grid, values, name):
    values = np.asarray(values)
    if values.shape[0] != grid.num_nodes:
        raise ValueError(f"{name} has {values.shape[0]} entries, grid has {grid.num_nodes} nodes")
    return values


def _coo(grid, local):
    cells = grid.cells
    n = cells.shape[1]
    rows = np.repeat(cells, n, axis=1).ravel()
    cols = np.tile(cells, (1, n)).ravel()
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(grid.num_nodes,) * 2).tocsr()


def _radial_weights(grid):
    r0 = grid.radii[:-1]
    r1 = grid.radii[1:]
    d = grid.dimension
    area = grid.sphere_area
    hlen = r1 - r0
    weight_integral = area * (r1**d - r0**d) / d
    # exact integrals of w*phi_i*phi_j by 3-point Gauss (degree <= 4)
    pts, wts = _GAUSS3
    t = 0.5 * (pts + 1.0)
    r = r0[:, None] + hlen[:, None] * t[None, :]
    w = area * r ** (d - 1) * (0.5 * wts)[None, :] * hlen[:, None]
    phi0 = 1.0 - t
    phi1 = t
    m00 = (w * phi0 * phi0).sum(axis=1)
    m01 = (w * phi0 * phi1).sum(axis=1)
    m11 = (w * phi1 * phi1).sum(axis=1)
    return hlen, weight_integral, np.stack([np.stack([m00, m01], -1), np.stack([m01, m11], -1)], -2)


def check_tensor(tensor):
    """Raise ``AssemblyError`` if any cell tensor has a non-positive eigenvalue."""
    low = np.linalg.eigvalsh(tensor).min(axis=-1)
    bad = np.flatnonzero(~(low > 0))
    if bad.size:
        raise AssemblyError(f"{bad.size} cells with non-positive tensor eigenvalue (first: cell {bad[0]})")


def stiffness_matrix(grid, tensor):
    """Full (all-node) stiffness matrix for ``-div(A grad .)``."""
    tensor = np.asarray(tensor, dtype=float)
    if isinstance(grid, Grid2D):
        a11 = tensor[:, 0, 0, None, None]
        a22 = tensor[:, 1, 1, None, None]
        a12 = tensor[:, 0, 1, None, None]
        local = a11 * Q1_KXX + a22 * Q1_KYY + a12 * (Q1_KXY + Q1_KXY.T)
        return _coo(grid, local)
    hlen, wint, _ = _radial_weights(grid)
    coef = tensor[:, 0, 0] * wint / hlen**2
    local = coef[:, None, None] * np.array([[1.0, -1.0], [-1.0, 1.0]])
    return _coo(grid, local)


def mass_matrix(grid, density=None, lumped=True):
    """Full mass matrix weighted by the cell density (unit density if None)."""
    ncell = grid.num_cells
    rho = np.ones(ncell) if density is None else np.asarray(density, dtype=float)
    if isinstance(grid, Grid2D):
        ref = np.diag(Q1_MASS.sum(axis=1)) if lumped else Q1_MASS
        local = (rho * grid.h**2)[:, None, None] * ref
        return _coo(grid, local)
    _, _, mloc = _radial_weights(grid)
    if lumped:
        rows = mloc.sum(axis=2)
        mloc = np.zeros_like(mloc)
        mloc[:, 0, 0] = rows[:, 0]
        mloc[:, 1, 1] = rows[:, 1]
    return _coo(grid, rho[:, None, None] * mloc)


def restrict(grid, matrix):
    """Drop Dirichlet rows and columns."""
    idx = grid.interior
    return matrix[idx][:, idx].tocsr()


def extend(grid, interior_values):
    """Embed interior unknowns into a full nodal array with zero boundary values."""
    interior_values = np.asarray(interior_values)
    full = np.zeros(grid.num_nodes, dtype=interior_values.dtype)
    full[grid.interior] = interior_values
    return full


def assemble_operator(field, grid, shift=0.0, lumped=True):
    """Interior matrix of ``-div(A grad .) - shift * rho``, Dirichlet nodes eliminated."""
    if field.tensor.shape[0] != grid.num_cells:
        raise ValueError("material field and grid are not conformal")
    check_tensor(field.tensor)
    stiff = stiffness_matrix(grid, field.tensor)
    if shift == 0:
        return restrict(grid, stiff)
    mass = mass_matrix(grid, field.density, lumped=lumped)
    return restrict(grid, stiff - shift * mass)


def load_vector(grid, values, lumped=True):
    """Interior load vector ``int g phi_i`` for a nodal source ``g``."""
    values = _as_grid_array(grid, values, "source")
    return (mass_matrix(grid, lumped=lumped) @ values)[grid.interior]


@dataclass
class SparseSystem:
    matrix: sp.spmatrix
    rhs: np.ndarray

    def __post_init__(self):
        n = self.matrix.shape[0]
        if self.matrix.shape != (n, n) or np.shape(self.rhs) != (n,):
            raise ValueError("matrix must be square and conform with the right-hand side")

    @property
    def dimension(self):
        return self.matrix.shape[0]


def _is_tridiagonal(matrix):
    coo = matrix.tocoo()
    return coo.nnz == 0 or np.max(np.abs(coo.row - coo.col)) <= 1


class Factorization:
    """Reusable direct factorization: banded LU for tridiagonal, SuperLU otherwise."""

    def __init__(self, matrix):
        matrix = sp.csr_matrix(matrix)
        self.matrix = matrix
        self.shape = matrix.shape
        if _is_tridiagonal(matrix):
            n = matrix.shape[0]
            dtype = np.result_type(matrix.dtype, np.float64)
            ab = np.zeros((3, n), dtype=dtype)
            ab[0, 1:] = matrix.diagonal(1)
            ab[1] = matrix.diagonal(0)
            ab[2, :-1] = matrix.diagonal(-1)
            self._banded = ab
            self._lu = None
        else:
            self._banded = None
            try:
                self._lu = spla.splu(matrix.tocsc(), permc_spec="MMD_AT_PLUS_A")
            except RuntimeError as exc:
                raise SolverError(f"sparse LU failed: {exc}") from exc

    def solve(self, rhs):
        rhs = np.asarray(rhs)
        if self._banded is not None:
            try:
                return scipy.linalg.solve_banded((1, 1), self._banded, rhs, check_finite=False)
            except np.linalg.LinAlgError as exc:
                raise SolverError(f"banded LU failed: {exc}") from exc
        if np.iscomplexobj(rhs) and not np.iscomplexobj(self.matrix.data):
            return self._lu.solve(rhs.real) + 1j * self._lu.solve(rhs.imag)
        return self._lu.solve(rhs)


def relative_residual(matrix, x, rhs):
    nb = np.linalg.norm(rhs)
    if nb == 0:
        return float(np.linalg.norm(matrix @ x))
    return float(np.linalg.norm(matrix @ x - rhs) / nb)


def solve_sparse(system, method="auto", rtol=RESIDUAL_TOL):
    """Solve ``system`` and verify the relative residual.

    ``method`` is "auto" (banded LU for tridiagonal systems, sparse LU
    otherwise), "direct" or "krylov" (GMRES with a Jacobi preconditioner).
    One step of iterative refinement is attempted before giving up.
    """
    a = sp.csr_matrix(system.matrix)
    b = np.asarray(system.rhs)
    if not np.any(b):
        return np.zeros(a.shape[0], dtype=np.result_type(a.dtype, b.dtype))
    if method in ("auto", "direct"):
        fact = Factorization(a)
        x = fact.solve(b)
        res = relative_residual(a, x, b)
        if res > rtol:
            x = x + fact.solve(b - a @ x)
            res = relative_residual(a, x, b)
    elif method == "krylov":
        diag = a.diagonal()
        if np.any(diag == 0):
            raise SolverError("Jacobi preconditioner needs a nonzero diagonal")
        precond = spla.LinearOperator(a.shape, matvec=lambda v: v / diag, dtype=np.result_type(a.dtype, b.dtype))
        x, info = spla.gmres(a, b, M=precond, rtol=rtol * 0.1, atol=0.0, restart=200, maxiter=2000)
        res = relative_residual(a, x, b)
        if info != 0 and res > rtol:
            raise SolverError(f"GMRES did not converge (info={info})", res)
    else:
        raise ValueError(f"unknown method {method!r}")
    if not np.all(np.isfinite(x)):
        raise SolverError("non-finite solution")
    if res > rtol:
        raise SolverError("residual target missed", res)
    return x


# ---------------------------------------------------------------------------
# norms


def _region_mask(grid, region):
    if region is None:
        return np.ones(grid.num_cells, dtype=bool)
    mask = region(grid) if callable(region) else np.asarray(region, dtype=bool)
    if mask.shape != (grid.num_cells,):
        raise ValueError("region mask must have one entry per cell")
    if not mask.any():
        raise ValueError("norm requested over an empty region")
    return mask


def outside_ball(radius):
    """Region predicate: cells lying entirely in ``|x| >= radius``."""
    return lambda grid: grid.cells_outside(radius)


def _cell_forms(grid, values, mask):
    values = _as_grid_array(grid, values, "field")
    u = values[grid.cells[mask]]
    if isinstance(grid, Grid2D):
        mass = grid.h**2 * Q1_MASS[None]
        lap = Q1_LAPLACE[None]
    else:
        hlen, wint, mloc = _radial_weights(grid)
        mass = mloc[mask]
        lap = (wint / hlen**2)[mask, None, None] * np.array([[1.0, -1.0], [-1.0, 1.0]])
    uc = np.conj(u)
    l2 = np.einsum("ci,cij,cj->", uc, np.broadcast_to(mass, (u.shape[0],) + mass.shape[1:]), u).real
    grad = np.einsum("ci,cij,cj->", uc, np.broadcast_to(lap, (u.shape[0],) + lap.shape[1:]), u).real
    return max(l2, 0.0), max(grad, 0.0)


def norm_L2(values, grid, region=None):
    l2, _ = _cell_forms(grid, values, _region_mask(grid, region))
    return float(np.sqrt(l2))


def seminorm_H1(values, grid, region=None):
    _, grad = _cell_forms(grid, values, _region_mask(grid, region))
    return float(np.sqrt(grad))


def norm_H1(values, grid, region=None):
    l2, grad = _cell_forms(grid, values, _region_mask(grid, region))
    return float(np.sqrt(l2 + grad))


def exterior_norms(values, grid, radius):
    """``(L2, H1)`` norms over cells outside ``B_radius``."""
    l2, grad = _cell_forms(grid, values, _region_mask(grid, outside_ball(radius)))
    return float(np.sqrt(l2)), float(np.sqrt(l2 + grad))


# ---------------------------------------------------------------------------
# interpolation and CSV


def interpolate(grid, values, points):
    """Evaluate the bilinear (or piecewise linear radial) field at ``points``."""
    values = _as_grid_array(grid, values, "field")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if isinstance(grid, RadialGrid):
        r = np.linalg.norm(points, axis=1)
        return np.interp(r, grid.radii, values.real) + (
            1j * np.interp(r, grid.radii, values.imag) if np.iscomplexobj(values) else 0.0
        )
    s = (points[:, 0] - grid.x0) / grid.h
    t = (points[:, 1] - grid.y0) / grid.h
    ix = np.clip(np.floor(s).astype(int), 0, grid.nx - 1)
    iy = np.clip(np.floor(t).astype(int), 0, grid.ny - 1)
    fs = s - ix
    ft = t - iy
    stride = grid.nx + 1
    base = iy * stride + ix
    return (
        values[base] * (1 - fs) * (1 - ft)
        + values[base + 1] * fs * (1 - ft)
        + values[base + stride + 1] * fs * ft
        + values[base + stride] * (1 - fs) * ft
    )


FIELD_HEADER = ["ix", "iy", "x", "y", "re", "im"]


def write_field_csv(path, grid, values):
    """Write nodal values as ``ix,iy,x,y,re,im`` rows (radial grids: iy = 0, y = 0)."""
    values = np.asarray(_as_grid_array(grid, values, "field"), dtype=complex)
    if isinstance(grid, Grid2D):
        idx = grid.node_indices
        xy = grid.nodes
    else:
        idx = np.column_stack([np.arange(grid.num_nodes), np.zeros(grid.num_nodes, dtype=int)])
        xy = np.column_stack([grid.radii, np.zeros(grid.num_nodes)])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FIELD_HEADER)
        for (i, j), (x, y), v in zip(idx, xy, values):
            w.writerow([int(i), int(j), repr(float(x)), repr(float(y)), repr(float(v.real)), repr(float(v.imag))])


def read_field_csv(path):
    """Return ``(indices, coords, values)`` arrays from a field CSV."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, :2].astype(int), data[:, 2:4], data[:, 4] + 1j * data[:, 5]
