"""Material fields: the cloaked medium, the blown-up medium and their checks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from thermocloak.transform import BlowupMap, push_forward_density, push_forward_tensor

OBJECT, LAYER, EXTERIOR = 0, 1, 2
REGION_NAMES = {OBJECT: "object", LAYER: "cloak layer", EXTERIOR: "exterior"}


class EllipticityError(ValueError):
    """Object coefficients violate the requested ellipticity bound."""


@dataclass(frozen=True, eq=False)
class MaterialField:
    """Per-cell diffusivity tensor, density and region label."""

    tensor: np.ndarray
    density: np.ndarray
    region: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.tensor, dtype=float)
        rho = np.asarray(self.density, dtype=float)
        reg = np.asarray(self.region, dtype=int)
        if t.ndim != 3 or t.shape[1] != t.shape[2] or t.shape[0] != rho.shape[0] or reg.shape != rho.shape:
            raise ValueError("inconsistent material field shapes")
        if not np.allclose(t, np.swapaxes(t, 1, 2), rtol=1e-12, atol=0.0):
            raise ValueError("tensor field is not symmetric")
        if not np.all(np.isfinite(t)):
            raise ValueError("tensor field has non-finite entries")
        if not np.all(rho > 0):
            raise ValueError("density must be positive everywhere")
        for name, val in (("tensor", t), ("density", rho), ("region", reg)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @classmethod
    def homogeneous(cls, grid):
        n = grid.num_cells
        d = grid.sample_points.shape[1]
        return cls(np.broadcast_to(np.eye(d), (n, d, d)).copy(), np.ones(n), np.full(n, EXTERIOR))

    @property
    def num_cells(self):
        return self.density.size

    @property
    def dimension(self):
        return self.tensor.shape[1]


@dataclass(frozen=True)
class ObjectSpec:
    """Contents of the cloaked region B_1.

    ``tensor_fn`` and ``density_fn`` take points ``(..., d)``; plain numbers
    stand for an isotropic multiple of the identity and a constant density.
    """

    tensor_fn: Callable | float = 2.0
    density_fn: Callable | float = 3.0
    ellipticity_bound: float = 10.0

    @classmethod
    def isotropic(cls, conductivity=2.0, density=3.0, bound=None):
        if bound is None:
            bound = max(conductivity, 1.0 / conductivity, 1.0)
        return cls(float(conductivity), float(density), float(bound))

    def tensor(self, points):
        points = np.asarray(points, dtype=float)
        d = points.shape[-1]
        if callable(self.tensor_fn):
            return np.asarray(self.tensor_fn(points), dtype=float)
        return float(self.tensor_fn) * np.broadcast_to(np.eye(d), points.shape[:-1] + (d, d))

    def density(self, points):
        points = np.asarray(points, dtype=float)
        if callable(self.density_fn):
            return np.asarray(self.density_fn(points), dtype=float)
        return np.full(points.shape[:-1], float(self.density_fn))

    def validate(self, points):
        """Raise ``EllipticityError`` if sampled coefficients leave the admissible set."""
        if self.ellipticity_bound < 1:
            raise EllipticityError("ellipticity bound must be >= 1")
        a = self.tensor(points)
        if not np.allclose(a, np.swapaxes(a, -1, -2)):
            raise EllipticityError("object tensor is not symmetric")
        eig = np.linalg.eigvalsh(a)
        lam = self.ellipticity_bound
        if eig.size and (eig.min() < 1.0 / lam * (1 - 1e-12) or eig.max() > lam * (1 + 1e-12)):
            raise EllipticityError(
                f"object eigenvalues in [{eig.min():.4g}, {eig.max():.4g}] outside [1/{lam:g}, {lam:g}]"
            )
        rho = self.density(points)
        if np.any(~(rho > 0)):
            raise EllipticityError("object density must be positive")

    def scaled(self, conductivity_factor=1.0, density_factor=1.0):
        """Copy with coefficients multiplied; the bound is widened to stay admissible."""
        tf = self.tensor_fn
        df = self.density_fn
        new_t = (lambda p: conductivity_factor * self.tensor(p)) if callable(tf) else float(tf) * conductivity_factor
        new_d = (lambda p: density_factor * self.density(p)) if callable(df) else float(df) * density_factor
        bound = self.ellipticity_bound * max(conductivity_factor, 1.0 / conductivity_factor)
        return ObjectSpec(new_t, new_d, bound)


def _require_ball(grid, radius=2.0):
    if not grid.contains_ball(radius):
        raise ValueError(f"grid must contain the closed ball of radius {radius}")


def _check_dimension(mapping, grid):
    d = grid.sample_points.shape[1]
    if mapping.dimension != d:
        raise ValueError(f"map dimension {mapping.dimension} does not match grid dimension {d}")
    return d


def assemble_cloak_medium(mapping: BlowupMap, obj: ObjectSpec, grid) -> MaterialField:
    """(I, 1) outside B_2, the pushed-forward identity medium in B_2 \\ B_1, object in B_1."""
    _require_ball(grid)
    d = _check_dimension(mapping, grid)
    pts = grid.sample_points
    r = np.linalg.norm(pts, axis=1)
    region = np.where(r >= 2.0, EXTERIOR, np.where(r >= 1.0, LAYER, OBJECT))
    tensor = np.broadcast_to(np.eye(d), (pts.shape[0], d, d)).copy()
    density = np.ones(pts.shape[0])

    layer = region == LAYER
    if layer.any():
        tensor[layer] = push_forward_tensor(np.eye(d), mapping)(pts[layer])
        density[layer] = push_forward_density(1.0, mapping)(pts[layer])
    inside = region == OBJECT
    if inside.any():
        obj.validate(pts[inside])
        tensor[inside] = obj.tensor(pts[inside])
        density[inside] = obj.density(pts[inside])
    return MaterialField(tensor, density, region)


def assemble_blownup_medium(mapping: BlowupMap, obj: ObjectSpec, grid) -> MaterialField:
    """(I, 1) outside B_eps and the rescaled object ``(eps^(2-d) a(x/eps), eps^-d rho(x/eps))`` inside."""
    _require_ball(grid)
    d = _check_dimension(mapping, grid)
    eps = mapping.epsilon
    pts = grid.sample_points
    r = np.linalg.norm(pts, axis=1)
    region = np.where(r < eps, OBJECT, EXTERIOR)
    tensor = np.broadcast_to(np.eye(d), (pts.shape[0], d, d)).copy()
    density = np.ones(pts.shape[0])
    inside = region == OBJECT
    if inside.any():
        scaled = pts[inside] / eps
        obj.validate(scaled)
        tensor[inside] = eps ** (2 - d) * obj.tensor(scaled)
        density[inside] = eps ** (-d) * obj.density(scaled)
    return MaterialField(tensor, density, region)


def medium_from_functions(grid, tensor_fn, density_fn):
    """Sample arbitrary coefficient functions at the grid's sample points."""
    pts = grid.sample_points
    d = pts.shape[1]
    tensor = np.broadcast_to(np.asarray(tensor_fn(pts), dtype=float), (pts.shape[0], d, d)).copy()
    density = np.broadcast_to(np.asarray(density_fn(pts), dtype=float), (pts.shape[0],)).copy()
    return MaterialField(tensor, density, np.full(pts.shape[0], EXTERIOR))


@dataclass
class RegionStats:
    min_eig: float
    max_eig: float
    min_density: float
    max_density: float
    cells: int


@dataclass
class EllipticityReport:
    regions: dict
    violations: list

    @property
    def ok(self):
        return not self.violations


def check_ellipticity(field: MaterialField, lower=0.0, upper=np.inf, regions=None) -> EllipticityReport:
    """Per-region eigenvalue and density ranges; flags regions outside ``[lower, upper]``."""
    eig = np.linalg.eigvalsh(field.tensor)
    stats = {}
    violations = []
    for code in np.unique(field.region):
        mask = field.region == code
        name = REGION_NAMES.get(int(code), str(code))
        s = RegionStats(
            float(eig[mask].min()),
            float(eig[mask].max()),
            float(field.density[mask].min()),
            float(field.density[mask].max()),
            int(mask.sum()),
        )
        stats[name] = s
        if regions is not None and name not in regions:
            continue
        if s.min_eig < lower:
            violations.append(f"{name}: min eigenvalue {s.min_eig:.4g} < {lower:.4g}")
        if s.max_eig > upper:
            violations.append(f"{name}: max eigenvalue {s.max_eig:.4g} > {upper:.4g}")
    return EllipticityReport(stats, violations)
