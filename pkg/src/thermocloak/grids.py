"""Structured grids: uniform Cartesian quads in 2D and graded radial meshes."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


@dataclass(frozen=True, eq=False)
class Grid2D:
    """Uniform ``nx`` by ``ny`` cell grid with lower-left corner ``(x0, y0)``.

    Node ``(ix, iy)`` sits at ``(x0 + ix*h, y0 + iy*h)`` and has flat index
    ``iy*(nx + 1) + ix``.
    """

    nx: int
    ny: int
    h: float
    x0: float = 0.0
    y0: float = 0.0
    dimension: int = field(default=2, init=False)

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid needs at least one cell per direction")
        if not self.h > 0:
            raise ValueError("spacing must be positive")

    @classmethod
    def square(cls, half_width=4.0, nx=64):
        """Centered square ``(-half_width, half_width)^2`` with ``nx`` cells per side."""
        return cls(nx, nx, 2.0 * half_width / nx, -half_width, -half_width)

    @classmethod
    def unit_square(cls, n):
        return cls(n, n, 1.0 / n, 0.0, 0.0)

    @property
    def num_nodes(self):
        return (self.nx + 1) * (self.ny + 1)

    @property
    def num_cells(self):
        return self.nx * self.ny

    @property
    def bounds(self):
        return (self.x0, self.x0 + self.nx * self.h, self.y0, self.y0 + self.ny * self.h)

    @cached_property
    def node_indices(self):
        """``(num_nodes, 2)`` integer array of ``(ix, iy)``."""
        iy, ix = np.divmod(np.arange(self.num_nodes), self.nx + 1)
        return np.column_stack([ix, iy])

    @cached_property
    def nodes(self):
        idx = self.node_indices
        return np.column_stack([self.x0 + idx[:, 0] * self.h, self.y0 + idx[:, 1] * self.h])

    @cached_property
    def cells(self):
        """Corner node indices per cell, counter-clockwise from the lower left."""
        cy, cx = np.divmod(np.arange(self.num_cells), self.nx)
        base = cy * (self.nx + 1) + cx
        return np.column_stack([base, base + 1, base + self.nx + 2, base + self.nx + 1])

    @cached_property
    def sample_points(self):
        """Cell centers, where coefficients are sampled."""
        cy, cx = np.divmod(np.arange(self.num_cells), self.nx)
        return np.column_stack([self.x0 + (cx + 0.5) * self.h, self.y0 + (cy + 0.5) * self.h])

    @cached_property
    def boundary_mask(self):
        ix, iy = self.node_indices.T
        return (ix == 0) | (ix == self.nx) | (iy == 0) | (iy == self.ny)

    @cached_property
    def interior(self):
        return np.flatnonzero(~self.boundary_mask)

    @cached_property
    def node_radius(self):
        return np.linalg.norm(self.nodes, axis=1)

    def contains_ball(self, radius):
        """True if the closed ball of ``radius`` lies strictly inside the box."""
        xmin, xmax, ymin, ymax = self.bounds
        return xmin < -radius and xmax > radius and ymin < -radius and ymax > radius

    def cells_outside(self, radius):
        """Cells whose four corners all satisfy ``|x| >= radius``."""
        return np.all(self.node_radius[self.cells] >= radius, axis=1)

    def cells_inside(self, radius):
        return np.all(self.node_radius[self.cells] <= radius, axis=1)

    def node_labels(self, inner=1.0, outer=2.0):
        """0 for nodes in B_inner, 1 in the shell up to ``outer``, 2 beyond."""
        r = self.node_radius
        return np.where(r >= outer, 2, np.where(r >= inner, 1, 0))


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Nodes ``0 = r_0 < r_1 < ... < r_N`` for radially symmetric problems in ``R^d``.

    The last node carries the Dirichlet condition; the origin is a natural
    (symmetry) boundary.
    """

    radii: np.ndarray
    dimension: int = 3

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        object.__setattr__(self, "radii", r)
        if r.ndim != 1 or r.size < 3:
            raise ValueError("need at least three radii")
        if np.any(np.diff(r) <= 0):
            raise ValueError("radii must be strictly increasing")
        if self.dimension not in (2, 3):
            raise ValueError("dimension must be 2 or 3")

    @classmethod
    def adapted(cls, outer, dimension=3, focus=(), h_max=0.01, growth=1.05, start=0.0):
        """Graded mesh on ``[start, outer]``.

        ``focus`` is a sequence of ``(radius, spacing)`` pairs; the local spacing
        grows geometrically by ``growth`` away from each focus radius and is
        capped at ``h_max``.  Focus radii become nodes.
        """
        if growth <= 1.0:
            raise ValueError("growth must exceed 1")
        focus = [(float(r), float(s)) for r, s in focus if start < r < outer]

        def spacing(r):
            h = h_max
            for rf, sf in focus:
                h = min(h, sf + (growth - 1.0) * abs(r - rf))
            return h

        breaks = sorted({start, outer, *(rf for rf, _ in focus)})
        nodes = [np.array([start])]
        for a, b in zip(breaks[:-1], breaks[1:]):
            raw = [a]
            while raw[-1] < b:
                raw.append(raw[-1] + spacing(raw[-1]))
            raw = np.asarray(raw)
            if len(raw) > 2 and (raw[-1] - b) > 0.5 * (raw[-1] - raw[-2]):
                raw = raw[:-1]
            scaled = a + (raw - a) * (b - a) / (raw[-1] - a)
            nodes.append(scaled[1:])
        return cls(np.concatenate(nodes), dimension)

    @classmethod
    def for_blowup(cls, epsilon, outer=4.0, dimension=3, h_max=0.01, inner_cells=16, growth=1.05, extra=()):
        """Mesh resolving a small inclusion of radius ``epsilon``."""
        grid = cls.adapted(
            outer,
            dimension,
            focus=[(epsilon, epsilon / inner_cells), (2.0, h_max), *extra],
            h_max=h_max,
            growth=growth,
        )
        if np.count_nonzero(grid.radii < epsilon) < 8:
            raise ValueError("fewer than 8 nodes inside B_eps")
        return grid

    @classmethod
    def for_cloak(cls, epsilon, outer=4.0, dimension=3, h_max=0.01, inner_cells=16, growth=1.05, extra=()):
        """Mesh resolving the steep layer just outside ``|y| = 1`` of the cloak."""
        layer = epsilon / (2.0 - epsilon)
        return cls.adapted(
            outer,
            dimension,
            focus=[(1.0, layer / inner_cells), (2.0, h_max), *extra],
            h_max=h_max,
            growth=growth,
        )

    @property
    def outer(self):
        return float(self.radii[-1])

    @property
    def num_nodes(self):
        return self.radii.size

    @property
    def num_cells(self):
        return self.radii.size - 1

    @cached_property
    def nodes(self):
        return self.radii[:, None]

    @cached_property
    def cells(self):
        i = np.arange(self.num_cells)
        return np.column_stack([i, i + 1])

    @cached_property
    def sample_points(self):
        """Element midpoints placed on the first coordinate axis of R^d."""
        mid = 0.5 * (self.radii[:-1] + self.radii[1:])
        pts = np.zeros((mid.size, self.dimension))
        pts[:, 0] = mid
        return pts

    @cached_property
    def boundary_mask(self):
        mask = np.zeros(self.num_nodes, dtype=bool)
        mask[-1] = True
        return mask

    @cached_property
    def interior(self):
        return np.arange(self.num_nodes - 1)

    @property
    def node_radius(self):
        return self.radii

    @property
    def sphere_area(self):
        """Measure of the unit sphere, the weight in front of r^(d-1)."""
        return 2.0 * np.pi if self.dimension == 2 else 4.0 * np.pi

    def contains_ball(self, radius):
        return self.outer > radius

    def cells_outside(self, radius):
        return self.radii[:-1] >= radius

    def cells_inside(self, radius):
        return self.radii[1:] <= radius

    def node_labels(self, inner=1.0, outer=2.0):
        r = self.radii
        return np.where(r >= outer, 2, np.where(r >= inner, 1, 0))

    def node_index(self, radius):
        """Index of the node closest to ``radius``."""
        return int(np.argmin(np.abs(self.radii - radius)))
