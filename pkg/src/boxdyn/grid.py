"""Uniform cubical discretization of a rectangular phase space.

A grid subdivides each axis of the phase-space rectangle into 2**depth
equal intervals.  Boxes are addressed by integer multi-indices (tuples),
or equivalently by a single linearized index in C (lexicographic) order.
All intersection predicates treat boxes as closed sets; points that fall
exactly on a shared face belong to the lexicographically smallest box.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PointOutsideDomain


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle, possibly degenerate (lower == upper)."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError(f"invalid rectangle bounds {lo} .. {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dimension(self) -> int:
        return self.lower.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def half_diameter(self) -> float:
        return 0.5 * float(np.linalg.norm(self.upper - self.lower))

    def padded(self, rho: float) -> "Rect":
        """Inflate every side by rho (sup-metric ball)."""
        return Rect(self.lower - rho, self.upper + rho)

    def corners(self) -> np.ndarray:
        """All 2^d corner points, shape (2^d, d)."""
        d = self.dimension
        idx = np.arange(2**d)[:, None]
        bits = (idx >> np.arange(d)[None, :]) & 1
        return np.where(bits == 1, self.upper, self.lower)

    def contains_point(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def intersects(self, other: "Rect") -> bool:
        return bool(
            np.all(self.lower <= other.upper) and np.all(other.lower <= self.upper)
        )


class PhaseSpace:
    """Rectangular phase space X = [lower_0, upper_0] x ... x [lower_{d-1}, upper_{d-1}]."""

    def __init__(self, lower, upper):
        self.lower = np.atleast_1d(np.asarray(lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if self.lower.shape != self.upper.shape:
            raise ValueError("lower/upper dimension mismatch")
        if not np.all(self.lower < self.upper):
            raise ValueError("phase space requires lower[i] < upper[i]")

    @property
    def dimension(self) -> int:
        return self.lower.size

    def as_rect(self) -> Rect:
        return Rect(self.lower, self.upper)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def __eq__(self, other):
        return (
            isinstance(other, PhaseSpace)
            and np.array_equal(self.lower, other.lower)
            and np.array_equal(self.upper, other.upper)
        )

    def __repr__(self):
        parts = "x".join(f"[{a:g},{b:g}]" for a, b in zip(self.lower, self.upper))
        return f"PhaseSpace({parts})"


class CubicalGrid:
    """Dyadic uniform subdivision of a PhaseSpace.

    subdivisions[i] is the dyadic depth along axis i, so the grid has
    2**subdivisions[i] boxes along that axis.  Construction precomputes
    the face coordinates of every axis; all queries reduce to binary
    searches against those arrays, which keeps the closed-box boundary
    semantics bit-for-bit identical between scalar and bulk paths.
    """

    def __init__(self, space: PhaseSpace, subdivisions):
        self.space = space
        self.subdivisions = tuple(int(s) for s in np.atleast_1d(subdivisions))
        if len(self.subdivisions) != space.dimension:
            raise ValueError("one subdivision depth per axis required")
        if any(s < 0 for s in self.subdivisions):
            raise ValueError("subdivision depths must be nonnegative")
        self.shape = tuple(1 << s for s in self.subdivisions)
        self.widths = (space.upper - space.lower) / np.asarray(self.shape, dtype=float)
        # faces[i] has shape (n_i + 1,) with exact domain endpoints
        self.faces = [
            np.linspace(space.lower[i], space.upper[i], self.shape[i] + 1)
            for i in range(space.dimension)
        ]

    @property
    def dimension(self) -> int:
        return self.space.dimension

    @property
    def box_count(self) -> int:
        return int(np.prod(self.shape))

    def diameter(self) -> float:
        """Euclidean diameter of a single box."""
        return float(np.linalg.norm(self.widths))

    def linearize(self, index) -> int:
        return int(np.ravel_multi_index(tuple(index), self.shape))

    def multi_index(self, linear: int):
        return tuple(int(v) for v in np.unravel_index(int(linear), self.shape))

    def box_rect(self, index) -> Rect:
        """Closed realization of a box given by multi-index."""
        index = tuple(index)
        lo = np.array([self.faces[i][index[i]] for i in range(self.dimension)])
        hi = np.array([self.faces[i][index[i] + 1] for i in range(self.dimension)])
        return Rect(lo, hi)

    def box_containing(self, point):
        """Multi-index of the box containing a point of X.

        Points on shared faces resolve to the lexicographically smallest
        index.  Raises PointOutsideDomain for points outside X.
        """
        x = np.atleast_1d(np.asarray(point, dtype=float))
        if x.size != self.dimension or not self.space.contains(x):
            raise PointOutsideDomain(f"point {x} outside {self.space}")
        idx = []
        for i in range(self.dimension):
            # 'left' puts boundary points into the smaller neighbor
            j = int(np.searchsorted(self.faces[i], x[i], side="left")) - 1
            idx.append(min(max(j, 0), self.shape[i] - 1))
        return tuple(idx)

    def index_ranges(self, r: Rect):
        """Inclusive per-axis index range of boxes meeting r, or None.

        Closed-box semantics: a rectangle touching a face intersects the
        boxes on both sides.
        """
        lo, hi = [], []
        for i in range(self.dimension):
            jmin = int(np.searchsorted(self.faces[i], r.lower[i], side="left")) - 1
            jmax = int(np.searchsorted(self.faces[i], r.upper[i], side="right")) - 1
            if jmax < 0 or jmin > self.shape[i] - 1:
                return None
            lo.append(max(jmin, 0))
            hi.append(min(jmax, self.shape[i] - 1))
        return tuple(lo), tuple(hi)

    def index_ranges_bulk(self, rect_lo: np.ndarray, rect_hi: np.ndarray):
        """Vectorized index_ranges for many rectangles.

        rect_lo/rect_hi have shape (n, d).  Returns (jmin, jmax, nonempty)
        with jmin/jmax int32 of shape (n, d) clamped to the grid and a
        boolean mask of rectangles that meet X at all.
        """
        n, d = rect_lo.shape
        jmin = np.empty((n, d), dtype=np.int32)
        jmax = np.empty((n, d), dtype=np.int32)
        nonempty = np.ones(n, dtype=bool)
        for i in range(d):
            lo_raw = np.searchsorted(self.faces[i], rect_lo[:, i], side="left") - 1
            hi_raw = np.searchsorted(self.faces[i], rect_hi[:, i], side="right") - 1
            nonempty &= (hi_raw >= 0) & (lo_raw <= self.shape[i] - 1)
            jmin[:, i] = np.clip(lo_raw, 0, self.shape[i] - 1)
            jmax[:, i] = np.clip(hi_raw, 0, self.shape[i] - 1)
        return jmin, jmax, nonempty

    def boxes_intersecting(self, r: Rect):
        """All boxes whose closed realization meets r, in lex index order."""
        rng = self.index_ranges(r)
        if rng is None:
            return []
        lo, hi = rng
        ranges = [range(lo[i], hi[i] + 1) for i in range(self.dimension)]
        out = []
        for offset in np.ndindex(*[len(rg) for rg in ranges]):
            out.append(tuple(ranges[i][offset[i]] for i in range(self.dimension)))
        return out

    def vertex_coordinates(self) -> np.ndarray:
        """Coordinates of all grid vertices, shape (*(n_i + 1), d)."""
        mesh = np.meshgrid(*self.faces, indexing="ij")
        return np.stack(mesh, axis=-1)

    def __eq__(self, other):
        return (
            isinstance(other, CubicalGrid)
            and self.space == other.space
            and self.subdivisions == other.subdivisions
        )

    def __repr__(self):
        return f"CubicalGrid({self.space!r}, depths={self.subdivisions})"


def grid_diameter(grid: CubicalGrid) -> float:
    return grid.diameter()


def box_containing(grid: CubicalGrid, point):
    return grid.box_containing(point)


def boxes_intersecting(grid: CubicalGrid, r: Rect):
    return grid.boxes_intersecting(r)
