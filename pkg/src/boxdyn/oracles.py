"""Sources of rigorous image enclosures for an evaluable map G.

Every oracle can evaluate G at points, enclose the image of a closed
rectangle in a rectangle guaranteed to contain it, and report an explicit
upper bound on the Lipschitz constant of G.  The default enclosure is the
hull of the corner images padded by L * (half box diameter): every point
of the box is within half a diameter of some corner, so the padded hull
covers the true image.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod

import numpy as np
from scipy.spatial import cKDTree

from .errors import DimensionMismatch, PointOutsideDomain
from .grid import CubicalGrid, PhaseSpace, Rect


class MapOracle(ABC):
    """Evaluable map with rectangle image enclosures and a Lipschitz bound."""

    #: optional phase space; when set, eval() rejects points outside it
    domain: PhaseSpace | None = None

    @property
    @abstractmethod
    def dimension(self) -> int: ...

    @abstractmethod
    def lipschitz_upper_bound(self) -> float: ...

    @abstractmethod
    def _eval(self, x: np.ndarray) -> np.ndarray: ...

    def eval(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.size != self.dimension:
            raise DimensionMismatch(
                f"point has dimension {x.size}, oracle expects {self.dimension}"
            )
        if self.domain is not None and not self.domain.contains(x):
            raise PointOutsideDomain(f"point {x} outside {self.domain}")
        return self._eval(x)

    def eval_batch(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at many points, shape (n, d) -> (n, d). Default: a loop."""
        return np.array([self._eval(p) for p in np.asarray(points, dtype=float)])

    def image_rect(self, box: Rect) -> Rect:
        """Rectangle containing the image of the closed box."""
        imgs = self.eval_batch(box.corners())
        pad = self.lipschitz_upper_bound() * box.half_diameter
        return Rect(imgs.min(axis=0) - pad, imgs.max(axis=0) + pad)

    def image_rects(self, grid: CubicalGrid):
        """Image enclosures of every grid box; returns (lo, hi), shape (n, d).

        Boxes are ordered by linearized index.  Subclasses override this
        with vectorized variants; the default loops over image_rect.
        """
        n = grid.box_count
        lo = np.empty((n, grid.dimension))
        hi = np.empty((n, grid.dimension))
        for k in range(n):
            r = self.image_rect(grid.box_rect(grid.multi_index(k)))
            lo[k] = r.lower
            hi[k] = r.upper
        return lo, hi


def _corner_hull_rects(oracle: MapOracle, grid: CubicalGrid):
    """Vectorized corner-hull enclosures via one pass over the vertex grid."""
    d = grid.dimension
    verts = grid.vertex_coordinates()  # (*(n_i+1), d)
    vals = oracle.eval_batch(verts.reshape(-1, d)).reshape(verts.shape)
    lo = None
    hi = None
    for corner in np.ndindex(*([2] * d)):
        sl = tuple(
            slice(1, None) if b else slice(None, -1) for b in corner
        )
        v = vals[sl]
        lo = v if lo is None else np.minimum(lo, v)
        hi = v if hi is None else np.maximum(hi, v)
    pad = oracle.lipschitz_upper_bound() * 0.5 * grid.diameter()
    return (lo - pad).reshape(-1, d), (hi + pad).reshape(-1, d)


class LeslieOracle(MapOracle):
    """Two-species nonlinear population map.

    f(x) = ((theta1*x1 + theta2*x2) * exp(-0.1*(x1+x2)), 0.7*x1).

    The stored Lipschitz bound 34.0 is a verified upper bound for the
    spectral norm of the Jacobian over [0,90] x [0,70] (the maximum,
    attained at the origin, is about 33.24 for theta = (23.5, 23.5)).
    Box enclosures do not use it: the second coordinate is linear and,
    when theta1 == theta2, the first coordinate depends on the box only
    through s = x1 + x2 via the unimodal g(s) = theta*s*exp(-0.1*s), so
    the exact minimal image rectangle is available in closed form.  For
    theta1 != theta2 a rigorous interval product is used instead.  Any
    Lipschitz-style padding (global or per-box) is strictly wider and
    merges distinct recurrent sets at practical grid depths.
    """

    LIPSCHITZ_BOUND = 34.0

    def __init__(self, theta=(23.5, 23.5), domain: PhaseSpace | None = None):
        self.theta = (float(theta[0]), float(theta[1]))
        self.domain = domain

    @property
    def dimension(self) -> int:
        return 2

    def lipschitz_upper_bound(self) -> float:
        return self.LIPSCHITZ_BOUND

    def _eval(self, x):
        t1, t2 = self.theta
        return np.array(
            [(t1 * x[0] + t2 * x[1]) * math.exp(-0.1 * (x[0] + x[1])), 0.7 * x[0]]
        )

    def eval_batch(self, points):
        p = np.asarray(points, dtype=float)
        t1, t2 = self.theta
        first = (t1 * p[:, 0] + t2 * p[:, 1]) * np.exp(-0.1 * (p[:, 0] + p[:, 1]))
        return np.column_stack([first, 0.7 * p[:, 0]])

    def _first_coord_range(self, lo, hi):
        """Exact (theta1 == theta2) or rigorous interval range of the
        first coordinate over boxes [lo, hi]; lo, hi are (n, 2)."""
        t1, t2 = self.theta
        s_lo = lo[:, 0] + lo[:, 1]
        s_hi = hi[:, 0] + hi[:, 1]
        if t1 == t2:
            # f1 = g(s) = t1*s*exp(-0.1*s), unimodal with peak at s = 10
            g_lo = t1 * s_lo * np.exp(-0.1 * s_lo)
            g_hi = t1 * s_hi * np.exp(-0.1 * s_hi)
            f_lo = np.minimum(g_lo, g_hi)
            f_hi = np.maximum(g_lo, g_hi)
            peak = (s_lo <= 10.0) & (10.0 <= s_hi)
            f_hi = np.where(peak, max(t1 * 10.0 * math.exp(-1.0), 0.0), f_hi)
            f_lo = np.where(peak & (t1 < 0), t1 * 10.0 * math.exp(-1.0), f_lo)
            return f_lo, f_hi
        w_lo = (min(t1, 0.0) * hi[:, 0] + max(t1, 0.0) * lo[:, 0]
                + min(t2, 0.0) * hi[:, 1] + max(t2, 0.0) * lo[:, 1])
        w_hi = (min(t1, 0.0) * lo[:, 0] + max(t1, 0.0) * hi[:, 0]
                + min(t2, 0.0) * lo[:, 1] + max(t2, 0.0) * hi[:, 1])
        e_lo = np.exp(-0.1 * s_hi)
        e_hi = np.exp(-0.1 * s_lo)
        prods = np.stack([w_lo * e_lo, w_lo * e_hi, w_hi * e_lo, w_hi * e_hi])
        return prods.min(axis=0), prods.max(axis=0)

    def image_rect(self, box):
        lo = box.lower.reshape(1, -1)
        hi = box.upper.reshape(1, -1)
        f_lo, f_hi = self._first_coord_range(lo, hi)
        return Rect(
            [float(f_lo[0]), 0.7 * float(lo[0, 0])],
            [float(f_hi[0]), 0.7 * float(hi[0, 0])],
        )

    def image_rects(self, grid):
        d = grid.dimension
        mids = [grid.faces[i] for i in range(d)]
        blo = np.stack(
            np.meshgrid(*[m[:-1] for m in mids], indexing="ij"), axis=-1
        ).reshape(-1, d)
        bhi = np.stack(
            np.meshgrid(*[m[1:] for m in mids], indexing="ij"), axis=-1
        ).reshape(-1, d)
        f_lo, f_hi = self._first_coord_range(blo, bhi)
        return (
            np.column_stack([f_lo, 0.7 * blo[:, 0]]),
            np.column_stack([f_hi, 0.7 * bhi[:, 0]]),
        )


class PiecewiseExample1D(MapOracle):
    """One-dimensional piecewise-linear family.

    f(x) = 0 for x <= 1/2, 2x - 1 on [1/2, (theta+1)/2], theta afterwards.
    Nondecreasing, so box images are computed exactly from the endpoints;
    the Lipschitz constant is 2 (the middle branch).
    """

    def __init__(self, theta: float, domain: PhaseSpace | None = None):
        if theta < 0:
            raise ValueError("theta must be nonnegative")
        self.theta = float(theta)
        self.domain = domain

    @property
    def dimension(self) -> int:
        return 1

    def lipschitz_upper_bound(self) -> float:
        return 2.0

    def _eval(self, x):
        v = float(x[0])
        if v <= 0.5:
            return np.array([0.0])
        if v <= (self.theta + 1.0) / 2.0:
            return np.array([2.0 * v - 1.0])
        return np.array([self.theta])

    def eval_batch(self, points):
        p = np.asarray(points, dtype=float).reshape(-1)
        out = np.clip(2.0 * p - 1.0, 0.0, self.theta)
        return out.reshape(-1, 1)

    def image_rect(self, box):
        # exact: f is continuous and nondecreasing
        return Rect(self._eval(box.lower), self._eval(box.upper))

    def image_rects(self, grid):
        f = grid.faces[0]
        vals = np.clip(2.0 * f - 1.0, 0.0, self.theta)
        return vals[:-1].reshape(-1, 1), vals[1:].reshape(-1, 1)


class MlpOracle(MapOracle):
    """Fully-connected feedforward network with rectified-linear activations.

    layers is a list of (weight, bias) pairs applied in order; ReLU is
    applied between layers but not after the last one.  The Lipschitz
    bound is the product over layers of min(||W||_F, sqrt(||W||_1 *
    ||W||_inf)); ReLU is 1-Lipschitz, so the product bounds the whole
    network.
    """

    def __init__(self, layers, domain: PhaseSpace | None = None):
        self.layers = []
        prev = None
        for k, (w, b) in enumerate(layers):
            w = np.asarray(w, dtype=float)
            b = np.asarray(b, dtype=float).reshape(-1)
            if w.ndim != 2:
                raise DimensionMismatch(f"layer {k}: weight must be a matrix")
            if b.size != w.shape[0]:
                raise DimensionMismatch(
                    f"layer {k}: bias length {b.size} != output size {w.shape[0]}"
                )
            if prev is not None and w.shape[1] != prev:
                raise DimensionMismatch(
                    f"layer {k}: input size {w.shape[1]} != previous output {prev}"
                )
            prev = w.shape[0]
            self.layers.append((w, b))
        if not self.layers:
            raise DimensionMismatch("network needs at least one layer")
        if self.layers[-1][0].shape[0] != self.layers[0][0].shape[1]:
            raise DimensionMismatch("network must map R^d to R^d")
        self.domain = domain

    @property
    def dimension(self) -> int:
        return self.layers[0][0].shape[1]

    @staticmethod
    def _layer_bound(w: np.ndarray) -> float:
        fro = float(np.linalg.norm(w, "fro"))
        n1 = float(np.abs(w).sum(axis=0).max())
        ninf = float(np.abs(w).sum(axis=1).max())
        return min(fro, math.sqrt(n1 * ninf))

    def lipschitz_upper_bound(self) -> float:
        out = 1.0
        for w, _ in self.layers:
            out *= self._layer_bound(w)
        return out

    def _eval(self, x):
        return self.eval_batch(x.reshape(1, -1))[0]

    def eval_batch(self, points):
        a = np.asarray(points, dtype=float)
        for k, (w, b) in enumerate(self.layers):
            a = a @ w.T + b
            if k < len(self.layers) - 1:
                np.maximum(a, 0.0, out=a)
        return a

    def image_rects(self, grid):
        return _corner_hull_rects(self, grid)


class LipschitzDataOracle(MapOracle):
    """Enclosures valid for every L-Lipschitz interpolant of sample pairs.

    For a box with center c and half-diameter r, the nearest sample
    (x*, y*) gives the enclosure y* +/- L * (||c - x*|| + r): any
    L-Lipschitz f with f(x*) = y* maps the box inside it.  Pointwise
    evaluation is undefined (the data does not determine a function).
    """

    def __init__(self, xs, ys, lipschitz: float):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        ys = np.atleast_2d(np.asarray(ys, dtype=float))
        if xs.shape != ys.shape or xs.shape[0] == 0:
            raise DimensionMismatch("samples must be matching nonempty (n, d) arrays")
        if lipschitz < 0:
            raise ValueError("Lipschitz bound must be nonnegative")
        self.xs = xs
        self.ys = ys
        self.L = float(lipschitz)
        self._tree = cKDTree(xs)

    @property
    def dimension(self) -> int:
        return self.xs.shape[1]

    def lipschitz_upper_bound(self) -> float:
        return self.L

    def _eval(self, x):
        raise NotImplementedError(
            "a data oracle has no pointwise evaluation; use image_rect"
        )

    def image_rect(self, box):
        c = box.center
        dist, i = self._tree.query(c)
        rad = self.L * (float(dist) + box.half_diameter)
        return Rect(self.ys[i] - rad, self.ys[i] + rad)

    def image_rects(self, grid):
        n = grid.box_count
        d = grid.dimension
        mids = [0.5 * (grid.faces[i][:-1] + grid.faces[i][1:]) for i in range(d)]
        centers = np.stack(np.meshgrid(*mids, indexing="ij"), axis=-1).reshape(-1, d)
        dist, idx = self._tree.query(centers)
        rad = (self.L * (dist + 0.5 * grid.diameter()))[:, None]
        y = self.ys[idx]
        return y - rad, y + rad


class CallableOracle(MapOracle):
    """Wrap an arbitrary function with a user-supplied Lipschitz bound."""

    def __init__(self, func, lipschitz: float, dimension: int,
                 domain: PhaseSpace | None = None):
        self._func = func
        self._lip = float(lipschitz)
        self._dim = int(dimension)
        self.domain = domain

    @property
    def dimension(self) -> int:
        return self._dim

    def lipschitz_upper_bound(self) -> float:
        return self._lip

    def _eval(self, x):
        return np.atleast_1d(np.asarray(self._func(x), dtype=float))
