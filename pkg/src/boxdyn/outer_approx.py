"""Combinatorial outer approximation of an oracle on a cubical grid.

build_boxmap inflates each box's image enclosure by rho (sup metric, so
rectangles stay rectangles) and records every grid box the result meets.
Because enclosures are rectangles, the target set of a box is always a
contiguous block of indices; the adjacency is stored as per-box index
ranges, which keeps multi-million-box maps in memory.  Boxes whose
inflated enclosure misses the phase space entirely are flagged exterior
and get an empty target list: escape is data, not failure.
"""

from __future__ import annotations

import numpy as np

from .errors import GridMismatch
from .grid import CubicalGrid
from .oracles import MapOracle


class BoxMap:
    """Directed graph on top-dimensional grid boxes.

    Two storage forms: 'rect' keeps per-box inclusive target index ranges
    (jmin/jmax, shape (n, d)); 'explicit' keeps a target array per box
    (produced by restrict_to).  Exterior boxes have empty targets.
    """

    def __init__(self, grid: CubicalGrid, rho: float, *, jmin=None, jmax=None,
                 exterior=None, explicit=None, members=None):
        self.grid = grid
        self.rho = float(rho)
        self.jmin = jmin
        self.jmax = jmax
        if exterior is None:
            exterior = np.zeros(grid.box_count, dtype=bool)
        self.exterior = exterior
        self._explicit = explicit  # dict: linear index -> sorted int64 array
        self._members = members  # restricted domain (sorted array) or None

    @property
    def is_rect_form(self) -> bool:
        return self._explicit is None

    @property
    def n_boxes(self) -> int:
        return self.grid.box_count

    def box_indices(self) -> np.ndarray:
        """Linearized indices of boxes in the map's domain."""
        if self._members is not None:
            return self._members
        return np.arange(self.n_boxes, dtype=np.int64)

    def target_ranges(self, linear: int):
        """Inclusive (jmin, jmax) index ranges, or None if empty/explicit."""
        if not self.is_rect_form or self.exterior[linear]:
            return None
        return self.jmin[linear], self.jmax[linear]

    def targets(self, linear: int) -> np.ndarray:
        """Sorted linearized target indices of a box."""
        linear = int(linear)
        if self._explicit is not None:
            return self._explicit.get(linear, np.empty(0, dtype=np.int64))
        if self.exterior[linear]:
            return np.empty(0, dtype=np.int64)
        lo = self.jmin[linear]
        hi = self.jmax[linear]
        grids = np.meshgrid(
            *[np.arange(lo[i], hi[i] + 1) for i in range(self.grid.dimension)],
            indexing="ij",
        )
        return np.ravel_multi_index([g.ravel() for g in grids], self.grid.shape)

    def out_degrees(self) -> np.ndarray:
        if self._explicit is not None:
            deg = np.zeros(self.n_boxes, dtype=np.int64)
            for b, t in self._explicit.items():
                deg[b] = t.size
            return deg
        deg = np.prod(self.jmax.astype(np.int64) - self.jmin + 1, axis=1)
        deg[self.exterior] = 0
        return deg

    def total_edges(self) -> int:
        return int(self.out_degrees().sum())

    def edges(self):
        """Iterate (source, target) pairs of linearized indices."""
        for b in self.box_indices():
            for t in self.targets(int(b)):
                yield int(b), int(t)

    def export_edge_list(self, path):
        with open(path, "w") as fh:
            for s, t in self.edges():
                fh.write(f"{s} {t}\n")


def build_boxmap(grid: CubicalGrid, oracle: MapOracle, rho: float) -> BoxMap:
    """rho-inflated combinatorial outer approximation of the oracle."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    if oracle.dimension != grid.dimension:
        raise GridMismatch(
            f"oracle dimension {oracle.dimension} != grid dimension {grid.dimension}"
        )
    lo, hi = oracle.image_rects(grid)
    jmin, jmax, nonempty = grid.index_ranges_bulk(lo - rho, hi + rho)
    return BoxMap(grid, rho, jmin=jmin, jmax=jmax, exterior=~nonempty)


def encloses(a: BoxMap, b: BoxMap) -> bool:
    """True iff every target set of b is contained in a's."""
    if a.grid != b.grid:
        raise GridMismatch("box maps live on different grids")
    if a.is_rect_form and b.is_rect_form:
        ok = b.exterior | (
            np.all(a.jmin <= b.jmin, axis=1)
            & np.all(a.jmax >= b.jmax, axis=1)
            & ~a.exterior
        )
        return bool(ok.all())
    for box in b.box_indices():
        tb = b.targets(int(box))
        if tb.size and not np.all(np.isin(tb, a.targets(int(box)))):
            return False
    return True


def restrict_to(boxmap: BoxMap, boxes) -> BoxMap:
    """Subgraph induced on a box set; targets outside the set are dropped."""
    members = np.unique(np.asarray(list(boxes), dtype=np.int64))
    mask = np.zeros(boxmap.n_boxes, dtype=bool)
    mask[members] = True
    explicit = {}
    for b in members:
        t = boxmap.targets(int(b))
        explicit[int(b)] = t[mask[t]]
    return BoxMap(
        boxmap.grid,
        boxmap.rho,
        exterior=boxmap.exterior.copy(),
        explicit=explicit,
        members=members,
    )
