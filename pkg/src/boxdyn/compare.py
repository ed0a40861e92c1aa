"""Projection of a fine Morse graph onto a coarse one.

Each coarse node owns a Morse tile: its downset minus the downsets of
all strictly smaller nodes.  A fine node projects to the unique coarse
node whose tile contains its whole region; a region meeting several
tiles (or escaping all of them) is a straddle and leaves the map
partial.  The resulting assignment stands in for the poset epimorphism
onto a Morse representation, with the coarse graph as the surrogate
target; whether coarse recurrence is genuine is not decidable here, so
Conley indices are the only evidence either way.
"""

from __future__ import annotations

import numpy as np

from .errors import GridMismatch, RegionStraddlesTiles
from .graph_dynamics import MorseGraph


def _refinement_shifts(fine: MorseGraph, coarse: MorseGraph) -> np.ndarray:
    fg, cg = fine.grid, coarse.grid
    if fg.space != cg.space:
        raise GridMismatch("fine and coarse grids cover different phase spaces")
    shifts = []
    for df, dc in zip(fg.subdivisions, cg.subdivisions):
        if df < dc:
            raise GridMismatch(
                "fine grid must subdivide at least as deeply as the coarse "
                f"grid on every axis (got {fg.subdivisions} vs {cg.subdivisions})"
            )
        shifts.append(df - dc)
    return np.array(shifts, dtype=np.int64)


def coarsen_boxes(fine: MorseGraph, coarse: MorseGraph, boxes) -> np.ndarray:
    """Coarse boxes containing the given fine boxes; exact index shifts."""
    shifts = _refinement_shifts(fine, coarse)
    mi = np.stack([fine.grid.multi_index(int(b)) for b in np.atleast_1d(boxes)])
    cmi = mi >> shifts[None, :]
    lin = np.ravel_multi_index(tuple(cmi.T), coarse.grid.shape)
    return np.unique(lin)


class NuMap:
    """Assignment fine node -> coarse node with verification flags."""

    def __init__(self, assignment, straddles, well_defined, surjective,
                 order_preserving, counterexamples):
        self.assignment = dict(assignment)
        self.straddles = list(straddles)  # RegionStraddlesTiles instances
        self.well_defined = bool(well_defined)
        self.surjective = bool(surjective)
        self.order_preserving = bool(order_preserving)
        self.counterexamples = list(counterexamples)

    def __call__(self, q: int) -> int:
        return self.assignment[q]

    def to_jsonable(self) -> dict:
        return {
            "assignment": {str(k): v for k, v in self.assignment.items()},
            "straddles": [
                {"fine_node": e.node, "coarse_candidates": e.candidates}
                for e in self.straddles
            ],
            "well_defined": self.well_defined,
            "surjective": self.surjective,
            "order_preserving": self.order_preserving,
            "counterexamples": self.counterexamples,
            "note": (
                "The coarse Morse graph is an operational surrogate for a "
                "Morse representation of the underlying map; the projection "
                "relates two computed combinatorial objects."
            ),
        }


def morse_tiles(graph: MorseGraph) -> dict:
    """Tile of each node: downset minus the downsets of smaller nodes."""
    tiles = {}
    for q in graph.nodes:
        mask = np.zeros(graph.grid.box_count, dtype=bool)
        mask[graph.downset_of(q)] = True
        for qp in graph.nodes:
            if (qp, q) in graph.order:  # qp < q
                mask[graph.downset_of(qp)] = False
        tiles[q] = mask
    return tiles


def project(fine: MorseGraph, coarse: MorseGraph) -> NuMap:
    """Map each fine node to the coarse node whose tile holds its region."""
    _refinement_shifts(fine, coarse)
    tiles = morse_tiles(coarse)
    assignment = {}
    straddles = []
    for q in fine.nodes:
        cboxes = coarsen_boxes(fine, coarse, fine.region_of(q))
        candidates = [m for m in coarse.nodes if tiles[m][cboxes].all()]
        if len(candidates) == 1:
            assignment[q] = candidates[0]
        else:
            if not candidates:
                # report which tiles the region touches
                candidates = [m for m in coarse.nodes if tiles[m][cboxes].any()]
            straddles.append(RegionStraddlesTiles(q, candidates))

    well_defined = not straddles and len(assignment) == len(fine.nodes)
    hit = set(assignment.values())
    surjective = well_defined and hit == set(coarse.nodes)
    counterexamples = []
    order_preserving = well_defined
    if well_defined:
        for a, b in fine.order:  # a < b
            if not coarse.leq(assignment[a], assignment[b]):
                order_preserving = False
                counterexamples.append(
                    {"fine_pair": [a, b],
                     "coarse_pair": [assignment[a], assignment[b]]}
                )
    return NuMap(assignment, straddles, well_defined, surjective,
                 order_preserving, counterexamples)


def check_epimorphism(nu: NuMap, fine: MorseGraph, coarse: MorseGraph) -> dict:
    """Independent verification that nu is a poset epimorphism."""
    missing = [q for q in fine.nodes if q not in nu.assignment]
    unhit = sorted(set(coarse.nodes) - set(nu.assignment.values()))
    violations = []
    for a, b in fine.order:
        if a in nu.assignment and b in nu.assignment:
            if not coarse.leq(nu.assignment[a], nu.assignment[b]):
                violations.append(
                    {"fine_pair": [a, b],
                     "coarse_pair": [nu.assignment[a], nu.assignment[b]]}
                )
    return {
        "total": not missing,
        "missing_fine_nodes": missing,
        "surjective": not unhit,
        "unhit_coarse_nodes": unhit,
        "order_preserving": not violations,
        "order_violations": violations,
        "is_epimorphism": not missing and not unhit and not violations,
    }
